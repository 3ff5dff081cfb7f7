"""Walk through the three discovery models on a growing crowd of providers.

Run: python demos/discovery_models.py
"""

import numpy as np

from msnp.simnet import default_sim_config, run_prefpush, run_pull, run_push, staggered_schedule

cfg = default_sim_config()
print("shipped config:")
for key, value in cfg.as_dict().items():
    print(f"  {key:24s} {value}")

# One provider first. Pull pays a fetch, a parse and a match; nothing waits
# on the provider, so with a single peer it is the quickest route.
single = cfg.replace(n_providers=1)
for run in (run_pull, run_push, run_prefpush):
    r = run(single)
    print(f"{r.model:9s} 1 provider  makespan {r.makespan_ms:8.1f} ms  messages {r.messages}")

# Now sweep the crowd size. Pull serialises every parse on the requester,
# push and prefpush overlap the work across providers.
print("\n   n     pull      push  prefpush   (mean makespan ms, 10 seeds)")
for n in (50, 100, 200, 300, 400, 500):
    row = []
    for run in (run_pull, run_push, run_prefpush):
        row.append(np.mean([run(cfg.replace(n_providers=n, seed=s)).makespan_ms for s in range(10)]))
    print(f"{n:4d} " + " ".join(f"{v:9.0f}" for v in row))

# Providers arriving five per second for 100 seconds: the resource proxies.
staggered = staggered_schedule(cfg)
print("\nstaggered arrivals, seed 0")
for run in (run_pull, run_push, run_prefpush):
    r = run(staggered)
    print(f"{r.model:9s} cpu {r.cpu_ms:8.0f} ms  ram peak {r.ram_bytes_peak:9d} B  messages {r.messages}")
