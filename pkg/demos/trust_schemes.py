"""Compare friend-based and public trust schemes on a planted rating graph.

In the planted graph a minority of raters are experts who rate accurately
and often. The public schemes have to find them among strangers.

Run: python demos/trust_schemes.py
"""

from msnp.data import planted_trust_graph
from msnp.harness import exp_trust_comparison

graph, quality, experts = planted_trust_graph(n_users=600, seed=0)
print(f"{len(quality)} users, {len(graph)} ratings, {len(experts)} experts")

report = exp_trust_comparison(graph)
print()
print(report.table())

rows = {r["scheme"]: r for r in report.rows}
gain = rows["proposed"]["accuracy"] - rows["naive"]["accuracy"]
print(f"weighting raters by credibility and experience gains {gain:.3f} over a plain average")
print("friend scheme with the best CPI:",
      max((r for r in report.rows if r["scheme"] in ("af", "afoaf", "hef", "hefhef", "msf")),
          key=lambda r: r["cpi"] or 0)["scheme"])
