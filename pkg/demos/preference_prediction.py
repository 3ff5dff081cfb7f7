"""Predict which query a user will issue from the current context.

Run: python demos/preference_prediction.py
"""

import numpy as np

from msnp.data import TABLE1, generate_records
from msnp.domain import ContextValue, FilterRule, ImportanceRule, Query, contexts_of
from msnp.predictor import PredictionModel, evaluate_accuracy

records = generate_records(TABLE1, 100, seed=0)
print("first records:")
for r in records[:3]:
    print("  ", r.query.qid, sorted((c.ctype, c.value) for c in r.contexts))

model = PredictionModel(records)
now = contexts_of({"CL": "L1", "CT": "T1"})
print("\nranking for location L1 at time T1:")
for q, score in model.predict(now).ranking:
    print(f"  {q.qid}  {score:.3f}")

# Weighting location for Q1 pushes it up; Q2 is then scored on location alone.
tuned = PredictionModel(records, [ImportanceRule("CL", "Q1", 2.0)], [FilterRule("Q2", {"CT"})])
print("\nwith location weighted for Q1 and time ignored for Q2:")
for q, score in tuned.predict(now).ranking:
    print(f"  {q.qid}  {score:.3f}")

# A manual override answers outright for one exact context set.
pinned = PredictionModel(records, manual_override={now: Query("Q5")})
print("\noverride ->", pinned.predict(now).top.qid)

print("\naccuracy against training fraction (20 seeds):")
for f in (0.6, 0.7, 0.8, 0.9):
    acc = [evaluate_accuracy(generate_records(TABLE1, 100, s), f) for s in range(20)]
    print(f"  f={f:.1f}  {np.mean(acc):.3f} +- {np.std(acc):.3f}")

unseen = {ContextValue("CL", "L1"), ContextValue("CW", "nowhere")}
print("\nunseen context values are dropped:", model.predict(unseen).top.qid)
