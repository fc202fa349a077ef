"""The labelling pool: priority blending, eviction, leases, consensus counting.

Run: python demos/02_label_queue.py
"""
from datetime import datetime, timedelta, timezone

from labelloop import LabelQueue, QueueConfig, priority_score

T0 = datetime(2021, 6, 1, tzinfo=timezone.utc)
config = QueueConfig(capacity=3, alpha=0.5, recency_halflife=3600.0,
                     consensus_k=2, lease_duration=600.0)

print("priority = alpha*uncertainty + (1-alpha)*2^(-age/halflife)")
for uncertainty, age_h in [(1.0, 0), (0.6, 1), (0.6, 24), (0.1, 0)]:
    score = priority_score(uncertainty, T0, T0 + timedelta(hours=age_h), config)
    print(f"  uncertainty={uncertainty:.1f} age={age_h:>2}h -> {score:.3f}")

queue = LabelQueue(config)
now = T0
print("\nfilling a capacity-3 queue, then offering a stronger candidate:")
for doc, u in [("old-sure", 0.05), ("old-vague", 0.6), ("fresh", 0.4)]:
    print(f"  offer {doc:9} u={u:.2f}:", queue.offer(doc, now, u, now).status)
result = queue.offer("hot", now, 0.95, now)
print(f"  offer {'hot':9} u=0.95: {result.status} (evicted {result.evicted})")

print("\nserving two annotators to consensus_k=2:")
for user in ("ann", "ben", "cat"):
    doc = queue.next_for_user(user, now)
    print(f"  next for {user}: {doc}")
    if doc is not None and user != "cat":
        print(f"  {user} completes {doc}:", queue.complete(user, doc, now))
print("  queue size now:", len(queue))
