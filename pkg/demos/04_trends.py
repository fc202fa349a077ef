"""Hourly buckets, stacked moving averages, and the sentiment index.

Plants a positive:negative ratio flip (2:1 -> 1:2 at day 10) and shows the
standardized index crossing zero shortly after.

Run: python demos/04_trends.py
"""
import random
from datetime import datetime, timedelta, timezone

from labelloop import TrendStore, trend_query

T0 = datetime(2021, 6, 1, tzinfo=timezone.utc)
rng = random.Random(3)
store = TrendStore()

for day in range(20):
    positive_share = 2 / 3 if day < 10 else 1 / 3
    for hour in range(24):
        for _ in range(4):
            label = "positive" if rng.random() < positive_share else "negative"
            store.add(T0 + timedelta(hours=day * 24 + hour,
                                     minutes=rng.uniform(0, 59)), label)

points = trend_query(store, T0, T0 + timedelta(days=20, hours=1))
print(f"{len(points)} hourly buckets; showing one per day\n")
print("day  pos neg   ma1d_pos  ma1d_neg      r   index")
for day in range(20):
    p = points[day * 24 + 12]
    print(f"{day:>3}  {p.counts['positive']:>3} {p.counts['negative']:>3}"
          f"   {p.ma_counts['positive']:8.3f}  {p.ma_counts['negative']:8.3f}"
          f"  {p.r:5.2f}  {p.index:+6.2f}")

crossing = next(i for i, p in enumerate(points) if i >= 240 and p.index < 0)
print(f"\nindex crossed zero {(crossing - 240) / 24:.1f} days after the shift")
