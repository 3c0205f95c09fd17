"""Who counts as a valid receiver?

A vehicle's membership in an area group is a set of half-open intervals.
This walk-through builds a small history and asks the three receiver
predicates the same question at different instants.
"""

# %%
from dtn_parking import Current, TemporalInterval, TemporalPoint, valid_receiver
from dtn_parking.membership import history_from_events, join, leave

# Node 7 is inside area group 1 during [5 000, 9 000) ms and again from 20 000 ms on.
h = history_from_events([join(7, 1, 5_000), leave(7, 1, 9_000), join(7, 1, 20_000)])
print("intervals:", h.intervals(7, 1))

# %%
# The same delivery attempts judged by each model.
specs = {
    "current": Current(),
    "interval [0, 10s]": TemporalInterval(0, 10_000),
    "point 6s": TemporalPoint(6_000),
    "point 30s": TemporalPoint(30_000),
}
for t in (4_000, 7_000, 12_000, 25_000):
    row = {name: valid_receiver(spec, h, 7, 1, t) for name, spec in specs.items()}
    print(f"t={t:>6} ms", row)

# %%
# A point in the future is "not yet", and an interval is judged only on the
# part that has already elapsed, so qualification can arrive late but is
# never withdrawn.
late = TemporalInterval(15_000, 40_000)
print([valid_receiver(late, h, 7, 1, t) for t in (16_000, 19_999, 20_000, 35_000)])
