"""ACO against epidemic flooding on the bundled city scenario.

Fifty vehicles roam a 1 km square with two parking areas.  Flooding gets
replies back most reliably; the ACO router pays far fewer transmissions per
delivered message because replies, bookings and acks travel single-copy.
Pass a number on the command line to change how many seeds are run.
"""

# %%
import statistics
import sys

from dtn_parking import RouterKind, build_scenario, bundled_config, run_simulation
from dtn_parking.core import MessageKind

cfg = bundled_config()
seeds = range(1, 1 + (int(sys.argv[1]) if len(sys.argv) > 1 else 3))

rows = {}
for router in ("aco", "epidemic"):
    for seed in seeds:
        scenario, run_cfg = build_scenario(cfg, seed)
        scenario.router = RouterKind(router)
        m = run_simulation(scenario, run_cfg).metrics
        rows.setdefault(router, []).append(
            (m.overhead_ratio, m.kinds[MessageKind.PARKING_REPLY].delivery_ratio, m.booking_success_ratio)
        )

# %%
print(f"{'router':<10}{'overhead':>10}{'reply dlv':>11}{'booked':>9}")
for router, vals in rows.items():
    o, d, b = (statistics.median(col) for col in zip(*vals))
    print(f"{router:<10}{o:>10.2f}{d:>11.3f}{b:>9.3f}")
