"""One request, end to end, on a three-node chain.

Vehicle 0 reaches parking server 2 through relay 1.  The trace shows the
request flooding out, the reply and booking ack retracing the path while
laying pheromone, and the slot being held.
"""

# %%
from dtn_parking import RunConfig, Scenario, run_simulation, RouterKind, VehicleCategory
from dtn_parking.engine import RequestSpec
from dtn_parking.mobility import static_trace
from dtn_parking.parking import CATEGORIES, CategorySlots, ParkingServer, SlotInventory, query_vacancy

server = ParkingServer(2, 0, SlotInventory({c: CategorySlots(2, 20.0) for c in CATEGORIES}))
scenario = Scenario(
    name="chain", num_nodes=3, servers=[server],
    contacts=static_trace([(0, 1), (1, 2)]), membership=[],
    requests=[RequestSpec(0, 0, 0, VehicleCategory.CAR)], router=RouterKind.ACO,
)
result = run_simulation(scenario, RunConfig(seed=1, duration=5_000))

# %%
for line in result.trace.splitlines():
    if not line.split(",")[1] in ("join", "contact_up"):
        print(line)

# %%
print("free cars left:", query_vacancy(result.servers[2], VehicleCategory.CAR)[0])
print("pheromone at the vehicle:", result.pheromone[0])
print("booking success ratio:", result.metrics.booking_success_ratio)
