"""Tracking a graph that changes while the observer is watching.

Halfway through the run every arc of the network is redrawn. Because
the estimator processes snapshots online with a constant learning rate,
its error spikes when the graph changes and then decays back to the
previous plateau at an exponential rate, with no restart or schedule.
"""

import numpy as np

from beliefgraph import Event, EventSchedule, ExperimentConfig, run_experiment

EVENT_AT = 15000

config = ExperimentConfig(
    agents=10, states=3, signals=4, edge_prob=0.35, delta=0.3, mu=0.01,
    iterations=30000, true_state=1, mode="known",
    seed_graph=21, seed_weights=22, seed_likelihoods=23, seed_signals=24,
    schedule=EventSchedule((Event(EVENT_AT, "regenerate_graph", 900),)),
)
result = run_experiment(config)
trajectory = result.modes["known"].msd

pre = trajectory[EVENT_AT - 2000:EVENT_AT - 1].mean()
print(f"plateau before the change : {pre:.5f}")
print(f"deviation at the change   : {trajectory[EVENT_AT - 1]:.4f} "
      f"({trajectory[EVENT_AT - 1] / pre:.0f}x the plateau)")
print(f"plateau at the end        : {trajectory[-3000:].mean():.5f}\n")

print("decay after the event (iteration: deviation):")
for offset in (0, 200, 500, 1000, 2000, 4000, 8000, 14999):
    i = EVENT_AT + offset
    print(f"  {i:>6}: {trajectory[i - 1]:.5f}")

segment = trajectory[EVENT_AT + 4:EVENT_AT + 2000]
x = np.arange(segment.size, dtype=float)
slope = np.polyfit(x, np.log(segment), 1)[0]
print(f"\nlog-deviation slope over the first 2000 post-event iterations: "
      f"{slope:.2e} per iteration")
print(f"that is a halving time of about {np.log(2) / -slope:.0f} iterations.")
