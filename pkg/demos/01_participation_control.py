"""A single client's participation loop, in isolation.

The controller holds a threshold delta. The client fires whenever the
distance between the server parameters and its last upload reaches
delta; a low-pass filter tracks the realized firing rate, and an
integral law steers that rate to a target. This script drives one
controller with a scripted distance stream and shows:

* the time-averaged firing rate converging to the target at O(1/T),
* the exact telescoping identity holding at every prefix,
* the threshold never escaping its guaranteed envelope.

Run: python demos/01_participation_control.py
"""

import numpy as np

from fedback import (
    ClientController,
    ControllerGains,
    participation_identity_residual,
    rate_tracking_constants,
    select_clients,
    threshold_bounds,
)

TARGET = 0.25
ROUNDS = 3000

gains = ControllerGains(gain=2.0, filter_alpha=0.9)
controller = ClientController(target=TARGET)
rng = np.random.default_rng(0)

# The distance stream stands in for |server params - last upload| on a
# real run: here it wanders in [0, 2] with occasional spikes.
distances = rng.uniform(0.0, 2.0, ROUNDS)
distances[rng.integers(0, ROUNDS, 30)] += 3.0

print(f"target rate {TARGET}, gain {gains.gain}, filter constant {gains.filter_alpha}\n")
print(f"{'round':>6} {'rate so far':>12} {'threshold':>10} {'load':>6}")

deltas = [controller.delta]
for k in range(ROUNDS):
    fired = select_clients(
        [controller], np.array([distances[k]]), np.array([[0.0]]), gains
    )
    deltas.append(controller.delta)
    if (k + 1) in (1, 10, 100, 1000, ROUNDS):
        rate = controller.cumulative_events / (k + 1)
        print(f"{k + 1:>6} {rate:>12.4f} {controller.delta:>10.3f} {controller.load:>6.3f}")

rate = controller.cumulative_events / ROUNDS
residual = participation_identity_residual(controller, gains, ROUNDS)
print(f"\nrealized rate {rate:.4f} vs target {TARGET}")
print(f"exact participation identity residual: {residual:.2e}")

c_lower, c_upper = rate_tracking_constants(0.0, gains, controller.max_trigger_distance)
print(f"guaranteed deviation band at T={ROUNDS}: [{c_lower / ROUNDS:+.5f}, {c_upper / ROUNDS:+.5f}]")
print(f"observed deviation: {rate - TARGET:+.5f}")

lower, upper = threshold_bounds(0.0, gains, controller.max_trigger_distance)
print(f"\nthreshold envelope: [{lower:.2f}, {upper:.2f}]")
print(f"realized threshold range: [{min(deltas):.2f}, {max(deltas):.2f}]")
