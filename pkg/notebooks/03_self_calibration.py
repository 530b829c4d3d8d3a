"""Recovering through an uncalibrated sensor.

The plain engine assumes y = Phi*x and is misled by gain and offset errors.
The self-calibrating engine re-solves (a, b) from the current patch estimates
at every step and averages them across patches.
"""

# %% Setup: a small planted generator keeps the demo fast and exact.
from gpp.recovery import RecoveryConfig, sweep_calibration, sweep_csv
from gpp.verify import planted_generator, planted_image

net = planted_generator()
image, _ = planted_image(net, 2, 2, seed=1000)
sched = "0:200:5e-2,200:1000:5e-3"

# %% Sweep three sensor states.
rows = sweep_calibration(
    image, net, [(1.0, 0.0), (0.5, 0.0), (0.85, 0.5)], rate=0.5, seed=3,
    cfg_gpp=RecoveryConfig("gpp", lr_schedule=sched, restarts=3, seed=1),
    cfg_sc=RecoveryConfig("gpp-sc", lr_schedule=sched, restarts=3, seed=1))
print(sweep_csv(rows), end="")
