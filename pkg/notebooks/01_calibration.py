"""Blind gain/offset calibration from one patch and its measurements.

A sensor that reports y = a*Phi*x + b*1*x instead of Phi*x can be undone
in closed form once a candidate patch x is available.
"""

# %% Setup: one 16x16 patch, 64 measurements, unknown (a, b).
import numpy as np

from gpp import CalibrationParams, SplitMix64, calib_stats, make_operator, solve_calibration
from gpp.sensing import forward_calibrated
from gpp.verify import grid_search_calibration, stationarity_residual

rng = SplitMix64(5)
n, m = 256, 64
x = rng.uniform(n)
op = make_operator(m, n, seed=5)
truth = CalibrationParams(0.85, 0.5)
y = forward_calibrated(op, truth, x)

# %% Noise-free: five scalar statistics pin (a, b) exactly.
est = solve_calibration(calib_stats(op, y, x))
print(f"true   a={truth.a:.6f} b={truth.b:.6f}")
print(f"closed a={est.a:.12f} b={est.b:.12f}")

# %% With noise the closed form is still the exact least-squares minimizer.
y_noisy = y + 0.05 * rng.normal(m)
est = solve_calibration(calib_stats(op, y_noisy, x))
da, db = stationarity_residual(op, y_noisy, x, est)
grid = grid_search_calibration(op, y_noisy, x, resolution=1e-3)
print(f"noisy  a={est.a:.6f} b={est.b:.6f}  |dL/da|={da:.1e} |dL/db|={db:.1e}")
print(f"grid   a={grid.a:.3f} b={grid.b:.3f}")

# %% A zero patch carries no information: the solver falls back to (1, 0).
flat = solve_calibration(calib_stats(op, y, np.zeros(n)))
print(f"zero patch -> a={flat.a} b={flat.b} degenerate={flat.degenerate}")
