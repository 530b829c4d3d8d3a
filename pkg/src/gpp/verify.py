"""Independent reference computations used to check the production code.

Everything here is deliberately naive: the ones-matrix is materialised,
linear systems are solved by hand-rolled elimination, and minimisation is
exhaustive. None of it reuses the code paths it is meant to check.
"""

import numpy as np

from .errors import DimensionMismatch, SingularSystem
from .sensing import CalibrationParams


def finite_diff_grad(f, x, h: float = 1e-5) -> np.ndarray:
    """Central differences (f(x + h e_i) - f(x - h e_i)) / 2h, coordinate by coordinate."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.empty(flat.size)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = f(x)
        flat[i] = keep - h
        down = f(x)
        flat[i] = keep
        grad[i] = (up - down) / (2.0 * h)
    return grad.reshape(x.shape)


def _dense(op, y, x):
    phi = np.asarray(op.entries, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if phi.shape != (y.size, x.size):
        raise DimensionMismatch(f"operator {phi.shape} incompatible with y{y.shape}, x{x.shape}")
    return phi, np.ones_like(phi), y, x


def naive_calibration_loss(op, y, x, a, b) -> float:
    phi, ones, y, x = _dense(op, y, x)
    r = y - (a * phi + b * ones) @ x
    return float(r @ r)


def naive_stats(op, y, x):
    """(c_phi, c_one, theta_phi, theta_one, lam) with the ones-matrix built."""
    phi, ones, y, x = _dense(op, y, x)
    u, v = phi @ x, ones @ x
    return float(y @ u), float(y @ v), float(u @ u), float(v @ v), float(u @ v)


def grid_search_calibration(op, y, x, a_range=(-2.0, 2.0), b_range=(-2.0, 2.0),
                            resolution: float = 1e-2) -> CalibrationParams:
    """Exhaustive minimiser of |y - (a Phi + b 1) x|^2 over a rectangular grid.

    Scan order is a-major; ties go to the lowest scan index, so a constant
    landscape (x = 0) returns the grid corner (a_range[0], b_range[0]).
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    phi, ones, y, x = _dense(op, y, x)
    u, v = phi @ x, ones @ x
    a = a_range[0] + resolution * np.arange(int(round((a_range[1] - a_range[0]) / resolution)) + 1)
    b = b_range[0] + resolution * np.arange(int(round((b_range[1] - b_range[0]) / resolution)) + 1)
    # |y - a u - b v|^2 expanded; rows of the grid are one value of a
    row = y @ y - 2.0 * a * (y @ u) + a * a * (u @ u)
    col = -2.0 * b * (y @ v) + b * b * (v @ v)
    best_val, best = np.inf, (0, 0)
    for i in range(a.size):
        losses = row[i] + col + (2.0 * a[i] * (u @ v)) * b
        j = int(np.argmin(losses))
        if losses[j] < best_val:
            best_val, best = losses[j], (i, j)
    return CalibrationParams(float(a[best[0]]), float(b[best[1]]))


def stationarity_residual(op, y, x, cal: CalibrationParams):
    """|dL/da| and |dL/db| of L = |y - (a Phi + b 1) x|^2 from the expanded quadratic form.

    dL/da = -y'Phi x - x'Phi'y + x'[2a Phi'Phi + b Phi'1 + b 1'Phi] x
    dL/db = -y'1 x   - x'1'y   + x'[a Phi'1 + a 1'Phi + 2b 1'1] x
    """
    phi, ones, y, x = _dense(op, y, x)
    a, b = cal.a, cal.b
    da = (-(y @ phi @ x) - (x @ phi.T @ y)
          + x @ (2 * a * phi.T @ phi + b * phi.T @ ones + b * ones.T @ phi) @ x)
    db = (-(y @ ones @ x) - (x @ ones.T @ y)
          + x @ (a * phi.T @ ones + a * ones.T @ phi + 2 * b * ones.T @ ones) @ x)
    return abs(float(da)), abs(float(db))


def gaussian_solve(A, rhs, pivot_tol: float = 1e-10) -> np.ndarray:
    """Solve A z = rhs by elimination with partial pivoting.

    Raises SingularSystem when a pivot falls below ``pivot_tol`` times the
    largest absolute entry of A.
    """
    A = np.array(A, dtype=np.float64)
    r = np.array(rhs, dtype=np.float64)
    n = A.shape[0]
    scale = max(np.abs(A).max(), 1e-300)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        if abs(A[piv, col]) < pivot_tol * scale:
            raise SingularSystem(f"pivot {A[piv, col]:.3e} in column {col}")
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
            r[[col, piv]] = r[[piv, col]]
        for row in range(col + 1, n):
            f = A[row, col] / A[col, col]
            A[row, col:] -= f * A[col, col:]
            r[row] -= f * r[col]
    z = np.zeros(n)
    for row in range(n - 1, -1, -1):
        z[row] = (r[row] - A[row, row + 1:] @ z[row + 1:]) / A[row, row]
    return z


def least_squares_oracle(op, y, W) -> np.ndarray:
    """argmin_z |y - Phi W z| from the normal equations."""
    M = np.asarray(op.entries, dtype=np.float64) @ np.asarray(W, dtype=np.float64)
    return gaussian_solve(M.T @ M, M.T @ np.asarray(y, dtype=np.float64))


# --- planted instances --------------------------------------------------------


def planted_generator(latent_dim: int = 8, tau: int = 16, seed: int = 7,
                      std: float = 0.3):
    """Fixed random tiny generator used for planted-range instances.

    A small latent dimension and a wide init keep the generator Jacobian well
    conditioned and its outputs spread over [0, 1], so exact recovery is
    reachable by first-order descent in a few thousand steps.
    """
    from .tensornet import make_generator
    return make_generator(latent_dim, tau, seed, std)


def planted_image(net, grid_rows: int = 2, grid_cols: int = 2, seed: int = 0):
    """Image tiled from G(z0) with z0 ~ U(0,1); returns (image, z0)."""
    from .imagecore import PatchSet, inverse_patch_transform
    from .rng import SplitMix64
    count = grid_rows * grid_cols
    z0 = SplitMix64(seed).uniform(count * net.latent_dim).reshape(count, net.latent_dim)
    patches, _ = net.run(z0)
    ps = PatchSet(net.tau_out, grid_rows, grid_cols, patches)
    return inverse_patch_transform(ps), z0


# --- self-check suite ---------------------------------------------------------


def _rel(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)))


def _calibration_instance(seed, m=16, n=64):
    from .rng import SplitMix64
    from .sensing import make_operator
    rng = SplitMix64(seed)
    op = make_operator(m, n, seed)
    x = rng.uniform(n)
    a, b = rng.uniform(2) * 3.0 - 1.5
    y = (a * op.entries + b * np.ones((m, n))) @ x + 0.1 * rng.normal(m)
    return op, y, x


def check_suite(quick: bool = True):
    """Run every oracle pairing once; returns a list of (name, passed, detail)."""
    from .calibrate import calib_stats, calibration_loss, solve_calibration
    from .imagecore import inverse_patch_transform, patch_transform
    from .recovery import RecoveryConfig, recover_gpp
    from .rng import SplitMix64
    from .sensing import (CalibrationParams, MeasurementBundle, Model,
                          forward_calibrated, make_operator)
    from .tensornet import grad_wrt_latent, grad_wrt_weights, make_generator

    results = []

    def record(name, ok, detail):
        results.append((name, bool(ok), detail))

    count = 10 if quick else 100
    worst = 0.0
    for s in range(count):
        op, y, x = _calibration_instance(s)
        fast = calib_stats(op, y, x)
        ref = naive_stats(op, y, x)
        worst = max(worst, _rel([fast.c_phi, fast.c_one, fast.theta_phi,
                                 fast.theta_one, fast.lam], ref))
    record("calib_stats_vs_naive", worst < 1e-12, f"max rel err {worst:.2e}")

    worst = 0.0
    for s in range(count):
        op, y, x = _calibration_instance(s)
        cal = solve_calibration(calib_stats(op, y, x))
        da, db = stationarity_residual(op, y, x, cal)
        worst = max(worst, max(da, db) / max(1.0, float(y @ y)))
    record("closed_form_stationarity", worst <= 1e-8, f"max scaled partial {worst:.2e}")

    ok = True
    for s in range(3 if quick else count):
        op, y, x = _calibration_instance(s)
        cal = solve_calibration(calib_stats(op, y, x))
        grid = grid_search_calibration(op, y, x, resolution=1e-2)
        ok &= abs(grid.a - cal.a) <= 1e-2 + 1e-12 and abs(grid.b - cal.b) <= 1e-2 + 1e-12
    record("closed_form_vs_grid_search", ok, "resolution 1e-2")

    worst = 0.0
    for s in range(count):
        op, _, x = _calibration_instance(s)
        for a, b in ((0.85, 0.5), (1.0, 0.0), (0.3, -0.25)):
            y = forward_calibrated(op, CalibrationParams(a, b), x)
            cal = solve_calibration(calib_stats(op, y, x))
            worst = max(worst, abs(cal.a - a), abs(cal.b - b))
    record("planted_calibration_identity", worst <= 1e-9, f"max abs err {worst:.2e}")

    worst = 0.0
    for s in range(count):
        op, y, x = _calibration_instance(s)
        cal = CalibrationParams(*(SplitMix64(s + 99).uniform(2) * 4 - 2))
        num = finite_diff_grad(
            lambda ab: calibration_loss(op, y, x, CalibrationParams(ab[0], ab[1])),
            np.array([cal.a, cal.b]), h=1e-4)
        da, db = stationarity_residual(op, y, x, cal)
        worst = max(worst, _rel(np.abs(num), [da, db]))
    record("stationarity_vs_finite_diff", worst < 1e-6, f"max rel err {worst:.2e}")

    net = make_generator(6, 16, seed=3, std=0.3)
    rng = SplitMix64(11)
    z = rng.uniform(6)
    up = rng.normal(256)
    f = lambda zz: float(generate_dot(net, zz, up))
    err_z = _rel(grad_wrt_latent(net, z, up), finite_diff_grad(f, z))
    record("latent_gradient_vs_finite_diff", err_z < 1e-4, f"max rel err {err_z:.2e}")

    idx = np.linspace(0, net.num_params - 1, 40).astype(int)
    gw = grad_wrt_weights(net, z, up)[idx]

    def fw(sub):
        w = net.weights.copy()
        w[idx] = sub
        return float(generate_dot(net.with_weights(w), z, up))

    err_w = _rel(gw, finite_diff_grad(fw, net.weights[idx]))
    record("weight_gradient_vs_finite_diff", err_w < 1e-4, f"max rel err {err_w:.2e}")

    from .tensornet import linear_generator
    worst = 0.0
    for s in range(2 if quick else 20):
        rng = SplitMix64(500 + s)
        W = rng.normal(64 * 8).reshape(64, 8) / 8
        z0 = 0.25 + 0.5 * rng.uniform(8)
        op = make_operator(32, 64, s)
        y = op.entries @ W @ z0 + 0.01 * rng.normal(32)
        bundle = MeasurementBundle(Model.LINEAR, y[None], 8, 1, 1, s, 64, operator=op)
        res = recover_gpp(bundle, linear_generator(W), RecoveryConfig("gpp", seed=s, iters=2000))
        worst = max(worst, float(np.abs(res.latents[0] - least_squares_oracle(op, y, W)).max()))
    record("linear_generator_vs_normal_equations", worst < 1e-3, f"max coord err {worst:.2e}")

    ok = True
    for s in range(5):
        rng = SplitMix64(s)
        h, w = 8 + int(rng.uniform(1)[0] * 30), 8 + int(rng.uniform(1)[0] * 30)
        img = rng.uniform(h * w).reshape(h, w)
        ps = patch_transform(img, 8, "replicate")
        ok &= np.array_equal(inverse_patch_transform(ps, h, w), img)
    record("patch_roundtrip", ok, "replicate padding, 5 random sizes")
    return results


def generate_dot(net, z, upstream):
    """<upstream, G(z)>, the scalar whose gradient the tensornet pullbacks return."""
    out, _ = net.run(np.asarray(z, dtype=np.float64).reshape(1, -1))
    return out[0] @ upstream
