"""Closed-form gain/shift estimation for the model y = (a Phi + b 1) x.

For fixed x the residual is linear in (a, b), so the least-squares pair
comes from a 2x2 normal system written in five scalars::

    c_phi     = y . (Phi x)          theta_phi = |Phi x|^2
    c_one     = y . (1 x)            theta_one = |1 x|^2
    lam       = (Phi x) . (1 x)

    a* = (c_one lam - c_phi theta_one) / (lam^2 - theta_phi theta_one)
    b* = (c_one - a* lam) / theta_one

Since 1 x is sum(x) repeated m times, the scalars involving it reduce to
sums and no m x n ones-matrix is ever built.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput
from .sensing import IDEAL, CalibrationParams, MeasurementOperator

EPS_DEN = 1e-12
EPS_ABS = 1e-12


@dataclass(frozen=True)
class CalibStats:
    """The five scalars; fields may also be arrays (one entry per patch)."""

    c_phi: float
    c_one: float
    theta_phi: float
    theta_one: float
    lam: float


def _check(op, y, x):
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y.shape[-1] != op.m or x.shape[-1] != op.n:
        raise DimensionMismatch(
            f"expected y of length {op.m} and x of length {op.n}, "
            f"got {y.shape[-1]} and {x.shape[-1]}")
    return y, x


def stats_from_projection(y, phix, xsum) -> CalibStats:
    """Scalars from precomputed Phi x and sum(x); works along the last axis."""
    m = phix.shape[-1]
    return CalibStats(
        c_phi=np.sum(y * phix, axis=-1),
        c_one=xsum * np.sum(y, axis=-1),
        theta_phi=np.sum(phix * phix, axis=-1),
        theta_one=m * xsum * xsum,
        lam=xsum * np.sum(phix, axis=-1),
    )


def calib_stats(op: MeasurementOperator, y, x) -> CalibStats:
    y, x = _check(op, y, x)
    stats = stats_from_projection(y, x @ op.entries.T, x.sum(axis=-1))
    if np.ndim(stats.c_phi) == 0:
        stats = CalibStats(*(float(v) for v in (stats.c_phi, stats.c_one, stats.theta_phi,
                                                 stats.theta_one, stats.lam)))
    return stats


def solve_batch(stats: CalibStats):
    """Vectorised closed form; returns arrays (a, b, degenerate)."""
    c_phi, c_one, th_phi, th_one, lam = (np.asarray(v, dtype=np.float64) for v in (
        stats.c_phi, stats.c_one, stats.theta_phi, stats.theta_one, stats.lam))
    den = lam * lam - th_phi * th_one
    degenerate = (np.abs(den) < EPS_DEN * th_phi * th_one) | (th_one < EPS_ABS) | (den == 0)
    safe_den = np.where(degenerate, 1.0, den)
    safe_one = np.where(degenerate, 1.0, th_one)
    a = np.where(degenerate, 1.0, (c_one * lam - c_phi * th_one) / safe_den)
    b = np.where(degenerate, 0.0, (c_one - a * lam) / safe_one)
    return a, b, degenerate


def solve_calibration(stats: CalibStats) -> CalibrationParams:
    """(a*, b*) for one patch, or the flagged fallback (1, 0) if unidentifiable."""
    a, b, degenerate = solve_batch(stats)
    if np.ndim(a):
        raise ValueError("solve_calibration takes scalar stats; use solve_batch")
    if degenerate:
        return CalibrationParams(IDEAL.a, IDEAL.b, degenerate=True)
    return CalibrationParams(float(a), float(b))


def calibration_loss(op: MeasurementOperator, y, x, cal: CalibrationParams) -> float:
    """|y - (a Phi + b 1) x|^2."""
    y, x = _check(op, y, x)
    r = y - cal.a * (op.entries @ x) - cal.b * x.sum()
    return float(r @ r)


def average_params(per_patch) -> CalibrationParams:
    """Arithmetic mean of per-patch estimates, summed in patch order."""
    per_patch = list(per_patch)
    if not per_patch:
        raise EmptyInput("no calibration estimates to average")
    sa = sb = 0.0
    for p in per_patch:
        sa += p.a
        sb += p.b
    return CalibrationParams(sa / len(per_patch), sb / len(per_patch))
