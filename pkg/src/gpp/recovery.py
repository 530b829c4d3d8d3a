"""Patch-wise latent optimisation engines.

All engines share one loop: every patch owns a latent z_i in [0,1]^d and
its own Adam moments; each iteration generates x_i = G(z_i), evaluates a
per-patch objective and its gradient with respect to x_i, pulls that back
through the generator, takes one Adam step and clamps z_i to the box.

The objectives differ by forward model:

``gpp``     |y_i - Phi x_i|^2
``gpp-sc``  |y_i - (a Phi + b 1) x_i|^2 with (a, b) re-estimated in closed
            form from the current x_i every iteration and averaged over
            patches before the step
``phase``   |y_i * p_i - Phi x_i|^2 with p_i = sign(Phi x_i) frozen for the step
``mask``    |y_i - x_i[mask]|^2
"""

from dataclasses import dataclass, field

import numpy as np

from .calibrate import solve_batch, stats_from_projection
from .errors import ModelMismatch
from .imagecore import PatchSet, inverse_patch_transform, psnr, resize_matrix
from .rng import SplitMix64
from .sensing import (IDEAL, CalibrationParams, MeasurementBundle, Model, measure_image,
                      storage_rounded)
from .tensornet import AdamState, GeneratorNet, adam_step, project_box

MODES = ("gpp", "gpp-sc", "phase", "mask")

DEFAULT_SCHEDULES = {
    "gpp": [(0, 1500, 5e-3)],
    "gpp-sc": [(0, 200, 5e-2), (200, 2000, 5e-3)],
    "phase": [(0, 1500, 5e-3)],
    "mask": [(0, 1500, 5e-3)],
}

ACCEPTED_MODELS = {
    # plain GPP is also run on mis-calibrated data, as the uncalibrated baseline
    "gpp": (Model.LINEAR, Model.CALIBRATED),
    "gpp-sc": (Model.LINEAR, Model.CALIBRATED),
    "phase": (Model.PHASE,),
    "mask": (Model.MASK,),
}


def parse_schedule(text: str):
    """Parse ``"start:end:rate[,start:end:rate...]"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            start, end, rate = part.split(":")
            out.append((int(start), int(end), float(rate)))
        except ValueError:
            raise ValueError(f"bad schedule segment {part!r}") from None
    return out


def format_schedule(schedule) -> str:
    return ",".join(f"{s}:{e}:{r:g}" for s, e, r in schedule)


@dataclass
class RecoveryConfig:
    mode: str = "gpp"
    iters: int | None = None
    lr_schedule: list | None = None
    seed: int = 0
    trace_every: int = 10
    restarts: int = 1
    early_stop: bool = False
    stop_tol: float = 1e-8
    stop_window: int = 50

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lr_schedule is None:
            base = DEFAULT_SCHEDULES[self.mode]
            if self.iters is None:
                self.lr_schedule = list(base)
            else:
                self.lr_schedule = _truncate(base, self.iters)
        elif isinstance(self.lr_schedule, str):
            self.lr_schedule = parse_schedule(self.lr_schedule)
        self.lr_schedule = [(int(s), int(e), float(r)) for s, e, r in self.lr_schedule]
        if self.iters is None:
            self.iters = max((e for _, e, _ in self.lr_schedule), default=0)
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        self._check_schedule()

    def _check_schedule(self):
        pos = 0
        for start, end, rate in sorted(self.lr_schedule):
            if start != pos or end <= start:
                raise ValueError(
                    f"schedule must tile [0, {self.iters}) without gaps or overlap")
            pos = end
        if pos < self.iters:
            raise ValueError(f"schedule ends at {pos} but iters is {self.iters}")

    def lr_at(self, step: int) -> float:
        for start, end, rate in self.lr_schedule:
            if start <= step < end:
                return rate
        raise IndexError(step)


def _truncate(schedule, iters):
    """Cut a schedule at ``iters``, stretching the last phase if it is short."""
    out = []
    for start, end, rate in schedule:
        if start >= iters:
            break
        out.append((start, min(end, iters), rate))
    if out and out[-1][1] < iters:
        s, _, r = out[-1]
        out[-1] = (s, iters, r)
    return out


@dataclass
class RecoveryResult:
    image: np.ndarray
    final_loss: float
    calibration: CalibrationParams
    trace: list = field(default_factory=list)
    latents: np.ndarray | None = None
    patch_losses: np.ndarray | None = None
    patches: np.ndarray | None = None

    def trace_csv(self) -> str:
        lines = ["step,loss,a,b"]
        lines += [f"{s},{loss:.17g},{a:.17g},{b:.17g}" for s, loss, a, b in self.trace]
        return "\n".join(lines) + "\n"


# --- objectives -------------------------------------------------------------
# Each takes generated patches x of shape (R*P, n) and returns per-patch
# losses, dL/dx and the (a, b) pair used (one per restart group).


class _Linear:
    coupled = False

    def __init__(self, bundle, groups):
        self.phi = bundle.operator.entries
        self.y = np.tile(bundle.per_patch_y, (groups, 1))
        self.groups = groups

    def __call__(self, x):
        r = self.y - x @ self.phi.T
        cal = np.tile([1.0, 0.0], (self.groups, 1))
        return np.sum(r * r, axis=1), -2.0 * (r @ self.phi), cal


class _SelfCalibrating:
    coupled = True

    def __init__(self, bundle, groups):
        self.phi = bundle.operator.entries
        self.y = np.tile(bundle.per_patch_y, (groups, 1))
        self.groups = groups
        self.per_group = bundle.num_patches

    def estimate(self, u, s):
        a_i, b_i, _ = solve_batch(stats_from_projection(self.y, u, s))
        a_i = a_i.reshape(self.groups, self.per_group)
        b_i = b_i.reshape(self.groups, self.per_group)
        a = np.zeros(self.groups)
        b = np.zeros(self.groups)
        # ordered reduction, patch 0 first
        for i in range(self.per_group):
            a += a_i[:, i]
            b += b_i[:, i]
        return a / self.per_group, b / self.per_group

    def __call__(self, x):
        u = x @ self.phi.T
        s = x.sum(axis=1)
        a, b = self.estimate(u, s)
        a_p = np.repeat(a, self.per_group)[:, None]
        b_p = np.repeat(b, self.per_group)[:, None]
        r = self.y - a_p * u - b_p * s[:, None]
        grad = -2.0 * (a_p * (r @ self.phi) + b_p * r.sum(axis=1, keepdims=True))
        return np.sum(r * r, axis=1), grad, np.stack([a, b], axis=1)


class _Phase:
    coupled = False

    def __init__(self, bundle, groups):
        self.phi = bundle.operator.entries
        self.y = np.tile(bundle.per_patch_y, (groups, 1))
        self.groups = groups

    def __call__(self, x):
        v = x @ self.phi.T
        phase = np.where(v >= 0, 1.0, -1.0)
        r = self.y * phase - v
        cal = np.tile([1.0, 0.0], (self.groups, 1))
        return np.sum(r * r, axis=1), -2.0 * (r @ self.phi), cal


class _Mask:
    coupled = False

    def __init__(self, bundle, groups):
        self.mask = np.asarray(bundle.mask, dtype=np.int64)
        self.y = np.tile(bundle.per_patch_y, (groups, 1))
        self.n = bundle.n
        self.groups = groups

    def __call__(self, x):
        r = self.y - x[:, self.mask]
        grad = np.zeros_like(x)
        grad[:, self.mask] = -2.0 * r
        cal = np.tile([1.0, 0.0], (self.groups, 1))
        return np.sum(r * r, axis=1), grad, cal


_OBJECTIVES = {"gpp": _Linear, "gpp-sc": _SelfCalibrating, "phase": _Phase, "mask": _Mask}


# --- engine -----------------------------------------------------------------


def initial_latents(seed: int, restarts: int, patches: int, dim: int) -> np.ndarray:
    """i.i.d. U(0, 1) latents, restart-major."""
    return SplitMix64(seed).uniform(restarts * patches * dim).reshape(restarts * patches, dim)


def recover(bundle: MeasurementBundle, net: GeneratorNet, cfg: RecoveryConfig,
            z0=None) -> RecoveryResult:
    """Run the engine selected by ``cfg.mode``.

    ``z0`` overrides the seeded latent initialisation; it must have shape
    (restarts * num_patches, latent_dim).
    """
    if bundle.model not in ACCEPTED_MODELS[cfg.mode]:
        raise ModelMismatch(
            f"mode {cfg.mode!r} cannot use {bundle.model.name.lower()} measurements")
    P, R, d = bundle.num_patches, cfg.restarts, net.latent_dim
    objective = _OBJECTIVES[cfg.mode](bundle, R)

    resize = None
    if net.tau_out != bundle.tau:
        resize = resize_matrix(net.tau_out, bundle.tau)

    def evaluate(z):
        g, tape = net.run(z)
        x = g if resize is None else g @ resize.T
        losses, gx, cal = objective(x)
        return x, losses, gx, cal, tape

    if z0 is None:
        z = initial_latents(cfg.seed, R, P, d)
    else:
        z = project_box(np.array(z0, dtype=np.float64).reshape(R * P, d))
    state = AdamState.zeros_like(z)

    def summarise(losses, cal):
        per = losses.reshape(R, P)
        if objective.coupled:
            best = int(np.argmin(per.sum(axis=1)))
            return float(per[best].sum()), cal[best]
        totals = per.sum(axis=1)
        return float(per.min(axis=0).sum()), cal[int(np.argmin(totals))]

    trace = []
    history = []
    step = 0
    for step in range(cfg.iters):
        _, losses, gx, cal, tape = evaluate(z)
        total, (a, b) = summarise(losses, cal)
        if step % cfg.trace_every == 0:
            trace.append((step, total, float(a), float(b)))
        if cfg.early_stop:
            history.append(total)
            if len(history) > cfg.stop_window:
                old = history[-1 - cfg.stop_window]
                if abs(old - total) <= cfg.stop_tol * max(abs(old), 1e-300):
                    break
        if resize is not None:
            gx = gx @ resize
        gz, _ = net.pullback(tape, gx, need_params=False)
        z = project_box(adam_step(state, z, gz, cfg.lr_at(step)))
    else:
        step = cfg.iters

    x, losses, _, cal, _ = evaluate(z)
    total, (a, b) = summarise(losses, cal)
    trace.append((step, total, float(a), float(b)))

    per = losses.reshape(R, P)
    if objective.coupled:
        pick = np.full(P, int(np.argmin(per.sum(axis=1))))
    else:
        pick = np.argmin(per, axis=0)
    rows = pick * P + np.arange(P)
    patches = x[rows]
    ps = PatchSet(tau=bundle.tau, grid_rows=bundle.grid_rows, grid_cols=bundle.grid_cols,
                  patches=patches, height=bundle.height, width=bundle.width)
    image = np.clip(inverse_patch_transform(ps, bundle.height, bundle.width), 0.0, 1.0)
    calibration = CalibrationParams(float(a), float(b)) if cfg.mode == "gpp-sc" else IDEAL
    return RecoveryResult(
        image=image,
        final_loss=total,
        calibration=calibration,
        trace=trace,
        latents=z[rows].copy(),
        patch_losses=losses[rows].copy(),
        patches=patches.copy(),
    )


def _with_mode(cfg, mode):
    if cfg is None:
        return RecoveryConfig(mode=mode)
    if cfg.mode != mode:
        raise ValueError(f"config is for mode {cfg.mode!r}, engine is {mode!r}")
    return cfg


def recover_gpp(bundle, net, cfg=None, z0=None) -> RecoveryResult:
    return recover(bundle, net, _with_mode(cfg, "gpp"), z0)


def recover_gpp_sc(bundle, net, cfg=None, z0=None) -> RecoveryResult:
    return recover(bundle, net, _with_mode(cfg, "gpp-sc"), z0)


def recover_phase(bundle, net, cfg=None, z0=None) -> RecoveryResult:
    return recover(bundle, net, _with_mode(cfg, "phase"), z0)


def recover_mask(bundle, net, cfg=None, z0=None) -> RecoveryResult:
    return recover(bundle, net, _with_mode(cfg, "mask"), z0)


# --- calibration sweep ------------------------------------------------------

SWEEP_POINTS = [(1.0, 0.0), (0.25, 0.0), (0.5, 0.0), (0.85, 0.0), (1.5, 0.0),
                (1.0, -0.25), (1.0, 0.25), (1.0, 0.5), (0.85, 0.5)]


@dataclass
class SweepRow:
    a: float
    b: float
    psnr_gpp: float
    psnr_gpp_sc: float
    a_hat: float
    b_hat: float


def sweep_calibration(image, net: GeneratorNet, points, *, tau: int | None = None,
                      rate: float = 0.5, seed: int = 0, cfg_gpp: RecoveryConfig | None = None,
                      cfg_sc: RecoveryConfig | None = None, pad_mode="replicate"):
    """Measure ``image`` under each (a, b), recover with gpp and gpp-sc, score both.

    Measurements are rounded to f32 first so in-memory sweeps match runs that
    go through GPPM files.
    """
    tau = tau or net.tau_out
    cfg_gpp = _with_mode(cfg_gpp, "gpp")
    cfg_sc = _with_mode(cfg_sc, "gpp-sc")
    rows = []
    for a, b in points:
        bundle = storage_rounded(measure_image(
            image, tau, Model.CALIBRATED, rate=rate, seed=seed,
            calibration=CalibrationParams(a, b), pad_mode=pad_mode))
        plain = recover(bundle, net, cfg_gpp)
        sc = recover(bundle, net, cfg_sc)
        rows.append(SweepRow(float(a), float(b), psnr(plain.image, image),
                             psnr(sc.image, image), sc.calibration.a, sc.calibration.b))
    return rows


def sweep_csv(rows) -> str:
    lines = ["a,b,psnr_gpp,psnr_gpp_sc,a_hat,b_hat"]
    for r in rows:
        lines.append(",".join(_num(v) for v in (r.a, r.b, r.psnr_gpp, r.psnr_gpp_sc,
                                                 r.a_hat, r.b_hat)))
    return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    return "inf" if v == np.inf else f"{v:.10g}"
