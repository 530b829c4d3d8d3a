"""Seeded Gaussian measurement operators and the block forward models.

Every patch of an image is measured with the same operator (block
compressive imaging). Supported models::

    linear       y = Phi x
    calibrated   y = (a Phi + b 1) x      with 1 the m x n all-ones matrix
    phase        y = |Phi x|
    mask         y = x[mask]              (inpainting)

The all-ones matrix is never formed: ``1 @ x`` is ``sum(x)`` on every row.
"""

import enum
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, FormatError, IndexOutOfRange
from .imagecore import patch_transform
from .rng import SplitMix64


class Model(enum.IntEnum):
    LINEAR = 0
    CALIBRATED = 1
    PHASE = 2
    MASK = 3

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        aliases = {"linear": cls.LINEAR, "calibrated": cls.CALIBRATED,
                   "phase": cls.PHASE, "phasemagnitude": cls.PHASE,
                   "mask": cls.MASK, "pixelmask": cls.MASK}
        try:
            return aliases[str(name).lower()]
        except KeyError:
            raise ValueError(f"unknown forward model {name!r}") from None


@dataclass(frozen=True)
class CalibrationParams:
    """Sensor gain ``a`` and shift ``b``.

    ``degenerate`` is set by the closed-form solver when the calibration was
    unidentifiable and the ideal pair (1, 0) was substituted.
    """

    a: float = 1.0
    b: float = 0.0
    degenerate: bool = field(default=False, compare=False)


IDEAL = CalibrationParams(1.0, 0.0)


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    m: int
    n: int
    seed: int
    entries: np.ndarray

    def __post_init__(self):
        if self.entries.shape != (self.m, self.n):
            raise DimensionMismatch(
                f"operator entries {self.entries.shape} != {(self.m, self.n)}")
        self.entries.setflags(write=False)

    @property
    def phi(self) -> np.ndarray:
        return self.entries


def measurement_count(rate: float, n: int) -> int:
    """floor(rate * n); 10% of 1024 is 102 and 1% of 1024 is 10."""
    if not 0 < rate <= 1:
        raise ValueError(f"measurement rate must be in (0, 1], got {rate}")
    # guard against 0.29 * 100 = 28.999999999999996
    return int(math.floor(rate * n + 1e-9))


def make_operator(m: int, n: int, seed: int) -> MeasurementOperator:
    """Phi with i.i.d. N(0, 1) entries drawn row-major from ``seed``."""
    if m < 1 or n < 1:
        raise ValueError("operator dimensions must be positive")
    entries = SplitMix64(seed).normal(m * n).reshape(m, n)
    return MeasurementOperator(m, n, int(seed), entries)


def explicit_operator(entries, seed: int = 0) -> MeasurementOperator:
    """Wrap a caller-supplied matrix (e.g. an identity for testing)."""
    entries = np.array(entries, dtype=np.float64)
    if entries.ndim != 2:
        raise DimensionMismatch("operator must be a matrix")
    return MeasurementOperator(entries.shape[0], entries.shape[1], seed, entries)


def make_mask(n: int, keep_fraction: float, seed: int) -> np.ndarray:
    """Sorted indices of floor(keep_fraction * n) pixels drawn without replacement."""
    if not 0 <= keep_fraction <= 1:
        raise ValueError("keep_fraction must be in [0, 1]")
    k = int(math.floor(keep_fraction * n + 1e-9))
    return mask_from_seed(n, k, seed)


def mask_from_seed(n: int, k: int, seed: int) -> np.ndarray:
    return np.sort(SplitMix64(seed).partial_shuffle(n, k))


def _check_signal(op, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != op.n:
        raise DimensionMismatch(f"signal length {x.shape[-1]} != operator n={op.n}")
    return x


def forward_linear(op: MeasurementOperator, x) -> np.ndarray:
    """Phi x. Accepts a single patch or a stack of patches along axis 0."""
    x = _check_signal(op, x)
    return x @ op.entries.T


def forward_calibrated(op: MeasurementOperator, cal: CalibrationParams, x) -> np.ndarray:
    x = _check_signal(op, x)
    y = x @ op.entries.T
    # skip no-op terms so (1, 0) reproduces forward_linear bit for bit, signed zeros included
    if cal.a != 1.0:
        y = cal.a * y
    if cal.b != 0.0:
        y = y + cal.b * x.sum(axis=-1, keepdims=True)
    return y


def forward_phase(op: MeasurementOperator, x) -> np.ndarray:
    return np.abs(forward_linear(op, x))


def forward_mask(mask_indices, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    idx = np.asarray(mask_indices, dtype=np.int64)
    n = x.shape[-1]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexOutOfRange(f"mask index outside [0, {n})")
    if np.unique(idx).size != idx.size:
        raise ValueError("mask indices must be unique")
    return x[..., np.sort(idx)]


@dataclass(eq=False)
class MeasurementBundle:
    """Per-patch observations of one image together with how they were taken.

    ``operator`` is None for the mask model, ``mask`` is None otherwise.
    ``explicit`` marks operators that cannot be regenerated from ``seed``.
    """

    model: Model
    per_patch_y: np.ndarray
    tau: int
    grid_rows: int
    grid_cols: int
    seed: int
    n: int
    operator: MeasurementOperator | None = None
    mask: np.ndarray | None = None
    true_calibration: CalibrationParams | None = None
    explicit: bool = False
    height: int = 0
    width: int = 0

    def __post_init__(self):
        self.model = Model.parse(self.model)
        self.per_patch_y = np.asarray(self.per_patch_y, dtype=np.float64)
        if self.per_patch_y.shape != (self.num_patches, self.m):
            raise DimensionMismatch(
                f"measurements {self.per_patch_y.shape} != {(self.num_patches, self.m)}")
        if self.n != self.tau * self.tau:
            raise DimensionMismatch("n must equal tau**2")
        if self.model is Model.PHASE and np.any(self.per_patch_y < 0):
            raise ValueError("magnitude measurements must be non-negative")
        self.height = self.height or self.grid_rows * self.tau
        self.width = self.width or self.grid_cols * self.tau

    @property
    def m(self) -> int:
        if self.model is Model.MASK:
            return len(self.mask)
        return self.operator.m

    @property
    def num_patches(self) -> int:
        return self.grid_rows * self.grid_cols


def measure_image(img, tau: int, model="linear", *, rate: float | None = None,
                  m: int | None = None, seed: int = 0,
                  calibration: CalibrationParams | None = None,
                  keep_fraction: float | None = None,
                  pad_mode="none",
                  operator: MeasurementOperator | None = None) -> MeasurementBundle:
    """Patch the image and measure every patch with one shared operator.

    For the linear/calibrated/phase models give either ``rate``, ``m`` or a
    prebuilt ``operator``. The mask model takes ``keep_fraction``.
    """
    model = Model.parse(model)
    ps = patch_transform(img, tau, pad_mode)
    n = ps.n
    op = mask = None
    truth = None
    if model is Model.MASK:
        if keep_fraction is None:
            raise ValueError("mask model requires keep_fraction")
        mask = make_mask(n, keep_fraction, seed)
        y = forward_mask(mask, ps.patches)
    else:
        if operator is not None:
            op = operator
        else:
            if m is None:
                if rate is None:
                    raise ValueError("give rate, m or operator")
                m = measurement_count(rate, n)
            op = make_operator(m, n, seed)
        if model is Model.LINEAR:
            y = forward_linear(op, ps.patches)
        elif model is Model.CALIBRATED:
            truth = calibration or IDEAL
            y = forward_calibrated(op, truth, ps.patches)
        else:
            y = forward_phase(op, ps.patches)
    return MeasurementBundle(
        model=model, per_patch_y=y, tau=tau, grid_rows=ps.grid_rows,
        grid_cols=ps.grid_cols, seed=int(seed) if op is None else op.seed, n=n,
        operator=op, mask=mask, true_calibration=truth,
        explicit=operator is not None, height=ps.height, width=ps.width,
    )


def storage_rounded(bundle: MeasurementBundle) -> MeasurementBundle:
    """Copy with measurements rounded to f32, i.e. what a GPPM round trip returns."""
    return replace(bundle, per_patch_y=bundle.per_patch_y.astype(np.float32).astype(np.float64))


# --- GPPM file -------------------------------------------------------------

GPPM_MAGIC = b"GPPM"
GPPM_VERSION = 1
_HEADER = struct.Struct("<4sIBIIIIIQB")


def write_bundle(path, bundle: MeasurementBundle) -> None:
    """Serialise a bundle; measurements and explicit operators go out as f32 LE."""
    explicit = bundle.explicit and bundle.operator is not None
    parts = [_HEADER.pack(GPPM_MAGIC, GPPM_VERSION, int(bundle.model), bundle.m,
                          bundle.n, bundle.tau, bundle.grid_rows, bundle.grid_cols,
                          bundle.seed & 0xFFFFFFFFFFFFFFFF, int(explicit))]
    if explicit:
        parts.append(bundle.operator.entries.astype("<f4").tobytes())
    cal = bundle.true_calibration
    if cal is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01" + struct.pack("<dd", cal.a, cal.b))
    parts.append(bundle.per_patch_y.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_bundle(path) -> MeasurementBundle:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:4] != GPPM_MAGIC:
        raise FormatError(f"{path}: missing GPPM header")
    (_, version, tag, m, n, tau, rows, cols, seed,
     explicit) = _HEADER.unpack_from(raw, 0)
    if version != GPPM_VERSION:
        raise FormatError(f"{path}: unsupported GPPM version {version}")
    try:
        model = Model(tag)
    except ValueError:
        raise FormatError(f"{path}: unknown model tag {tag}") from None
    off = _HEADER.size
    op = mask = None
    if explicit:
        entries = np.frombuffer(raw, "<f4", m * n, off).reshape(m, n)
        op = MeasurementOperator(m, n, seed, entries.astype(np.float64))
        off += 4 * m * n
    elif model is Model.MASK:
        mask = mask_from_seed(n, m, seed)
    else:
        op = make_operator(m, n, seed)
    has_cal = raw[off]
    off += 1
    cal = None
    if has_cal:
        cal = CalibrationParams(*struct.unpack_from("<dd", raw, off))
        off += 16
    count = rows * cols * m
    if len(raw) < off + 4 * count:
        raise FormatError(f"{path}: truncated measurement payload")
    y = np.frombuffer(raw, "<f4", count, off).reshape(rows * cols, m)
    return MeasurementBundle(model=model, per_patch_y=y.astype(np.float64), tau=tau,
                             grid_rows=rows, grid_cols=cols, seed=seed, n=n,
                             operator=op, mask=mask, true_calibration=cal,
                             explicit=bool(explicit))
