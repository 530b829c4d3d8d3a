"""Grayscale images, the non-overlapping patch transform, and fidelity metrics.

Images are plain 2-D float64 arrays with intensities nominally in [0, 1].
Patches are scanned row-major over the grid (top-left patch first) and each
patch is itself vectorised row-major.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionMismatch

PadMode = Literal["none", "replicate"]


def as_image(data) -> np.ndarray:
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionMismatch(f"image must be 2-D, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite intensities")
    return img


@dataclass
class PatchSet:
    """Vectorised τ×τ patches of an image plus the grid they came from.

    ``patches`` has shape (grid_rows * grid_cols, tau * tau).
    ``height``/``width`` record the source size before any padding.
    """

    tau: int
    grid_rows: int
    grid_cols: int
    patches: np.ndarray
    pad_mode: PadMode = "none"
    height: int = 0
    width: int = 0

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.float64)
        if self.patches.shape != (self.num_patches, self.tau * self.tau):
            raise DimensionMismatch(
                f"expected patches of shape {(self.num_patches, self.tau ** 2)}, "
                f"got {self.patches.shape}"
            )
        if not self.height:
            self.height = self.grid_rows * self.tau
        if not self.width:
            self.width = self.grid_cols * self.tau

    @property
    def num_patches(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def n(self) -> int:
        return self.tau * self.tau


def grid_shape(height: int, width: int, tau: int, pad_mode: PadMode = "none"):
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if pad_mode == "none":
        if height % tau or width % tau:
            raise DimensionMismatch(
                f"tau={tau} does not divide image size {height}x{width}"
            )
    elif pad_mode != "replicate":
        raise ValueError(f"unknown pad_mode {pad_mode!r}")
    return -(-height // tau), -(-width // tau)


def patch_transform(img, tau: int, pad_mode: PadMode = "none") -> PatchSet:
    img = as_image(img)
    h, w = img.shape
    rows, cols = grid_shape(h, w, tau, pad_mode)
    ph, pw = rows * tau, cols * tau
    if (ph, pw) != (h, w):
        img = np.pad(img, ((0, ph - h), (0, pw - w)), mode="edge")
    blocks = img.reshape(rows, tau, cols, tau).transpose(0, 2, 1, 3)
    return PatchSet(
        tau=tau,
        grid_rows=rows,
        grid_cols=cols,
        patches=blocks.reshape(rows * cols, tau * tau).copy(),
        pad_mode=pad_mode,
        height=h,
        width=w,
    )


def inverse_patch_transform(ps: PatchSet, out_height: int | None = None,
                            out_width: int | None = None) -> np.ndarray:
    """Tile the patches back onto the grid and crop away any padding."""
    tau, rows, cols = ps.tau, ps.grid_rows, ps.grid_cols
    out_height = ps.height if out_height is None else out_height
    out_width = ps.width if out_width is None else out_width
    for size, cells in ((out_height, rows), (out_width, cols)):
        if not cells * tau - tau + 1 <= size <= cells * tau:
            raise DimensionMismatch(
                f"output size {out_height}x{out_width} inconsistent with "
                f"{rows}x{cols} grid of {tau}x{tau} patches"
            )
    full = (
        np.asarray(ps.patches)
        .reshape(rows, cols, tau, tau)
        .transpose(0, 2, 1, 3)
        .reshape(rows * tau, cols * tau)
    )
    return full[:out_height, :out_width].copy()


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` when the images match."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))


def psnr_sign_ambiguous(x, ref, peak: float = 1.0) -> float:
    """Best of PSNR(x, ref) and PSNR(peak - x, ref).

    Magnitude-only measurements cannot tell x from its reflection, so phase
    retrieval results are scored against whichever is closer.
    """
    x = np.asarray(x, dtype=np.float64)
    return max(psnr(x, ref, peak), psnr(peak - x, ref, peak))


def _interp_matrix(n_from: int, n_to: int) -> np.ndarray:
    """1-D corner-aligned linear interpolation as an (n_to, n_from) matrix."""
    mat = np.zeros((n_to, n_from))
    if n_from == 1 or n_to == 1:
        # one sample: broadcast it, or read the first corner
        mat[:, 0] = 1.0
        return mat
    pos = np.arange(n_to) * (n_from - 1) / (n_to - 1)
    lo = np.minimum(np.floor(pos).astype(int), n_from - 2)
    frac = pos - lo
    mat[np.arange(n_to), lo] = 1.0 - frac
    mat[np.arange(n_to), lo + 1] += frac
    return mat


def resize_matrix(from_tau: int, to_tau: int) -> np.ndarray:
    """Linear map taking a vectorised from_tau patch to a to_tau patch.

    Bilinear with corner-aligned sampling, so corner pixels are preserved.
    Shape is (to_tau**2, from_tau**2).
    """
    if from_tau < 1 or to_tau < 1:
        raise ValueError("patch sides must be >= 1")
    r = _interp_matrix(from_tau, to_tau)
    return np.kron(r, r)


def resize_patch(p, from_tau: int, to_tau: int) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if from_tau == to_tau:
        return p.copy()
    r = _interp_matrix(from_tau, to_tau)
    return (r @ p.reshape(from_tau, from_tau) @ r.T).reshape(-1)
