"""Binary PGM (P5) and raw float ("GPPI") image files."""

import re
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .imagecore import as_image

GPPI_MAGIC = b"GPPI"
GPPI_VERSION = 1

_PGM_HEADER = re.compile(rb"P5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)"
                         rb"(?:\s|#[^\n]*\n)+(\d+)\s")


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    match = _PGM_HEADER.match(raw)
    if match is None:
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(g) for g in match.groups())
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    body = raw[match.end():match.end() + width * height]
    if len(body) != width * height:
        raise FormatError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    return pixels.astype(np.float64) / 255.0


def write_pgm(path, img) -> None:
    img = as_image(img)
    h, w = img.shape
    pixels = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def read_gppi(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != GPPI_MAGIC or len(raw) < 16:
        raise FormatError(f"{path}: missing GPPI header")
    version, height, width = struct.unpack_from("<III", raw, 4)
    if version != GPPI_VERSION:
        raise FormatError(f"{path}: unsupported GPPI version {version}")
    data = np.frombuffer(raw, dtype="<f4", count=height * width, offset=16)
    return data.reshape(height, width).astype(np.float64)


def write_gppi(path, img) -> None:
    img = as_image(img)
    h, w = img.shape
    header = GPPI_MAGIC + struct.pack("<III", GPPI_VERSION, h, w)
    Path(path).write_bytes(header + img.astype("<f4").tobytes())


def read_image(path) -> np.ndarray:
    """Dispatch on the file's magic bytes."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == GPPI_MAGIC:
        return read_gppi(path)
    if magic[:2] == b"P5":
        return read_pgm(path)
    raise FormatError(f"{path}: unrecognised image format")


def write_image(path, img) -> None:
    if str(path).lower().endswith(".pgm"):
        write_pgm(path, img)
    else:
        write_gppi(path, img)
