"""Flow file formats and visualization.

Two interchange formats are supported bit-exactly:

* Middlebury ``.flo``: little-endian float32 magic 202021.25, int32 width,
  int32 height, then H*W interleaved (u, v) float32 pairs in row-major
  order.  The format carries no validity channel, so readers return an
  all-valid field and writers require finite values everywhere.
* 16-bit 3-channel PNG: channels 1-2 store round(flow * 64 + 2^15), channel
  3 the 0/1 validity; decoding inverts the affine map, so the round-trip
  error is at most half a quantum (1/128) per component.

Grayscale 8-bit and inverse-depth 16-bit PNG helpers used by the synthetic
dataset writer and the CLI live here too, plus the color-wheel renderer.
"""

from __future__ import annotations

import enum
import struct

import cv2
import numpy as np

from .errors import DimensionError, FlowFormatError, FlowRangeError, ParameterError
from .geometry import FlowField

FLO_MAGIC = 202021.25
_FLO_HEADER = struct.Struct("<fii")

# Fixed quantization of inverse-depth PNGs: stored = round(d0 * 256).
INVERSE_DEPTH_SCALE = 256.0


class FlowFileFormat(enum.Enum):
    """Supported interchange formats; readers and writers are mutually
    inverse up to each format's quantization."""

    MIDDLEBURY_FLO = "middlebury_flo"
    KITTI_PNG = "kitti_png"


def detect_format(path) -> FlowFileFormat:
    """Pick the format from the file extension (.flo vs .png)."""
    name = str(path).lower()
    if name.endswith(".flo"):
        return FlowFileFormat.MIDDLEBURY_FLO
    if name.endswith(".png"):
        return FlowFileFormat.KITTI_PNG
    raise FlowFormatError(f"{path}: unrecognized flow extension (expected .flo or .png)")


def read_flow(path, fmt: FlowFileFormat = None) -> FlowField:
    """Read a flow file, auto-detecting the format when not given."""
    fmt = fmt if fmt is not None else detect_format(path)
    if fmt is FlowFileFormat.MIDDLEBURY_FLO:
        return read_flo(path)
    return read_kitti_png(path)


def write_flow(path, flow: FlowField, fmt: FlowFileFormat = None):
    """Write a flow file, auto-detecting the format when not given."""
    fmt = fmt if fmt is not None else detect_format(path)
    if fmt is FlowFileFormat.MIDDLEBURY_FLO:
        write_flo(path, flow)
    else:
        write_kitti_png(path, flow)


def write_flo(path, flow: FlowField):
    """Write a Middlebury .flo file (float32, little-endian)."""
    if not (np.all(np.isfinite(flow.u)) and np.all(np.isfinite(flow.v))):
        raise ParameterError("flo files require finite flow everywhere")
    h, w = flow.height, flow.width
    data = np.empty((h, w, 2), dtype="<f4")
    data[..., 0] = flow.u
    data[..., 1] = flow.v
    with open(path, "wb") as f:
        f.write(_FLO_HEADER.pack(FLO_MAGIC, w, h))
        f.write(data.tobytes())


def read_flo(path) -> FlowField:
    """Read a Middlebury .flo file; the result is all-valid."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _FLO_HEADER.size:
        raise FlowFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, w, h = _FLO_HEADER.unpack_from(raw, 0)
    # 202021.25 is exactly representable in float32, so equality is safe.
    if magic != FLO_MAGIC:
        raise FlowFormatError(
            f"{path}: bad magic {magic!r} at offset 0 (expected {FLO_MAGIC})"
        )
    if w <= 0 or h <= 0 or w > 2**20 or h > 2**20:
        raise FlowFormatError(f"{path}: implausible dimensions {w}x{h}")
    expected = _FLO_HEADER.size + 8 * w * h
    if len(raw) != expected:
        raise FlowFormatError(
            f"{path}: expected {expected} bytes for {w}x{h}, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_FLO_HEADER.size).reshape(h, w, 2)
    return FlowField(
        data[..., 0].astype(np.float64),
        data[..., 1].astype(np.float64),
        np.ones((h, w), dtype=bool),
    )


def write_kitti_png(path, flow: FlowField, valid=None):
    """Write 16-bit 3-channel PNG flow; invalid pixels store zero flow."""
    if valid is None:
        valid = flow.valid
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != (flow.height, flow.width):
        raise DimensionError(f"mask shape {valid.shape} does not match flow")
    u = np.where(valid, flow.u, 0.0)
    v = np.where(valid, flow.v, 0.0)
    enc_u = np.rint(u * 64.0 + 32768.0)
    enc_v = np.rint(v * 64.0 + 32768.0)
    if min(enc_u.min(), enc_v.min()) < 0 or max(enc_u.max(), enc_v.max()) > 65535:
        max_mag = float(np.max(np.abs(np.stack([u, v]))))
        raise FlowRangeError(
            f"flow magnitude {max_mag} exceeds the 16-bit format range (|flow| < 512)"
        )
    rgb = np.stack([enc_u, enc_v, valid.astype(np.float64)], axis=-1).astype(np.uint16)
    if not cv2.imwrite(str(path), rgb[:, :, ::-1]):  # file stores RGB; cv2 wants BGR
        raise FlowFormatError(f"{path}: PNG write failed")


def read_kitti_png(path) -> FlowField:
    """Read 16-bit 3-channel PNG flow; the mask is channel 3 != 0."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FlowFormatError(f"{path}: not a readable image")
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint16:
        raise FlowFormatError(f"{path}: expected 16-bit 3-channel PNG")
    rgb = img[:, :, ::-1].astype(np.float64)
    valid = rgb[..., 2] > 0
    u = np.where(valid, (rgb[..., 0] - 32768.0) / 64.0, 0.0)
    v = np.where(valid, (rgb[..., 1] - 32768.0) / 64.0, 0.0)
    return FlowField(u, v, valid)


def write_gray_png(path, image):
    """Write a float image in [0, 1] as 8-bit grayscale PNG."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if not cv2.imwrite(str(path), np.rint(arr * 255.0).astype(np.uint8)):
        raise FlowFormatError(f"{path}: PNG write failed")


def read_gray_png(path):
    """Read an 8-bit grayscale PNG into a float image in [0, 1]."""
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise FlowFormatError(f"{path}: not a readable image")
    return img.astype(np.float64) / 255.0


def write_inverse_depth_png(path, d0):
    """Write inverse depth as 16-bit PNG quantized at 1/256 per unit."""
    arr = np.asarray(d0, dtype=np.float64)
    enc = np.rint(arr * INVERSE_DEPTH_SCALE)
    if enc.min() < 0 or enc.max() > 65535:
        raise FlowRangeError(
            f"inverse depth up to {float(arr.max())} exceeds the 16-bit range "
            f"at scale {INVERSE_DEPTH_SCALE}"
        )
    if not cv2.imwrite(str(path), enc.astype(np.uint16)):
        raise FlowFormatError(f"{path}: PNG write failed")


def read_inverse_depth_png(path):
    """Read a 16-bit inverse-depth PNG written at the fixed 1/256 scale."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FlowFormatError(f"{path}: not a readable image")
    if img.ndim != 2:
        raise FlowFormatError(f"{path}: expected single-channel depth PNG")
    return img.astype(np.float64) / INVERSE_DEPTH_SCALE


def _hsv_to_rgb(hue, sat, value):
    """Vectorized HSV -> RGB, hue in [0, 1)."""
    h6 = hue * 6.0
    sector = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    p = value * (1.0 - sat)
    q = value * (1.0 - sat * f)
    t = value * (1.0 - sat * (1.0 - f))
    v = np.broadcast_to(value, hue.shape)
    r = np.select([sector == k for k in range(6)], [v, q, p, p, t, v])
    g = np.select([sector == k for k in range(6)], [t, v, v, q, p, p])
    b = np.select([sector == k for k in range(6)], [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def flow_to_color(flow: FlowField, max_magnitude=None):
    """Color-wheel rendering: hue from the flow angle, saturation from the
    magnitude relative to ``max_magnitude`` (auto when omitted), full
    brightness; invalid pixels are black.  Returns uint8 RGB."""
    if not (np.all(np.isfinite(flow.u)) and np.all(np.isfinite(flow.v))):
        raise ParameterError("flow must be finite for visualization")
    mag = np.hypot(flow.u, flow.v)
    if max_magnitude is None:
        max_magnitude = float(mag[flow.valid].max()) if flow.valid.any() else 0.0
    if max_magnitude > 0:
        sat = np.clip(mag / max_magnitude, 0.0, 1.0)
    else:
        sat = np.zeros_like(mag)
    hue = np.mod(np.arctan2(flow.v, flow.u), 2.0 * np.pi) / (2.0 * np.pi)
    rgb = _hsv_to_rgb(hue, sat, 1.0)
    rgb[~flow.valid] = 0.0
    return np.rint(rgb * 255.0).astype(np.uint8)


def write_color_png(path, rgb):
    """Write an 8-bit RGB array as PNG."""
    if not cv2.imwrite(str(path), np.asarray(rgb, dtype=np.uint8)[:, :, ::-1]):
        raise FlowFormatError(f"{path}: PNG write failed")
