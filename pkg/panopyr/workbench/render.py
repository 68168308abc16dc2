import colorsys
import io
import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from panopyr.targetgen import LABEL_DIVISOR, VOID_LABEL, PanopticMap
from panopyr.workbench.tensorfile import ImageFormatError


LOGGER = logging.getLogger(__name__)

GOLDEN_RATIO_CONJUGATE = 0.618033988749895
# Instance shades: a 32x32 saturation/value grid walked with an odd stride, so every
# index up to 1023 lands on its own cell and neighbours land far apart.
SHADE_STEPS = 32
SHADE_STRIDE = 389
SATURATION_RANGE = (0.35, 1.0)
VALUE_RANGE = (0.45, 1.0)
# Middlebury color wheel segment lengths.
WHEEL_SEGMENTS = (("RY", 15), ("YG", 6), ("GC", 4), ("CB", 11), ("BM", 13), ("MR", 6))


def segment_color(segment_id: int):
    """RGB triple in [0, 1] of one encoded segment id; void is black.

    The hue is fixed by the class id. Thing instances of one class differ in saturation
    and brightness, and instance indices 1..999 map to distinct 8-bit triples.
    """
    if segment_id == VOID_LABEL:
        return 0.0, 0.0, 0.0
    class_id, instance = divmod(int(segment_id), LABEL_DIVISOR)
    hue = (class_id * GOLDEN_RATIO_CONJUGATE) % 1.0
    if instance == 0:
        return colorsys.hsv_to_rgb(hue, 0.45, 0.95)
    cell = ((instance - 1) * SHADE_STRIDE) % (SHADE_STEPS * SHADE_STEPS)
    s_step, v_step = divmod(cell, SHADE_STEPS)
    s_low, s_high = SATURATION_RANGE
    v_low, v_high = VALUE_RANGE
    saturation = s_low + (s_high - s_low) * s_step / (SHADE_STEPS - 1)
    value = v_low + (v_high - v_low) * v_step / (SHADE_STEPS - 1)
    return colorsys.hsv_to_rgb(hue, saturation, value)


def panoptic_rgb(pan: PanopticMap) -> np.ndarray:
    """`(H, W, 3)` uint8 rendering of a panoptic map."""
    ids, inverse = np.unique(pan.labels.data, return_inverse=True)
    palette = np.array([segment_color(i) for i in ids]).reshape(-1, 3)
    palette = np.round(palette * 255.0).astype(np.uint8)
    return palette[inverse.reshape(pan.shape)]


def color_wheel() -> np.ndarray:
    """`(55, 3)` optical-flow color wheel in [0, 1], red to yellow to ... to magenta."""
    ramps = []
    for (name, length), channel in zip(WHEEL_SEGMENTS, (1, 0, 2, 1, 0, 2)):
        ramp = np.zeros((length, 3))
        up = np.arange(length) / length
        full = {"RY": 0, "YG": 1, "GC": 1, "CB": 2, "BM": 2, "MR": 0}[name]
        ramp[:, full] = 1.0
        ramp[:, channel] = up if name in ("RY", "GC", "BM") else 1.0 - up
        ramps.append(ramp)
    return np.concatenate(ramps)


def offsets_rgb(offsets) -> np.ndarray:
    """`(H, W, 3)` uint8 rendering of a `(2, H, W)` offset field.

    Hue encodes the direction on the optical-flow color wheel; saturation is the
    magnitude over the image diagonal, so a zero offset is white.
    """
    off = np.asarray(offsets, dtype=np.float64)
    if off.ndim != 3 or off.shape[0] != 2:
        raise ValueError(f"Offsets must have shape (2, H, W), got {off.shape}")
    v, u = off[0], off[1]
    diagonal = np.hypot(off.shape[1], off.shape[2])
    length = np.clip(np.hypot(u, v) / diagonal, 0.0, 1.0)

    wheel = color_wheel()
    angle = np.arctan2(-v, -u) / np.pi
    position = (angle + 1.0) / 2.0 * (len(wheel) - 1)
    lower = np.floor(position).astype(np.int64)
    upper = (lower + 1) % len(wheel)
    alpha = (position - lower)[..., None]
    color = (1.0 - alpha) * wheel[lower] + alpha * wheel[upper]
    color = 1.0 - length[..., None] * (1.0 - color)
    return np.round(color * 255.0).astype(np.uint8)


def encode_ppm(rgb: np.ndarray) -> bytes:
    """Binary PPM (P6, maxval 255) bytes of an `(H, W, 3)` uint8 array."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"Expected an (H, W, 3) image, got {rgb.shape}")
    buffer = io.BytesIO()
    Image.fromarray(rgb).save(buffer, format="PPM")
    return buffer.getvalue()


def decode_ppm(data: bytes) -> np.ndarray:
    """Parse PPM bytes into an `(H, W, 3)` uint8 array.

    Raises:
        ImageFormatError: If the bytes are not an RGB PPM image.
    """
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as err:
        raise ImageFormatError(f"Not a readable PPM image: {err}") from err
    if image.format != "PPM" or image.mode != "RGB":
        raise ImageFormatError(f"Expected an RGB PPM image, got {image.format} {image.mode}")
    return np.asarray(image, dtype=np.uint8)


def render_panoptic(pan: PanopticMap) -> bytes:
    """PPM rendering of a panoptic map."""
    return encode_ppm(panoptic_rgb(pan))


def render_offsets(offsets) -> bytes:
    """PPM rendering of an offset field."""
    return encode_ppm(offsets_rgb(offsets))


def write_ppm(path: Union[str, Path], data: Union[bytes, np.ndarray]) -> None:
    """Write PPM bytes, or an `(H, W, 3)` array encoded as PPM, to `path`."""
    if isinstance(data, np.ndarray):
        data = encode_ppm(data)
    Path(path).write_bytes(data)
    LOGGER.info(f"Wrote {len(data)} bytes to {path}")


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    return decode_ppm(Path(path).read_bytes())
