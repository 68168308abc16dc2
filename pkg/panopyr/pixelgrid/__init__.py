"""Dense-array substrate shared by every other subpackage.

Values are thin immutable wrappers around numpy arrays. They validate their shape and
dtype once at construction and expose the array through `data` and `__array__`, so
`np.asarray(tensor)` works wherever a plain array is expected.
"""
import numpy as np


FLOAT_DTYPE = np.float32
LABEL_DTYPE = np.uint32
ACCUMULATOR_DTYPE = np.float64


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    if array.flags.writeable:
        array = array.copy()
        array.flags.writeable = False
    return array


class Tensor3:
    """Rank-3 float tensor stored channel-major, then row, then column.

    Args:
        data: Array of shape `(channels, height, width)`; converted to 32-bit floats.

    Attributes:
        data (numpy.ndarray): Read-only `float32` array of shape `(C, H, W)`.

    Raises:
        ValueError: If the array is not rank 3 or holds NaN/Inf.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        array = np.asarray(data, dtype=FLOAT_DTYPE)
        if array.ndim != 3:
            raise ValueError(f"Tensor3 needs a rank-3 array, got shape {array.shape}")
        if not np.isfinite(array).all():
            raise ValueError("Tensor3 values must be finite (NaN/Inf rejected)")
        self.data = _readonly(array)

    @classmethod
    def zeros(cls, channels: int, height: int, width: int) -> "Tensor3":
        return cls(np.zeros((channels, height, width), dtype=FLOAT_DTYPE))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"Tensor3(channels={self.channels}, height={self.height}, width={self.width})"


class LabelGrid:
    """Rank-2 grid of 32-bit unsigned labels.

    Args:
        data: Array of shape `(height, width)` with non-negative integer values.

    Raises:
        ValueError: If the array is not rank 2 or holds negative/non-integer values.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        array = np.asarray(data)
        if array.ndim != 2:
            raise ValueError(f"LabelGrid needs a rank-2 array, got shape {array.shape}")
        if array.dtype.kind == "f":
            if not np.array_equal(array, np.round(array)):
                raise ValueError("LabelGrid values must be integers")
        if array.dtype.kind in "fi" and array.size and array.min() < 0:
            raise ValueError("LabelGrid values must be non-negative")
        self.data = _readonly(array.astype(LABEL_DTYPE))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"LabelGrid(height={self.height}, width={self.width})"


class BinaryMask:
    """Rank-2 boolean grid (instance membership, thing masks)."""

    __slots__ = ("data",)

    def __init__(self, data):
        array = np.asarray(data)
        if array.ndim != 2:
            raise ValueError(f"BinaryMask needs a rank-2 array, got shape {array.shape}")
        self.data = _readonly(array.astype(bool))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"BinaryMask(height={self.height}, width={self.width}, count={int(self.data.sum())})"


from panopyr.pixelgrid.kernels import (
    argmax_channel,
    bilinear_resize,
    conv2d,
    distance_transform,
    gaussian_splat,
    max_pool2d,
)
