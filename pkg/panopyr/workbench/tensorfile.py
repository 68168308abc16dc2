"""Named-tensor container.

Layout, all integers little-endian::

    b"PSWT" | version u8 = 1 | record*

    record = name_len u16 | name (utf-8) | dtype u8 | ndim u8 | dims u32 * ndim | payload

dtype codes: 0 = float32, 1 = uint32, 2 = uint8. The payload holds `prod(dims)` values in
row-major order. Records run to the end of the file and names are unique.
"""
import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Mapping, Tuple, Union

import numpy as np

from panopyr.typing import NamedTensors


LOGGER = logging.getLogger(__name__)

MAGIC = b"PSWT"
VERSION = 1
DTYPE_CODES = OrderedDict(
    [(0, np.dtype("<f4")), (1, np.dtype("<u4")), (2, np.dtype("u1"))]
)
MAX_NAME_BYTES = 2 ** 16 - 1


class TensorFileError(ValueError):
    """Malformed tensor container or image file."""


class BadMagicError(TensorFileError):
    pass


class UnsupportedVersionError(TensorFileError):
    pass


class UnknownDtypeError(TensorFileError):
    pass


class TruncatedPayloadError(TensorFileError):
    pass


class DuplicateNameError(TensorFileError):
    pass


class MissingTensorError(TensorFileError):
    pass


class ImageFormatError(TensorFileError):
    pass


def _dtype_code(array: np.ndarray, name: str) -> int:
    for code, dtype in DTYPE_CODES.items():
        if array.dtype.kind == dtype.kind and array.dtype.itemsize == dtype.itemsize:
            return code
    raise UnknownDtypeError(
        f"Tensor {name!r} has dtype {array.dtype}; only float32, uint32 and uint8 are stored"
    )


def encode_tensors(
    tensors: Union[Mapping[str, np.ndarray], Iterable[Tuple[str, np.ndarray]]]
) -> bytes:
    """Serialize named tensors.

    Args:
        tensors: Mapping or `(name, array)` pairs, written in the given order.

    Returns:
        bytes: Container bytes.

    Raises:
        DuplicateNameError: If a name repeats.
        UnknownDtypeError: On an unsupported dtype.
        TensorFileError: On an empty or over-long name or too many dimensions.
    """
    items = tensors.items() if isinstance(tensors, Mapping) else tensors
    chunks = [MAGIC, struct.pack("<B", VERSION)]
    seen = set()
    for name, value in items:
        if name in seen:
            raise DuplicateNameError(f"Tensor name {name!r} appears twice")
        seen.add(name)
        encoded = name.encode("utf-8")
        if not 0 < len(encoded) <= MAX_NAME_BYTES:
            raise TensorFileError(f"Tensor name must hold 1..{MAX_NAME_BYTES} bytes, got {name!r}")
        array = np.asarray(value)
        code = _dtype_code(array, name)
        if array.ndim > 255:
            raise TensorFileError(f"Tensor {name!r} has {array.ndim} dimensions (max 255)")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BB", code, array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype=DTYPE_CODES[code]).tobytes())
    return b"".join(chunks)


def decode_tensors(data: bytes) -> NamedTensors:
    """Parse container bytes into an ordered `{name: array}`.

    Raises:
        BadMagicError: If the file does not start with `PSWT`.
        UnsupportedVersionError: On a version other than 1.
        UnknownDtypeError: On a dtype code outside 0..2.
        TruncatedPayloadError: If a record ends early.
        DuplicateNameError: If a name repeats.
    """
    if data[:4] != MAGIC:
        raise BadMagicError(f"Expected magic {MAGIC!r}, got {bytes(data[:4])!r}")
    if len(data) < 5:
        raise TruncatedPayloadError("File ends before the version byte")
    if data[4] != VERSION:
        raise UnsupportedVersionError(f"Unsupported container version {data[4]}")

    tensors = OrderedDict()
    pos = 5

    def take(size: int, what: str) -> bytes:
        nonlocal pos
        if pos + size > len(data):
            raise TruncatedPayloadError(
                f"File ends inside {what} at byte {pos} (needs {size}, has {len(data) - pos})"
            )
        chunk = data[pos : pos + size]
        pos += size
        return chunk

    while pos < len(data):
        (name_len,) = struct.unpack("<H", take(2, "a record header"))
        try:
            name = take(name_len, "a tensor name").decode("utf-8")
        except UnicodeDecodeError as err:
            raise TensorFileError(f"Tensor name at byte {pos - name_len} is not utf-8") from err
        code, ndim = struct.unpack("<BB", take(2, f"the header of {name!r}"))
        if code not in DTYPE_CODES:
            raise UnknownDtypeError(f"Tensor {name!r} has unknown dtype code {code}")
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, f"the dims of {name!r}"))
        dtype = DTYPE_CODES[code]
        count = int(np.prod(shape, dtype=np.int64))
        payload = take(count * dtype.itemsize, f"the payload of {name!r}")
        if name in tensors:
            raise DuplicateNameError(f"Tensor name {name!r} appears twice")
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(shape)
    return tensors


def write_tensors(path: Union[str, Path], tensors) -> None:
    """Write named tensors to `path`; see `encode_tensors`."""
    data = encode_tensors(tensors)
    Path(path).write_bytes(data)
    LOGGER.info(f"Wrote {len(data)} bytes to {path}")


def read_tensors(path: Union[str, Path]) -> NamedTensors:
    """Read named tensors from `path`; see `decode_tensors`."""
    return decode_tensors(Path(path).read_bytes())


def require(tensors: Mapping[str, np.ndarray], *names: str) -> None:
    """Raise `MissingTensorError` unless every name is present."""
    missing = [n for n in names if n not in tensors]
    if missing:
        raise MissingTensorError(f"Missing tensors {missing}; file holds {list(tensors)}")
