"""Named-array container used for checkpoints and fitted covariance models.

Byte layout (all integers little-endian, arrays row-major float64 LE):

    offset  size  field
    0       8     magic  b"NARR0001"
    8       4     u32    entry count
    ...per entry:
            2     u16    name length L
            L     bytes  name, UTF-8
            1     u8     ndim
            4*nd  u32    dims
            8*n   f64    values (n = product of dims)

Complex arrays are stored by their callers as two entries with ".re"/".im"
name suffixes.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"NARR0001"


class ContainerFormatError(ValueError):
    """File is not a valid named-array container."""


def save_arrays(path, arrays):
    """Write a dict of name -> ndarray (cast to float64) to `path`."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8").tobytes())


def load_arrays(path):
    """Read a named-array container back into a dict of float64 arrays."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ContainerFormatError(f"{path}: bad magic {data[:8]!r}, expected {MAGIC!r}")
    pos = 8

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise ContainerFormatError(f"{path}: truncated while reading {what}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4, "entry count"))
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2, "name length"))
        name = take(nlen, "name").decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1, "ndim"))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, "dims"))
        n = int(np.prod(dims)) if ndim else 1
        values = np.frombuffer(take(8 * n, f"values of {name!r}"), dtype="<f8")
        out[name] = values.reshape(dims).copy()
    if pos != len(data):
        raise ContainerFormatError(f"{path}: {len(data) - pos} trailing bytes after last entry")
    return out


def save_complex(path, arrays):
    """Convenience wrapper storing complex arrays as .re/.im pairs."""
    flat = {}
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            flat[name + ".re"] = arr.real
            flat[name + ".im"] = arr.imag
        else:
            flat[name] = arr
    save_arrays(path, flat)


def load_complex(path):
    """Inverse of save_complex: re-pair .re/.im entries into complex arrays."""
    flat = load_arrays(path)
    out = {}
    for name, arr in flat.items():
        if name.endswith(".re"):
            stem = name[:-3]
            out[stem] = arr + 1j * flat[stem + ".im"]
        elif not name.endswith(".im"):
            out[name] = arr
    return out
