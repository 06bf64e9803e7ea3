"""Dense tensor helpers shared by every other module.

Tensors are plain C-contiguous numpy arrays (row-major, last axis fastest;
feature tensors keep time on the last axis).  Two precisions are supported:
float32 for training speed and float64 for the verification suites, selected
per call or per run -- never mixed silently.

The module also owns the binary tensor container used by feature files,
normalization stats, and checkpoints:

    magic "TNSR" | format version u32 | dtype tag u32 (4=f32, 8=f64)
    | rank u32 | extents u64 each | raw scalars, little-endian, row-major
"""

import struct

import numpy as np

FORMAT_VERSION = 1
_MAGIC = b"TNSR"

DTYPES = {"f32": np.float32, "f64": np.float64}
_DTYPE_TAGS = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


def matmul(a, b):
    """Matrix product of two rank-2 arrays, [p x q] @ [q x r] -> [p x r].

    Summation over q is delegated to the platform GEMM, which is
    deterministic for a fixed environment; two identical runs produce
    bit-identical results.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got ranks {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    return a @ b


def map_elementwise(x, f):
    """Apply a scalar function to every element, preserving shape and dtype."""
    x = np.asarray(x)
    out = np.empty_like(x)
    out.flat[:] = [f(v) for v in x.flat]
    return out


def logsumexp(xs):
    """log(sum(exp(xs))) of a vector of log-domain scalars, max-shifted.

    Entries may be -inf (zero probability).  All -inf yields exactly -inf,
    never NaN.  An empty vector is rejected: the empty sum has no log.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError(f"logsumexp needs a non-empty vector, got shape {xs.shape}")
    m = np.max(xs)
    if m == -np.inf:
        return -np.inf
    return float(m + np.log(np.sum(np.exp(xs - m))))


def logsumexp_rows(x):
    """Row-wise logsumexp of a [rows x n] array; all--inf rows give -inf."""
    x = np.asarray(x, dtype=np.float64)
    m = np.max(x, axis=-1)
    finite = m != -np.inf
    out = np.full(m.shape, -np.inf)
    if np.any(finite):
        shifted = x[finite] - m[finite, None]
        out[finite] = m[finite] + np.log(np.sum(np.exp(shifted), axis=-1))
    return out


def write_tensor(fh, arr):
    """Append one tensor record to an open binary stream."""
    arr = np.asarray(arr)
    if arr.dtype == np.float32:
        tag = 4
    elif arr.dtype == np.float64:
        tag = 8
    else:
        raise ValueError(f"tensor container stores f32/f64 only, got {arr.dtype}")
    fh.write(_MAGIC)
    fh.write(struct.pack("<III", FORMAT_VERSION, tag, arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    fh.write(np.ascontiguousarray(arr).astype(f"<f{tag}", copy=False).tobytes())


def read_tensor(fh):
    """Read the next tensor record from an open binary stream."""
    magic = fh.read(4)
    if magic != _MAGIC:
        raise ValueError(f"bad tensor magic {magic!r}, expected {_MAGIC!r}")
    version, tag, rank = struct.unpack("<III", fh.read(12))
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported tensor format version {version}")
    if tag not in _DTYPE_TAGS:
        raise ValueError(f"unknown dtype tag {tag}")
    shape = struct.unpack(f"<{rank}Q", fh.read(8 * rank))
    count = int(np.prod(shape)) if rank else 1
    dtype = _DTYPE_TAGS[tag]
    raw = fh.read(count * dtype.itemsize)
    if len(raw) != count * dtype.itemsize:
        raise ValueError("truncated tensor record")
    return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()


def save_tensor(path, arr):
    with open(path, "wb") as fh:
        write_tensor(fh, arr)


def load_tensor(path):
    with open(path, "rb") as fh:
        return read_tensor(fh)
