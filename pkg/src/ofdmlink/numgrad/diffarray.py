"""Reverse-mode autodiff over dense float64 arrays.

The graph is built per forward pass (define-by-run). Complex quantities are
represented as a trailing dimension of size 2 (real, imaginary); the complex
ops below operate on that layout.

Broadcasting for binary elementwise ops is deliberately restricted: either
both shapes match exactly, or one operand's shape is a suffix of the other's
(broadcast over the leading batch/spatial axes). Anything else is rejected.
"""

from __future__ import annotations

import itertools

import numpy as np


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class DomainError(ValueError):
    """Input outside an operation's domain (e.g. log of a non-positive value)."""


_node_ids = itertools.count()


class DiffArray:
    """Node in the computation graph: a dense float64 array plus gradient slot."""

    __slots__ = ("values", "grad", "requires_grad", "node_id", "_parents", "_backward")

    def __init__(self, values, requires_grad=False, _parents=(), _backward=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None  # lazily allocated, same shape as values
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_node_ids)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size

    def item(self):
        return float(self.values)

    def __repr__(self):
        return f"DiffArray(shape={self.shape}, requires_grad={self.requires_grad})"

    def accumulate_grad(self, g, own=False):
        """Add a gradient contribution.

        own=True promises g is a freshly allocated array the caller will not
        touch again, letting the first contribution take the buffer without a
        copy. Backward functions donate at most one reference per buffer.
        """
        if self.grad is None:
            self.grad = g if own and g.dtype == np.float64 else np.array(g, dtype=np.float64)
        else:
            self.grad += g


def leaf(values, requires_grad=True):
    """Create a graph leaf (a parameter if requires_grad, else a constant)."""
    return DiffArray(values, requires_grad=requires_grad)


def constant(values):
    return DiffArray(values, requires_grad=False)


def as_diff(x):
    return x if isinstance(x, DiffArray) else constant(x)


def _result(values, parents, backward):
    """Wrap an op result; constants short-circuit so inference builds no graph."""
    if any(p.requires_grad for p in parents):
        return DiffArray(values, requires_grad=True, _parents=tuple(parents), _backward=backward)
    return DiffArray(values)


def backward(loss: DiffArray):
    """Backpropagate from a scalar loss to every requires-grad leaf.

    Gradients accumulate additively across fan-out. The traversal is an
    iterative reverse topological sort, so deep graphs do not hit the
    recursion limit.
    """
    if loss.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    order = _toposort(loss)
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def _toposort(root):
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for p in node._parents:
            if p.node_id not in visited and p.requires_grad:
                stack.append((p, False))
    return order


def zero_grads(params):
    for p in params.values() if isinstance(params, dict) else params:
        p.grad = None


# ---------------------------------------------------------------------------
# broadcasting helpers

def _check_binary_shapes(a, b, op_name):
    """Return (reduce_axes_a, reduce_axes_b) for the restricted broadcast rule."""
    sa, sb = a.shape, b.shape
    if sa == sb:
        return (), ()
    if len(sb) < len(sa) and sa[len(sa) - len(sb):] == sb:
        return (), tuple(range(len(sa) - len(sb)))
    if len(sa) < len(sb) and sb[len(sb) - len(sa):] == sa:
        return tuple(range(len(sb) - len(sa))), ()
    raise ShapeError(f"{op_name}: shapes {sa} and {sb} neither match nor differ only in leading axes")


def _reduce_to(g, shape, axes):
    return g.sum(axis=axes) if axes else g


# ---------------------------------------------------------------------------
# elementwise ops

def add(a, b):
    a, b = as_diff(a), as_diff(b)
    ra, rb = _check_binary_shapes(a, b, "add")

    def back(g):
        b.accumulate_grad(_reduce_to(g, b.shape, rb), own=bool(rb))
        a.accumulate_grad(_reduce_to(g, a.shape, ra), own=True)

    return _result(a.values + b.values, (a, b), back)


def sub(a, b):
    a, b = as_diff(a), as_diff(b)
    ra, rb = _check_binary_shapes(a, b, "sub")

    def back(g):
        b.accumulate_grad(-_reduce_to(g, b.shape, rb), own=True)
        a.accumulate_grad(_reduce_to(g, a.shape, ra), own=True)

    return _result(a.values - b.values, (a, b), back)


def mul(a, b):
    a, b = as_diff(a), as_diff(b)
    ra, rb = _check_binary_shapes(a, b, "mul")
    av, bv = a.values, b.values

    def back(g):
        a.accumulate_grad(_reduce_to(g * bv, a.shape, ra), own=True)
        b.accumulate_grad(_reduce_to(g * av, b.shape, rb), own=True)

    return _result(av * bv, (a, b), back)


def neg(a):
    a = as_diff(a)

    def back(g):
        a.accumulate_grad(-g, own=True)

    return _result(-a.values, (a,), back)


def scale(a, factor):
    """Multiply by a plain python/number scalar (not a graph node)."""
    a = as_diff(a)
    factor = float(factor)

    def back(g):
        a.accumulate_grad(g * factor, own=True)

    return _result(a.values * factor, (a,), back)


def div_scalar(a, divisor):
    """Divide by a plain scalar with correctly rounded IEEE division."""
    a = as_diff(a)
    divisor = float(divisor)

    def back(g):
        a.accumulate_grad(g / divisor, own=True)

    return _result(a.values / divisor, (a,), back)


def relu(a):
    a = as_diff(a)
    av = a.values

    def back(g):
        a.accumulate_grad(g * (av > 0.0), own=True)

    return _result(np.maximum(av, 0.0), (a,), back)


def exp(a):
    a = as_diff(a)
    out = np.exp(a.values)

    def back(g):
        a.accumulate_grad(g * out, own=True)

    return _result(out, (a,), back)


def log(a):
    a = as_diff(a)
    bad = a.values <= 0.0
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DomainError(f"log: non-positive input {a.values[idx]!r} at index {idx}")
    av = a.values

    def back(g):
        a.accumulate_grad(g / av, own=True)

    return _result(np.log(av), (a,), back)


def square(a):
    a = as_diff(a)
    av = a.values

    def back(g):
        a.accumulate_grad(2.0 * av * g, own=True)

    return _result(av * av, (a,), back)


def softplus(a):
    """log(1 + exp(a)), computed without overflow."""
    a = as_diff(a)
    av = a.values
    out = np.maximum(av, 0.0) + np.log1p(np.exp(-np.abs(av)))

    def back(g):
        # sigmoid(a), stable at both tails
        sig = 0.5 * (1.0 + np.tanh(0.5 * av))
        a.accumulate_grad(g * sig, own=True)

    return _result(out, (a,), back)


def array_sum(a):
    """Sum of all elements, returned as a scalar node."""
    a = as_diff(a)

    def back(g):
        a.accumulate_grad(np.broadcast_to(g, a.shape).copy() if a.shape else g, own=bool(a.shape))

    return _result(np.sum(a.values), (a,), back)


def sum_axis0(a):
    a = as_diff(a)

    def back(g):
        a.accumulate_grad(np.broadcast_to(g, a.shape))

    return _result(a.values.sum(axis=0), (a,), back)


def mean_axis0(a):
    return div_scalar(sum_axis0(a), a.shape[0])


def mean(a):
    return div_scalar(array_sum(a), a.size)


# ---------------------------------------------------------------------------
# complex ops (trailing dimension of size 2 = real, imaginary)

def _require_complex(a, op_name):
    if a.shape == () or a.shape[-1] != 2:
        raise ShapeError(f"{op_name}: trailing dimension must be 2 (real, imag), got shape {a.shape}")


def cmul(a, b):
    """Complex multiply: (ac - bd, ad + bc)."""
    a, b = as_diff(a), as_diff(b)
    _require_complex(a, "cmul")
    _require_complex(b, "cmul")
    ra, rb = _check_binary_shapes(a, b, "cmul")
    ar, ai = a.values[..., 0], a.values[..., 1]
    br, bi = b.values[..., 0], b.values[..., 1]
    out = np.stack([ar * br - ai * bi, ar * bi + ai * br], axis=-1)

    def back(g):
        gr, gi = g[..., 0], g[..., 1]
        ga = np.stack([gr * br + gi * bi, -gr * bi + gi * br], axis=-1)
        gb = np.stack([gr * ar + gi * ai, -gr * ai + gi * ar], axis=-1)
        a.accumulate_grad(_reduce_to(ga, a.shape, ra), own=True)
        b.accumulate_grad(_reduce_to(gb, b.shape, rb), own=True)

    return _result(out, (a, b), back)


def cconj(a):
    a = as_diff(a)
    _require_complex(a, "cconj")
    flip = np.array([1.0, -1.0])

    def back(g):
        a.accumulate_grad(g * flip, own=True)

    return _result(a.values * flip, (a,), back)


def cabs2(a):
    """Squared modulus: re^2 + im^2; drops the trailing complex dimension."""
    a = as_diff(a)
    _require_complex(a, "cabs2")
    av = a.values

    def back(g):
        a.accumulate_grad(2.0 * av * g[..., None], own=True)

    return _result(av[..., 0] ** 2 + av[..., 1] ** 2, (a,), back)


def cmatmul(matrix, x):
    """Multiply along axis -3 by a constant complex matrix.

    x has shape (..., K, T, 2); matrix is a plain complex ndarray (J, K).
    Returns (..., J, T, 2). Used for per-column DFT/IDFT and the CP
    insertion/removal operators.
    """
    x = as_diff(x)
    _require_complex(x, "cmatmul")
    if x.ndim < 3:
        raise ShapeError(f"cmatmul: input must have shape (..., K, T, 2), got {x.shape}")
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[1] != x.shape[-3]:
        raise ShapeError(f"cmatmul: matrix {matrix.shape} incompatible with input {x.shape}")
    mr, mi = matrix.real.copy(), matrix.imag.copy()

    def apply(m_r, m_i, v):
        # tensordot lowers each product to one large GEMM over batch*columns
        def td(m, w):
            return np.moveaxis(np.tensordot(m, w, axes=(1, w.ndim - 2)), 0, -2)

        vr, vi = v[..., 0], v[..., 1]
        outr = td(m_r, vr) - td(m_i, vi)
        outi = td(m_r, vi) + td(m_i, vr)
        return np.stack([outr, outi], axis=-1)

    def back(g):
        # gradient of a complex-linear map is multiplication by the Hermitian transpose
        x.accumulate_grad(apply(mr.T, -mi.T, g), own=True)

    return _result(apply(mr, mi, x.values), (x,), back)


# ---------------------------------------------------------------------------
# structural ops

def reshape(a, shape):
    a = as_diff(a)
    old = a.shape

    def back(g):
        a.accumulate_grad(g.reshape(old))

    return _result(a.values.reshape(shape), (a,), back)


def transpose(a, axes):
    a = as_diff(a)
    inv = np.argsort(axes)

    def back(g):
        a.accumulate_grad(g.transpose(inv))

    return _result(a.values.transpose(axes), (a,), back)


def gather_rows(a, indices):
    """Index along axis 0: out[..., :] = a[indices[...], :].

    indices may have any shape; the output shape is indices.shape + a.shape[1:].
    Backward scatter-adds, so repeated indices accumulate.
    """
    a = as_diff(a)
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeError("gather_rows: indices must be integers")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for axis of length {a.shape[0]}")

    def back(g):
        ga = np.zeros_like(a.values)
        np.add.at(ga, idx.reshape(-1), g.reshape((-1,) + a.shape[1:]))
        a.accumulate_grad(ga, own=True)

    return _result(a.values[idx], (a,), back)


def place_rows(values, row_indices, base):
    """Write rows into a constant template along axis -2.

    values: (..., K, C); base: (N, C) constant; returns (..., N, C) equal to
    base broadcast over the leading axes with out[..., row_indices[j], :] =
    values[..., j, :]. Used to lay data symbols onto a pilot grid.
    """
    values = as_diff(values)
    base = as_diff(base)
    if base.requires_grad:
        raise ShapeError("place_rows: base template must be constant")
    idx = np.asarray(row_indices)
    if idx.ndim != 1 or idx.size != values.shape[-2]:
        raise ShapeError(f"place_rows: need one row index per value row, got {idx.shape} for {values.shape}")
    if np.unique(idx).size != idx.size:
        raise ShapeError("place_rows: row indices must be unique")
    lead = values.shape[:-2]
    out = np.broadcast_to(base.values, lead + base.shape).copy()
    out[..., idx, :] = values.values

    def back(g):
        values.accumulate_grad(g[..., idx, :], own=True)  # advanced indexing copies

    return _result(out, (values,), back)


def delay(x, steps, axis=-2):
    """Shift along a time axis by `steps`, filling with zeros at the start."""
    x = as_diff(x)
    if steps < 0:
        raise ShapeError("delay: steps must be >= 0")
    axis = axis % x.ndim
    n = x.shape[axis]
    if steps == 0:
        return x

    def sl(a, b):
        s = [slice(None)] * x.ndim
        s[axis] = slice(a, b)
        return tuple(s)

    out = np.zeros_like(x.values)
    out[sl(steps, None)] = x.values[sl(0, n - steps)]

    def back(g):
        gx = np.zeros_like(x.values)
        gx[sl(0, n - steps)] = g[sl(steps, None)]
        x.accumulate_grad(gx, own=True)

    return _result(out, (x,), back)


def pointwise_mix(x, weights, bias=None):
    """Mix the trailing channel axis: out[..., o] = sum_c x[..., c] w[c, o] (+ bias).

    This is a 1x1 convolution; all operands may carry gradients.
    """
    x, weights = as_diff(x), as_diff(weights)
    if weights.ndim != 2 or x.shape[-1] != weights.shape[0]:
        raise ShapeError(f"pointwise_mix: input channels {x.shape} incompatible with weights {weights.shape}")
    parents = [x, weights]
    if bias is not None:
        bias = as_diff(bias)
        if bias.shape != (weights.shape[1],):
            raise ShapeError(f"pointwise_mix: bias shape {bias.shape} != ({weights.shape[1]},)")
        parents.append(bias)
    xv, wv = x.values, weights.values
    flat = xv.reshape(-1, xv.shape[-1])
    out = (flat @ wv).reshape(xv.shape[:-1] + (wv.shape[1],))
    if bias is not None:
        out += bias.values

    def back(g):
        gf = np.ascontiguousarray(g).reshape(-1, wv.shape[1])
        x.accumulate_grad((gf @ wv.T).reshape(xv.shape), own=True)
        weights.accumulate_grad(flat.T @ gf, own=True)
        if bias is not None:
            bias.accumulate_grad(gf.sum(axis=0), own=True)

    return _result(out, tuple(parents), back)


def bce_bits(llrs, signs):
    """Per-bit binary cross-entropy in bits (base-2 log) from LLRs.

    signs is +1 where the transmitted bit is 1, -1 where it is 0, and 0 on
    masked positions (no contribution). Positive LLR favors bit 1, so the
    per-bit loss is log2(1 + exp(-sign * llr)).
    """
    llrs = as_diff(llrs)
    s = np.asarray(signs, dtype=np.float64)
    if s.shape != llrs.shape:
        raise ShapeError(f"bce_bits: signs shape {s.shape} != llrs shape {llrs.shape}")
    z = -s * llrs.values
    out = (np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))) / np.log(2.0)
    out[s == 0.0] = 0.0

    def back(g):
        sig = 0.5 * (1.0 + np.tanh(0.5 * z))  # sigmoid(-s*llr)
        llrs.accumulate_grad(g * (-s) * sig / np.log(2.0), own=True)

    return _result(out, (llrs,), back)
