"""Small reverse-mode autodiff over dense float64 arrays.

Every primitive here accepts either a plain ``np.ndarray``/scalar or a
:class:`DiffValue`. Plain inputs take the fast numpy path and return numpy;
as soon as one input is a ``DiffValue`` the op is recorded so ``backward``
can replay it. This lets the manifold kernels be written once and used both
for evaluation and for training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

EUCLIDEAN = "euclidean"
TANGENT_AT_ORIGIN = "tangent_at_origin"
RIEMANNIAN_POINCARE = "riemannian_poincare"
PARAM_SPACES = (EUCLIDEAN, TANGENT_AT_ORIGIN, RIEMANNIAN_POINCARE)


class BackwardNaNError(FloatingPointError):
    """Raised when a backward rule produces a non-finite gradient."""


class DiffValue:
    """A node in the computation record.

    ``data`` is always a float64 ndarray (0-d for scalars). ``grad`` is
    allocated on first accumulation.
    """

    __slots__ = ("data", "grad", "_parents", "_backward", "op", "requires_grad")
    __array_priority__ = 100.0

    def __init__(self, data, parents=(), backward=None, op="leaf", requires_grad=True):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.op = op
        self.requires_grad = requires_grad

    # --- conveniences -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return transpose(self)

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"DiffValue(op={self.op!r}, shape={self.data.shape})"

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, seed=None):
        backward(self, seed)

    # --- operators ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return gather(self, idx)


def value(x):
    """Underlying ndarray of ``x`` (no copy)."""
    return x.data if isinstance(x, DiffValue) else np.asarray(x, dtype=np.float64)


def detach(x):
    """Constant copy of ``x``: gradients stop here."""
    return value(x).copy() if isinstance(x, DiffValue) else x


def is_diff(*xs):
    return any(isinstance(x, DiffValue) for x in xs)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _node(data, parents, rule, op):
    """Build a recorded node. ``rule(g)`` returns one grad per parent."""
    parents = tuple(parents)
    return DiffValue(data, parents=parents, backward=rule, op=op)


# --- backward driver ------------------------------------------------------
def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if isinstance(p, DiffValue) and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root, seed=None):
    """Accumulate d(root)/d(node) into ``.grad`` of every reachable node."""
    if seed is None:
        if root.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {root.data.shape}")
        seed = np.ones_like(root.data)
    order = _topo_order(root)
    grads = {id(root): np.asarray(seed, dtype=np.float64)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        node.grad = g if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if not isinstance(p, DiffValue) or pg is None:
                continue
            pg = _unbroadcast(np.asarray(pg, dtype=np.float64), p.data.shape)
            if not np.all(np.isfinite(pg)):
                raise BackwardNaNError(f"non-finite gradient produced by primitive '{node.op}'")
            prev = grads.get(id(p))
            grads[id(p)] = pg if prev is None else prev + pg


# --- arithmetic -----------------------------------------------------------
def add(a, b):
    if not is_diff(a, b):
        return value(a) + value(b)
    return _node(value(a) + value(b), (a, b), lambda g: (g, g), "add")


def sub(a, b):
    if not is_diff(a, b):
        return value(a) - value(b)
    return _node(value(a) - value(b), (a, b), lambda g: (g, -g), "sub")


def mul(a, b):
    va, vb = value(a), value(b)
    if not is_diff(a, b):
        return va * vb
    return _node(va * vb, (a, b), lambda g: (g * vb, g * va), "mul")


def div(a, b):
    va, vb = value(a), value(b)
    if not is_diff(a, b):
        return va / vb
    out = va / vb
    return _node(out, (a, b), lambda g: (g / vb, -g * out / vb), "div")


def neg(a):
    if not is_diff(a):
        return -value(a)
    return _node(-a.data, (a,), lambda g: (-g,), "neg")


def power(a, p):
    """Elementwise ``a**p`` for a constant exponent."""
    va = value(a)
    if not is_diff(a):
        return va**p
    return _node(va**p, (a,), lambda g: (g * p * va ** (p - 1),), "pow")


def square(a):
    va = value(a)
    if not is_diff(a):
        return va * va
    return _node(va * va, (a,), lambda g: (2.0 * g * va,), "square")


def matmul(a, b):
    va, vb = value(a), value(b)
    if not is_diff(a, b):
        return va @ vb

    def rule(g):
        ga = g @ np.swapaxes(vb, -1, -2) if vb.ndim > 1 else np.multiply.outer(g, vb)
        gb = np.swapaxes(va, -1, -2) @ g if va.ndim > 1 else np.multiply.outer(va, g)
        return ga, gb

    return _node(va @ vb, (a, b), rule, "matmul")


def transpose(a):
    if not is_diff(a):
        return value(a).T
    return _node(a.data.T, (a,), lambda g: (g.T,), "transpose")


# --- reductions -----------------------------------------------------------
def _expand(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    va = value(a)
    out = va.sum(axis=axis, keepdims=keepdims)
    if not is_diff(a):
        return out
    return _node(out, (a,), lambda g: (_expand(g, va.shape, axis, keepdims),), "sum")


def mean(a, axis=None, keepdims=False):
    va = value(a)
    out = va.mean(axis=axis, keepdims=keepdims)
    if not is_diff(a):
        return out
    n = va.size if axis is None else np.prod([va.shape[ax] for ax in np.atleast_1d(axis)])
    return _node(out, (a,), lambda g: (_expand(g, va.shape, axis, keepdims) / n,), "mean")


def norm(a, axis=-1, keepdims=False):
    """Euclidean norm; the gradient at an exactly-zero vector is taken as 0."""
    va = value(a)
    out = np.sqrt((va * va).sum(axis=axis, keepdims=keepdims))
    if not is_diff(a):
        return out

    def rule(g):
        o = out if keepdims else np.expand_dims(out, axis)
        gg = g if keepdims else np.expand_dims(g, axis)
        safe = np.where(o > 0, o, 1.0)
        return (np.where(o > 0, gg * va / safe, 0.0),)

    return _node(out, (a,), rule, "norm")


def reshape(a, shape):
    va = value(a)
    out = va.reshape(shape)
    if not is_diff(a):
        return out
    return _node(out, (a,), lambda g: (g.reshape(va.shape),), "reshape")


def concat(xs, axis=-1):
    vals = [value(x) for x in xs]
    out = np.concatenate(vals, axis=axis)
    if not is_diff(*xs):
        return out
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def rule(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _node(out, tuple(xs), rule, "concat")


def gather(a, idx):
    """``a[idx]`` with scatter-add backward (repeated indices accumulate)."""
    va = value(a)
    out = va[idx]
    if not is_diff(a):
        return out

    def rule(g):
        full = np.zeros_like(va)
        np.add.at(full, idx, g)
        return (full,)

    return _node(out, (a,), rule, "gather")


def segment_sum(values, segment_ids, num_segments):
    """Sum rows of ``values`` that share a segment id (scatter-add)."""
    vv = value(values)
    seg = np.asarray(segment_ids)
    m = sp.csr_matrix(
        (np.ones(len(seg)), (seg, np.arange(len(seg)))), shape=(num_segments, len(seg))
    )
    flat = vv.reshape(len(seg), -1)
    out = np.asarray(m @ flat).reshape((num_segments,) + vv.shape[1:])
    if not is_diff(values):
        return out
    return _node(out, (values,), lambda g: (g[seg],), "segment_sum")


def clamp(a, lo=None, hi=None):
    """Clip to ``[lo, hi]``; gradient is identity inside, zero outside."""
    va = value(a)
    out = np.clip(va, lo, hi)
    if not is_diff(a):
        return out
    inside = np.ones_like(va, dtype=bool)
    if lo is not None:
        inside &= va >= lo
    if hi is not None:
        inside &= va <= hi
    return _node(out, (a,), lambda g: (np.where(inside, g, 0.0),), "clamp")


def relu(a):
    return clamp(a, lo=0.0)


def abs(a):  # noqa: A001
    va = value(a)
    if not is_diff(a):
        return np.abs(va)
    return _node(np.abs(va), (a,), lambda g: (g * np.sign(va),), "abs")


# --- elementwise transcendental ----------------------------------------
def _unary(name, f, dfdx):
    def op(a):
        va = value(a)
        out = f(va)
        if not is_diff(a):
            return out
        return _node(out, (a,), lambda g: (g * dfdx(va, out),), name)

    op.__name__ = name
    return op


exp = _unary("exp", np.exp, lambda x, y: y)
log = _unary("log", np.log, lambda x, y: 1.0 / x)
tanh = _unary("tanh", np.tanh, lambda x, y: 1.0 - y * y)
artanh = _unary("artanh", np.arctanh, lambda x, y: 1.0 / (1.0 - x * x))
cosh = _unary("cosh", np.cosh, lambda x, y: np.sinh(x))
sinh = _unary("sinh", np.sinh, lambda x, y: np.cosh(x))
acosh = _unary("acosh", np.arccosh, lambda x, y: 1.0 / np.sqrt(x * x - 1.0))
asinh = _unary("asinh", np.arcsinh, lambda x, y: 1.0 / np.sqrt(x * x + 1.0))


def sqrt(a):
    """Square root; gradient at exactly 0 is taken as 0 (subgradient)."""
    va = value(a)
    out = np.sqrt(va)
    if not is_diff(a):
        return out

    def rule(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, 0.5 * g / safe, 0.0),)

    return _node(out, (a,), rule, "sqrt")


def _sigmoid_np(x):
    return np.exp(-np.logaddexp(0.0, -x))


def sigmoid(a):
    va = value(a)
    out = _sigmoid_np(va)
    if not is_diff(a):
        return out
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softplus(a):
    """``log(1 + exp(a))`` computed without overflow."""
    va = value(a)
    out = np.logaddexp(0.0, va)
    if not is_diff(a):
        return out
    return _node(out, (a,), lambda g: (g * _sigmoid_np(va),), "softplus")


def softmax(a, axis=-1):
    va = value(a)
    e = np.exp(va - va.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)
    if not is_diff(a):
        return out

    def rule(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _node(out, (a,), rule, "softmax")


def log_softmax(a, axis=-1):
    va = value(a)
    shifted = va - va.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    if not is_diff(a):
        return out

    def rule(g):
        p = np.exp(out)
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return _node(out, (a,), rule, "log_softmax")


def where(cond, a, b):
    """Select elementwise; ``cond`` is a constant boolean array."""
    cond = np.asarray(cond, dtype=bool)
    va, vb = value(a), value(b)
    out = np.where(cond, va, vb)
    if not is_diff(a, b):
        return out
    return _node(out, (a, b), lambda g: (np.where(cond, g, 0.0), np.where(cond, 0.0, g)), "where")


# --- parameters and gradients -------------------------------------------
@dataclass
class Parameter:
    """A trainable leaf tagged with the space its update rule lives in."""

    value: DiffValue
    space: str = EUCLIDEAN
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.value, DiffValue):
            self.value = DiffValue(self.value)
        if self.space not in PARAM_SPACES:
            raise ValueError(f"unknown parameter space {self.space!r}")

    @property
    def data(self):
        return self.value.data

    @data.setter
    def data(self, new):
        self.value.data = np.asarray(new, dtype=np.float64)


def gradient(loss, params):
    """Gradients of scalar ``loss`` with respect to each parameter.

    Parameters that do not participate get a zero array.
    """
    if not isinstance(loss, DiffValue):
        raise TypeError("loss is not part of a computation record")
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    leaves = [p.value if isinstance(p, Parameter) else p for p in params]
    for leaf in leaves:
        leaf.grad = None
    backward(loss)
    out = [np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad.copy() for leaf in leaves]
    for leaf in leaves:
        leaf.grad = None
    return out


@dataclass
class GradCheckReport:
    max_rel_err: float
    n_checked: int
    failures: list = field(default_factory=list)  # (param index, flat index, analytic, numeric)
    tol_rel: float = 1e-4

    @property
    def ok(self):
        return not self.failures


def grad_check(f, params, h=1e-5, tol_rel=1e-4, atol=1e-8, max_coords=None, rng=None):
    """Compare ``gradient(f(), params)`` with central finite differences.

    ``f`` is a zero-argument callable rebuilding the loss from the current
    parameter values. The relative error of a coordinate is
    ``|a - n| / max(|a|, |n|, atol)``; failures are reported, not raised.
    """
    leaves = [p.value if isinstance(p, Parameter) else p for p in params]
    analytic = gradient(f(), params)
    rng = np.random.default_rng(0) if rng is None else rng
    worst, checked, failures = 0.0, 0, []
    for pi, (leaf, ga) in enumerate(zip(leaves, analytic)):
        flat = leaf.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for k in coords:
            orig = flat[k]
            flat[k] = orig + h
            fp = float(value(f()))
            flat[k] = orig - h
            fm = float(value(f()))
            flat[k] = orig
            num = (fp - fm) / (2.0 * h)
            ana = float(ga.reshape(-1)[k])
            rel = math.fabs(ana - num) / max(math.fabs(ana), math.fabs(num), atol)
            worst = max(worst, rel)
            checked += 1
            if rel > tol_rel:
                failures.append((pi, int(k), ana, num))
    return GradCheckReport(worst, checked, failures, tol_rel)
