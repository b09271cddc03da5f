"""Dense float64 matrices with tape-based reverse-mode differentiation.

Every value is a 2-D array (row vectors are ``1 x c``, scalars ``1 x 1``).
Operations record their inputs on the output tensor; :meth:`Tensor.backward`
walks that record in reverse topological order.  The record is rebuilt on
every forward pass, so ordinary Python control flow is allowed in models.

Example
-------
>>> w = Tensor([[3.0]], requires_grad=True)
>>> (w * w).sum().backward()
>>> w.grad
array([[6.]])
"""

import contextlib
import threading

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import ContractError, DimensionError, DomainError, NumericalError

_state = threading.local()


def grad_enabled():
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Evaluate operations without recording them (inference / scoring)."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


def _as_matrix(data):
    arr = np.array(data, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"expected at most 2 dimensions, got shape {arr.shape}")
    return arr


class Tensor:
    """A float64 matrix that can take part in reverse-mode differentiation.

    Parameters
    ----------
    data : array_like
        Scalars become ``1 x 1`` and vectors become ``1 x c`` row vectors.
    requires_grad : bool
        Whether gradients should be accumulated into ``grad``.
    name : str, optional
        Used in error messages and checkpoints.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = _as_matrix(data)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None
        self.op = "leaf"

    @classmethod
    def _result(cls, data, parents, backward, op):
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.op = op
        track = grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    # -- basic accessors -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def values(self):
        """Row-major flat copy of the entries."""
        return self.data.ravel().copy()

    @property
    def T(self):
        return transpose(self)

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self):
        return self.data.copy()

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, op={self.op})"

    # -- operator sugar ---------------------------------------------------
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
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None):
        return reduce_sum(self, axis)

    def mean(self, axis=None):
        return reduce_mean(self, axis)

    def take_rows(self, index):
        return take_rows(self, index)

    def take_cols(self, index):
        return take_cols(self, index)

    def backward(self):
        backward(self)


def tensor(data, requires_grad=False, name=None):
    return data if isinstance(data, Tensor) else Tensor(data, requires_grad, name)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


# -- tape ---------------------------------------------------------------------


def build_tape(root):
    """Return the differentiable nodes reachable from ``root`` in topological order.

    Inputs always precede the operations that consume them; the root is last.
    """
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor on the tape."""
    if loss.shape != (1, 1):
        raise ContractError(f"backward needs a 1x1 loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    tape = build_tape(loss)
    pending = {id(loss): np.ones((1, 1))}
    for node in reversed(tape):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pg if key not in pending else pending[key] + pg


# -- broadcasting helpers -------------------------------------------------------


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


# -- elementwise binary -------------------------------------------------------------


def add(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_shape(a, b, "add")

    def grad(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._result(a.data + b.data, (a, b), grad, "add")


def sub(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_shape(a, b, "sub")

    def grad(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._result(a.data - b.data, (a, b), grad, "sub")


def mul(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_shape(a, b, "mul")

    def grad(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._result(a.data * b.data, (a, b), grad, "mul")


def div(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_shape(a, b, "div")
    out = a.data / b.data

    def grad(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * out / b.data, b.shape))

    return Tensor._result(out, (a, b), grad, "div")


def scale(a, c):
    a = _lift(a)
    c = float(c)
    return Tensor._result(a.data * c, (a,), lambda g: (g * c,), "scale")


# -- elementwise unary ----------------------------------------------------------


def relu(a):
    a = _lift(a)
    mask = a.data > 0
    return Tensor._result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def tanh(a):
    a = _lift(a)
    out = np.tanh(a.data)
    return Tensor._result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def exp(a):
    a = _lift(a)
    out = np.exp(a.data)
    return Tensor._result(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    a = _lift(a)
    if np.any(a.data < 0):
        raise DomainError("log of a negative value")
    with np.errstate(divide="ignore"):
        out = np.log(a.data)
    return Tensor._result(out, (a,), lambda g: (g / a.data,), "log")


def square(a):
    a = _lift(a)
    return Tensor._result(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def sqrt(a):
    a = _lift(a)
    if np.any(a.data < 0):
        raise DomainError("sqrt of a negative value")
    out = np.sqrt(a.data)
    return Tensor._result(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def clamp(a, lo, hi):
    """Clip to ``[lo, hi]``; the gradient is zero where clipping is active."""
    a = _lift(a)
    inside = (a.data >= lo) & (a.data <= hi)
    out = np.clip(a.data, lo, hi)
    return Tensor._result(out, (a,), lambda g: (g * inside,), "clamp")


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "scale": scale,
    "relu": relu,
    "tanh": tanh,
    "exp": exp,
    "log": log,
    "square": square,
    "sqrt": sqrt,
}


def elementwise(op, *args):
    """Dispatch an elementwise operation by name, e.g. ``elementwise("relu", x)``."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ContractError(f"unknown elementwise op {op!r}") from None
    return fn(*args)


def identity(a):
    return _lift(a)


ACTIVATIONS = {"identity": identity, "relu": relu, "tanh": tanh}


def activation(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ContractError(f"unknown activation {name!r}") from None


# -- matrix operations ------------------------------------------------------------


def matmul(a, b):
    a, b = _lift(a), _lift(b)
    if a.cols != b.rows:
        raise DimensionError(f"matmul: {a.shape} x {b.shape}")

    def grad(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor._result(a.data @ b.data, (a, b), grad, "matmul")


def sparse_matmul(s, a):
    """Left-multiply a dense tensor by a constant sparse matrix ``s``."""
    a = _lift(a)
    if s.shape[1] != a.rows:
        raise DimensionError(f"sparse_matmul: {s.shape} x {a.shape}")
    st = s.T.tocsr()
    out = np.asarray(s @ a.data)
    return Tensor._result(out, (a,), lambda g: (np.asarray(st @ g),), "sparse_matmul")


def transpose(a):
    a = _lift(a)
    return Tensor._result(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def reduce_sum(a, axis=None):
    a = _lift(a)
    if axis is None:
        out = np.array([[a.data.sum()]])
    else:
        out = a.data.sum(axis=axis, keepdims=True)
    return Tensor._result(out, (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),), "sum")


def reduce_mean(a, axis=None):
    a = _lift(a)
    count = a.data.size if axis is None else a.shape[axis]
    return scale(reduce_sum(a, axis), 1.0 / count)


def concat(tensors, axis=1):
    tensors = [_lift(t) for t in tensors]
    if not tensors:
        raise ContractError("concat of an empty list")
    other = 1 - axis
    if len({t.shape[other] for t in tensors}) != 1:
        raise DimensionError(f"concat: mismatched shapes {[t.shape for t in tensors]}")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def grad(g):
        if axis == 1:
            return tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))
        return tuple(g[lo:hi, :] for lo, hi in zip(bounds[:-1], bounds[1:]))

    out = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._result(out, tensors, grad, "concat")


def take_rows(a, index):
    a = _lift(a)
    index = np.asarray(index, dtype=np.intp).ravel()

    def grad(g):
        full = np.zeros(a.shape)
        np.add.at(full, index, g)
        return (full,)

    return Tensor._result(a.data[index, :], (a,), grad, "take_rows")


def take_cols(a, index):
    a = _lift(a)
    if isinstance(index, slice):
        index = np.arange(a.cols)[index]
    index = np.asarray(index, dtype=np.intp).ravel()

    def grad(g):
        full = np.zeros(a.shape)
        np.add.at(full.T, index, g.T)
        return (full,)

    return Tensor._result(a.data[:, index], (a,), grad, "take_cols")


def softmax(a):
    """Row-wise softmax."""
    a = _lift(a)
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def grad(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return Tensor._result(out, (a,), grad, "softmax")


def logsumexp(a):
    """Row-wise log-sum-exp, returning an ``r x 1`` column.

    Entries equal to ``-inf`` contribute nothing; a row must contain at
    least one finite entry.
    """
    a = _lift(a)
    peak = a.data.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(peak)):
        raise NumericalError("logsumexp: a row has no finite entry")
    e = np.exp(a.data - peak)
    total = e.sum(axis=1, keepdims=True)
    out = peak + np.log(total)
    weights = e / total
    return Tensor._result(out, (a,), lambda g: (g * weights,), "logsumexp")


def row_norm(a):
    """Euclidean norm of each row as an ``r x 1`` column.

    The gradient at a zero row is taken to be zero.
    """
    a = _lift(a)
    out = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True))

    def grad(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, g / safe, 0.0) * a.data,)

    return Tensor._result(out, (a,), grad, "row_norm")


def _cholesky(a, label):
    try:
        return scipy.linalg.cho_factor(a, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        where = f" ({label})" if label else ""
        raise NumericalError(f"Cholesky factorization failed{where}: {exc}") from None


def solve_spd(a, b, label=None):
    """``a^{-1} b`` for a symmetric positive definite ``a`` via Cholesky."""
    a, b = _lift(a), _lift(b)
    if a.rows != a.cols or a.cols != b.rows:
        raise DimensionError(f"solve_spd: {a.shape} and {b.shape}")
    factor = _cholesky(a.data, label)
    out = scipy.linalg.cho_solve(factor, b.data)

    def grad(g):
        gb = scipy.linalg.cho_solve(factor, g)
        ga = -gb @ out.T
        return 0.5 * (ga + ga.T), gb

    return Tensor._result(out, (a, b), grad, "solve_spd")


def logdet_spd(a, label=None):
    """``log |a|`` for a symmetric positive definite ``a`` via Cholesky."""
    a = _lift(a)
    if a.rows != a.cols:
        raise DimensionError(f"logdet_spd: {a.shape} is not square")
    factor = _cholesky(a.data, label)
    out = np.array([[2.0 * np.log(np.diag(factor[0])).sum()]])

    def grad(g):
        inv = scipy.linalg.cho_solve(factor, np.eye(a.rows))
        return (g[0, 0] * 0.5 * (inv + inv.T),)

    return Tensor._result(out, (a,), grad, "logdet_spd")


# -- initialisation ----------------------------------------------------------------


def glorot_uniform(fan_in, fan_out, rng, name=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros(rows, cols, requires_grad=False, name=None):
    return Tensor(np.zeros((rows, cols)), requires_grad=requires_grad, name=name)


def eye(n):
    return Tensor(np.eye(n))


def as_sparse(matrix):
    return scipy.sparse.csr_matrix(matrix, dtype=np.float64)
