"""Dense-matrix reverse-mode automatic differentiation.

Every value is a 2-D row-major matrix: row vectors are ``1 x n``, scalars
``1 x 1``. Operations record a backward closure on the output node; calling
:meth:`Tensor.backward` on a scalar walks the graph once in reverse
topological order and accumulates gradients into every reachable node with
``requires_grad``.

Forward passes are bit-deterministic for a fixed input: nothing here draws
randomness or depends on iteration order of unordered containers.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, ShapeMismatchError

NORM_EPSILON = 1e-12


class Tensor:
    """A 2-D matrix node in the gradient graph.

    ``data`` is always a C-contiguous 2-D float array (f32 or f64).
    ``grad`` is allocated lazily during backward and has the same shape.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_backward", "_parents")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeMismatchError(f"tensors are 2-D, got ndim={arr.ndim}")
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._backward = None
        self._parents = ()

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        if self.data.size != 1:
            raise ShapeMismatchError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def backward(self, seed=None):
        """Reverse-mode sweep from this node.

        Visits each reachable node exactly once, children before parents.
        ``seed`` defaults to ones (the usual scalar-loss case).
        """
        order = _toposort(self)
        if seed is None:
            seed = np.ones_like(self.data)
        self._accumulate(np.asarray(seed, dtype=self.data.dtype).reshape(self.shape))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{tag})"

    # operator sugar; the module-level functions do the work
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    @property
    def T(self):
        return transpose(self)


class Parameter(Tensor):
    """A named trainable matrix; gradients are zeroed at each optimizer step."""

    __slots__ = ("embedding",)

    def __init__(self, data, name, dtype=None, embedding=False):
        super().__init__(data, requires_grad=True, name=name, dtype=dtype)
        self.embedding = embedding


def _toposort(root):
    """Iterative DFS post-order; graphs can be deeper than the recursion limit."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(x, dtype=dtype)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy row/column broadcasting)."""
    if grad.shape == shape:
        return grad
    out = grad
    if shape[0] == 1 and out.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    if out.shape != shape:
        raise ShapeMismatchError(f"cannot reduce grad {grad.shape} to {shape}")
    return out


def _binary(a, b, forward, da, db):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    out = Tensor(forward(a.data, b.data))
    needs = a.requires_grad or b.requires_grad or a._parents or b._parents
    if needs:
        out._parents = (a, b)

        def backward(g):
            if da is not None:
                a._accumulate(_unbroadcast(da(g, a.data, b.data), a.shape))
            if db is not None:
                b._accumulate(_unbroadcast(db(g, a.data, b.data), b.shape))

        out._backward = backward
    return out


def add(a, b):
    return _binary(a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary(a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _binary(
        a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x
    )


def div(a, b):
    return _binary(
        a,
        b,
        lambda x, y: x / y,
        lambda g, x, y: g / y,
        lambda g, x, y: -g * x / (y * y),
    )


def matmul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    if a.cols != b.rows:
        raise ShapeMismatchError(
            f"matmul: inner dimensions differ, {a.shape} x {b.shape}"
        )
    out = Tensor(a.data @ b.data)
    out._parents = (a, b)

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    out._backward = backward
    return out


def transpose(a):
    out = Tensor(a.data.T)
    out._parents = (a,)

    def backward(g):
        a._accumulate(g.T)

    out._backward = backward
    return out


def scale(a, c):
    c = float(c)
    out = Tensor(a.data * c)
    out._parents = (a,)

    def backward(g):
        a._accumulate(g * c)

    out._backward = backward
    return out


def add_scalar(a, c):
    out = Tensor(a.data + float(c))
    out._parents = (a,)

    def backward(g):
        a._accumulate(g)

    out._backward = backward
    return out


def add_n(tensors):
    """Sum a list of same-shape tensors in one graph node.

    Used for loss accumulation; keeps long sums from forming deep chains.
    """
    tensors = list(tensors)
    if not tensors:
        raise DegenerateInputError("add_n of an empty list")
    shape = tensors[0].shape
    for t in tensors:
        if t.shape != shape:
            raise ShapeMismatchError(f"add_n: shapes differ, {shape} vs {t.shape}")
    acc = tensors[0].data.copy()
    for t in tensors[1:]:
        acc += t.data
    out = Tensor(acc)
    out._parents = tuple(tensors)

    def backward(g):
        for t in out._parents:
            t._accumulate(g)

    out._backward = backward
    return out


def sum_all(a):
    out = Tensor(np.array([[a.data.sum()]], dtype=a.data.dtype))
    out._parents = (a,)

    def backward(g):
        a._accumulate(np.full_like(a.data, g[0, 0]))

    out._backward = backward
    return out


def mean_rows(a):
    """Column-wise mean over rows: (l x d) -> (1 x d)."""
    n = a.rows
    out = Tensor(a.data.mean(axis=0, keepdims=True))
    out._parents = (a,)

    def backward(g):
        a._accumulate(np.repeat(g, n, axis=0) / n)

    out._backward = backward
    return out


def concat_cols(tensors):
    """Concatenate row-aligned tensors horizontally."""
    tensors = list(tensors)
    rows = tensors[0].rows
    for t in tensors:
        if t.rows != rows:
            raise ShapeMismatchError("concat_cols: row counts differ")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=1))
    out._parents = tuple(tensors)
    widths = [t.cols for t in tensors]

    def backward(g):
        offset = 0
        for t, w in zip(out._parents, widths):
            t._accumulate(g[:, offset : offset + w])
            offset += w

    out._backward = backward
    return out


def concat_rows(tensors):
    """Stack column-aligned tensors vertically."""
    tensors = list(tensors)
    cols = tensors[0].cols
    for t in tensors:
        if t.cols != cols:
            raise ShapeMismatchError("concat_rows: column counts differ")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=0))
    out._parents = tuple(tensors)
    heights = [t.rows for t in tensors]

    def backward(g):
        offset = 0
        for t, h in zip(out._parents, heights):
            t._accumulate(g[offset : offset + h, :])
            offset += h

    out._backward = backward
    return out


def row(a, i):
    """Select row `i` as a 1 x cols tensor."""
    out = Tensor(a.data[i : i + 1, :].copy())
    out._parents = (a,)

    def backward(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        a.grad[i : i + 1, :] += g

    out._backward = backward
    return out


def gather_rows(table, indices):
    """Row lookup (embedding gather); backward scatter-adds into the table."""
    idx = np.asarray(indices, dtype=np.intp)
    out = Tensor(table.data[idx, :])
    out._parents = (table,)

    def backward(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    out._backward = backward
    return out


def softmax_rows(a):
    """Row-wise softmax with max-subtraction; each output row sums to 1."""
    if a.data.size == 0:
        raise DegenerateInputError("softmax_rows of an empty matrix")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)
    out._parents = (a,)

    def backward(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        a._accumulate(y * (g - dot))

    out._backward = backward
    return out


def sigmoid(a):
    # exp of -|x| on both branches avoids overflow for any input; the clip
    # keeps the output strictly inside (0, 1) even where floats saturate
    x = a.data
    ex = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))
    info = np.finfo(y.dtype)
    np.clip(y, info.tiny, 1.0 - info.epsneg, out=y)
    out = Tensor(y)
    out._parents = (a,)

    def backward(g):
        a._accumulate(g * y * (1.0 - y))

    out._backward = backward
    return out


def tanh(a):
    y = np.tanh(a.data)
    out = Tensor(y)
    out._parents = (a,)

    def backward(g):
        a._accumulate(g * (1.0 - y * y))

    out._backward = backward
    return out


def exp(a):
    y = np.exp(a.data)
    out = Tensor(y)
    out._parents = (a,)

    def backward(g):
        a._accumulate(g * y)

    out._backward = backward
    return out


def log(a):
    out = Tensor(np.log(a.data))
    out._parents = (a,)

    def backward(g):
        a._accumulate(g / a.data)

    out._backward = backward
    return out


def relu(a):
    y = np.maximum(a.data, 0.0)
    out = Tensor(y)
    out._parents = (a,)

    def backward(g):
        a._accumulate(g * (a.data > 0.0))

    out._backward = backward
    return out


def l2_normalize(a):
    """Scale a row vector to unit Euclidean norm.

    Raises :class:`DegenerateInputError` when the norm is below
    ``NORM_EPSILON``; the direction of a near-zero vector is meaningless.
    """
    if a.rows != 1:
        raise ShapeMismatchError(f"l2_normalize expects a row vector, got {a.shape}")
    norm = float(np.sqrt((a.data * a.data).sum()))
    if norm <= NORM_EPSILON:
        raise DegenerateInputError(f"l2_normalize: norm {norm:.3e} is below epsilon")
    y = a.data / norm
    out = Tensor(y)
    out._parents = (a,)

    def backward(g):
        # d(v/|v|) = (I - y^T y) / |v|
        a._accumulate((g - y * (g * y).sum()) / norm)

    out._backward = backward
    return out


def affine(a, mul_by, add_to):
    """Elementwise ``mul_by * a + add_to`` with python-float coefficients."""
    mul_by = float(mul_by)
    out = Tensor(a.data * mul_by + float(add_to))
    out._parents = (a,)

    def backward(g):
        a._accumulate(g * mul_by)

    out._backward = backward
    return out


def dot(a, b):
    """Inner product of two row vectors, as a 1 x 1 tensor."""
    return matmul(a, transpose(b))


class GruParams:
    """Update/reset/candidate gate weights for one GRU layer.

    ``w_*`` act on the input (d_in x d_h), ``u_*`` on the previous hidden
    state (d_h x d_h), ``b_*`` are 1 x d_h biases.
    """

    __slots__ = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_c", "u_c", "b_c")

    def __init__(self, w_z, u_z, b_z, w_r, u_r, b_r, w_c, u_c, b_c):
        self.w_z, self.u_z, self.b_z = w_z, u_z, b_z
        self.w_r, self.u_r, self.b_r = w_r, u_r, b_r
        self.w_c, self.u_c, self.b_c = w_c, u_c, b_c

    def all(self):
        return [getattr(self, s) for s in self.__slots__]


def gru_cell(x_t, h_prev, params):
    """One gated-recurrent step.

    update gate    z = sigmoid(x W_z + h U_z + b_z)
    reset gate     r = sigmoid(x W_r + h U_r + b_r)
    candidate      c = tanh(x W_c + (r * h) U_c + b_c)
    new state      h' = (1 - z) * h + z * c

    With all-zero weights and biases this reduces to 0.5 * h_prev.
    """
    if x_t.rows != 1 or h_prev.rows != 1:
        raise ShapeMismatchError("gru_cell operates on row vectors")
    if x_t.cols != params.w_z.rows or h_prev.cols != params.u_z.rows:
        raise ShapeMismatchError(
            f"gru_cell: input {x_t.shape} / state {h_prev.shape} do not match "
            f"weights {params.w_z.shape} / {params.u_z.shape}"
        )
    xz = add(matmul(x_t, params.w_z), params.b_z)
    xr = add(matmul(x_t, params.w_r), params.b_r)
    xc = add(matmul(x_t, params.w_c), params.b_c)
    return gru_cell_from_projected(xz, xr, xc, h_prev, params)


def gru_cell_from_projected(xz, xr, xc, h_prev, params):
    """GRU step with the input projections (x W_* + b_*) already computed.

    Lets sequence encoders batch the input side into three matmuls for the
    whole sequence; only the recurrent side stays per-step.
    """
    z = sigmoid(add(xz, matmul(h_prev, params.u_z)))
    r = sigmoid(add(xr, matmul(h_prev, params.u_r)))
    c = tanh(add(xc, matmul(mul(r, h_prev), params.u_c)))
    return add(mul(affine(z, -1.0, 1.0), h_prev), mul(z, c))


def gru_sequence(x, params):
    """Full left-to-right GRU scan as a single fused graph node.

    Semantically identical to folding :func:`gru_cell` over the rows of
    ``x``, including the per-step evaluation order (so prefix runs stay
    bit-identical to full runs), but runs the loop in plain numpy and
    backpropagates through time in one hand-written closure. This removes
    roughly an order of magnitude of per-token graph bookkeeping.
    """
    if x.rows == 0:
        raise DegenerateInputError("gru_sequence over an empty sequence")
    p = params
    if x.cols != p.w_z.rows:
        raise ShapeMismatchError(
            f"gru_sequence: input {x.shape} does not match weights {p.w_z.shape}"
        )
    l, d_h = x.rows, p.u_z.rows
    dtype = x.data.dtype
    w_z, u_z, b_z = p.w_z.data, p.u_z.data, p.b_z.data
    w_r, u_r, b_r = p.w_r.data, p.u_r.data, p.b_r.data
    w_c, u_c, b_c = p.w_c.data, p.u_c.data, p.b_c.data

    states = np.empty((l, d_h), dtype=dtype)
    zs = np.empty((l, d_h), dtype=dtype)
    rs = np.empty((l, d_h), dtype=dtype)
    cs = np.empty((l, d_h), dtype=dtype)
    h = np.zeros((1, d_h), dtype=dtype)
    lo = np.finfo(dtype).tiny
    for t in range(l):
        x_t = x.data[t : t + 1]
        az = (x_t @ w_z + b_z) + h @ u_z
        ar = (x_t @ w_r + b_r) + h @ u_r
        ez = np.exp(-np.abs(az))
        er = np.exp(-np.abs(ar))
        z = np.where(az >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
        r = np.where(ar >= 0, 1.0 / (1.0 + er), er / (1.0 + er))
        np.clip(z, lo, 1.0 - np.finfo(dtype).epsneg, out=z)
        np.clip(r, lo, 1.0 - np.finfo(dtype).epsneg, out=r)
        c = np.tanh((x_t @ w_c + b_c) + (r * h) @ u_c)
        h = (z * -1.0 + 1.0) * h + z * c
        zs[t], rs[t], cs[t], states[t] = z, r, c, h

    out = Tensor(states)
    out._parents = (x, p.w_z, p.u_z, p.b_z, p.w_r, p.u_r, p.b_r, p.w_c, p.u_c, p.b_c)

    def backward(grad):
        # the recurrent chain is sequential, but the per-gate pre-activation
        # gradients can be collected and turned into weight gradients with
        # one GEMM per weight matrix afterwards
        h_prevs = np.empty((l, d_h), dtype=dtype)
        h_prevs[0] = 0.0
        h_prevs[1:] = states[:-1]
        dzs = np.empty((l, d_h), dtype=dtype)
        drs = np.empty((l, d_h), dtype=dtype)
        dcs = np.empty((l, d_h), dtype=dtype)
        u_z_t, u_r_t, u_c_t = u_z.T, u_r.T, u_c.T
        carry = np.zeros((1, d_h), dtype=dtype)
        for t in range(l - 1, -1, -1):
            h_prev = h_prevs[t : t + 1]
            z, r, c = zs[t : t + 1], rs[t : t + 1], cs[t : t + 1]
            dh = grad[t : t + 1] + carry
            dz = dh * (c - h_prev) * z * (1.0 - z)
            dc = dh * z * (1.0 - c * c)
            drh = dc @ u_c_t
            dr_pre = drh * h_prev * r * (1.0 - r)
            carry = (
                dh * (1.0 - z) + drh * r + dr_pre @ u_r_t + dz @ u_z_t
            )
            dzs[t], drs[t], dcs[t] = dz, dr_pre, dc
        if x.requires_grad or x._parents:
            x._accumulate(dzs @ w_z.T + drs @ w_r.T + dcs @ w_c.T)
        xt = x.data.T
        hpt = h_prevs.T
        p.w_z._accumulate(xt @ dzs)
        p.u_z._accumulate(hpt @ dzs)
        p.b_z._accumulate(dzs.sum(axis=0, keepdims=True))
        p.w_r._accumulate(xt @ drs)
        p.u_r._accumulate(hpt @ drs)
        p.b_r._accumulate(drs.sum(axis=0, keepdims=True))
        p.w_c._accumulate(xt @ dcs)
        p.u_c._accumulate((rs * h_prevs).T @ dcs)
        p.b_c._accumulate(dcs.sum(axis=0, keepdims=True))

    out._backward = backward
    return out


def dropout(a, rate, rng):
    """Inverted dropout with a mask drawn from `rng`; identity when rate is 0."""
    if rate <= 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise DegenerateInputError(f"dropout rate must be in [0, 1), got {rate}")
    keep = 1.0 - rate
    mask = (rng.random(a.shape) < keep).astype(a.data.dtype) / keep
    out = Tensor(a.data * mask)
    out._parents = (a,)

    def backward(g):
        a._accumulate(g * mask)

    out._backward = backward
    return out
