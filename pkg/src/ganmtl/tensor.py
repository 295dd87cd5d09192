"""Tensors, the operation tape, and reverse-mode differentiation.

Everything is 64-bit floats so that gradient checks against central
differences are meaningful at tight tolerances.  A ``Tape`` records ops in
execution order; since node inputs always reference earlier nodes, the
backward pass is a single reverse sweep with no sorting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Operand shapes do not conform to an operation's rule."""


class DomainError(ValueError):
    """Operand values fall outside an operation's documented domain."""


class GradientError(ArithmeticError):
    """A backward pass produced a non-finite gradient."""


def _as_array(data) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(data, dtype=np.float64))


class Tensor:
    """Dense row-major float64 array; treated as immutable once built."""

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = _as_array(data)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float64))


class Param:
    """Named trainable tensor with an accumulating gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value):
        self.name = name
        self.value = value if isinstance(value, Tensor) else Tensor(value)
        self.grad = Tensor(np.zeros_like(self.value.data))

    def zero_grad(self) -> None:
        self.grad.data[...] = 0.0

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.value.shape})"


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------------------
# forward kernels
#
# Each kernel takes raw ndarrays and returns a fresh ndarray (never a view of
# an input), so adjoint arrays can alias node outputs safely.


def _check_broadcast(kind, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} do not broadcast") from None


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _axis_tuple(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis,)
    return tuple(axis)


def _k_matmul(vals, attrs):
    a, b = vals
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def _k_add(vals, attrs):
    _check_broadcast("add", *vals)
    return vals[0] + vals[1]


def _k_sub(vals, attrs):
    _check_broadcast("sub", *vals)
    return vals[0] - vals[1]


def _k_mul(vals, attrs):
    _check_broadcast("mul", *vals)
    return vals[0] * vals[1]


def _k_div(vals, attrs):
    _check_broadcast("div", *vals)
    return vals[0] / vals[1]


def _k_concat(vals, attrs):
    axis = attrs["axis"]
    ndim = vals[0].ndim
    for v in vals[1:]:
        if v.ndim != ndim:
            raise ShapeError(f"concat: rank mismatch {vals[0].shape} vs {v.shape}")
        for d in range(ndim):
            if d != axis and v.shape[d] != vals[0].shape[d]:
                raise ShapeError(f"concat: shapes {vals[0].shape} and {v.shape} differ off axis {axis}")
    return np.concatenate(vals, axis=axis)


def _k_sigmoid(vals, attrs):
    return _sigmoid(vals[0])


def _k_tanh(vals, attrs):
    return np.tanh(vals[0])


def _k_lrelu(vals, attrs):
    x = vals[0]
    return np.where(x > 0, x, attrs["alpha"] * x)


def _k_log(vals, attrs):
    x = vals[0]
    if np.any(x <= 0):
        raise DomainError("log: input has non-positive elements")
    return np.log(x)


def _k_exp(vals, attrs):
    return np.exp(vals[0])


def _k_square(vals, attrs):
    x = vals[0]
    return x * x


def _k_sqrt(vals, attrs):
    x = vals[0]
    if np.any(x < 0):
        raise DomainError("sqrt: input has negative elements")
    return np.sqrt(x)


def _k_abs(vals, attrs):
    return np.abs(vals[0])


def _k_clamp(vals, attrs):
    lo, hi = attrs["lo"], attrs["hi"]
    if not lo < hi:
        raise DomainError(f"clamp: requires lo < hi, got {lo}, {hi}")
    return np.clip(vals[0], lo, hi)


def _k_mean(vals, attrs):
    return np.asarray(np.mean(vals[0], axis=attrs.get("axis")))


def _k_sum(vals, attrs):
    return np.asarray(np.sum(vals[0], axis=attrs.get("axis")))


def _k_transpose(vals, attrs):
    x = vals[0]
    if x.ndim != 2:
        raise ShapeError(f"transpose: expects a 2-d tensor, got shape {x.shape}")
    return x.T.copy()


def _k_reshape(vals, attrs):
    x = vals[0]
    shape = tuple(attrs["shape"])
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {shape}")
    return x.reshape(shape).copy()


def _k_slice(vals, attrs):
    x = vals[0]
    axis, start, stop = attrs["axis"], attrs["start"], attrs["stop"]
    if not (0 <= axis < x.ndim):
        raise ShapeError(f"slice: axis {axis} out of range for shape {x.shape}")
    if not (0 <= start < stop <= x.shape[axis]):
        raise ShapeError(f"slice: [{start}:{stop}] invalid for axis {axis} of shape {x.shape}")
    idx = (slice(None),) * axis + (slice(start, stop),)
    return x[idx].copy()


def _im2col(x, kh, kw, ph, pw):
    """[B, C, H, W] -> [B*H*W, C*kh*kw] patch matrix (zero same-padding)."""
    xpad = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(xpad, (kh, kw), axis=(2, 3))
    B, C, H, W = x.shape
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(B * H * W, C * kh * kw)


def _k_conv2d(vals, attrs):
    x, k = vals
    if x.ndim != 4 or k.ndim != 4:
        raise ShapeError(f"conv2d: expects 4-d input and kernels, got {x.shape}, {k.shape}")
    if x.shape[1] != k.shape[1]:
        raise ShapeError(f"conv2d: channel mismatch, input {x.shape} vs kernels {k.shape}")
    kh, kw = k.shape[2], k.shape[3]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d: kernel dims must be odd for same padding, got {kh}x{kw}")
    ph, pw = kh // 2, kw // 2
    col = _im2col(x, kh, kw, ph, pw)
    B, _, H, W = x.shape
    out = col @ k.reshape(k.shape[0], -1).T
    return out.reshape(B, H, W, k.shape[0]).transpose(0, 3, 1, 2)


def _k_softmax(vals, attrs):
    x = vals[0]
    axis = attrs["axis"]
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _k_lstm_step(vals, attrs):
    """One LSTM cell update, fused: (pre-activation gates, previous cell).

    Gate layout along the feature axis is [input, forget, output, candidate];
    returns [new hidden ; new cell] concatenated on axis 1.  The activations
    are stashed on the node's attrs so the backward rule need not recompute
    them.
    """
    gates, c_prev = vals
    H = attrs["hidden"]
    if gates.ndim != 2 or gates.shape[1] != 4 * H:
        raise ShapeError(f"lstm_step: gates {gates.shape} do not match [B, {4 * H}]")
    if c_prev.shape != (gates.shape[0], H):
        raise ShapeError(f"lstm_step: cell {c_prev.shape} does not match ({gates.shape[0]}, {H})")
    i = _sigmoid(gates[:, :H])
    f = _sigmoid(gates[:, H:2 * H])
    o = _sigmoid(gates[:, 2 * H:3 * H])
    g = np.tanh(gates[:, 3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    attrs["_acts"] = (i, f, o, g, tc)
    return np.concatenate([o * tc, c], axis=1)


_KERNELS = {
    "matmul": _k_matmul,
    "add": _k_add,
    "sub": _k_sub,
    "mul": _k_mul,
    "div": _k_div,
    "concat": _k_concat,
    "sigmoid": _k_sigmoid,
    "tanh": _k_tanh,
    "lrelu": _k_lrelu,
    "log": _k_log,
    "exp": _k_exp,
    "square": _k_square,
    "sqrt": _k_sqrt,
    "abs": _k_abs,
    "clamp": _k_clamp,
    "mean": _k_mean,
    "sum": _k_sum,
    "transpose": _k_transpose,
    "reshape": _k_reshape,
    "slice": _k_slice,
    "conv2d": _k_conv2d,
    "softmax": _k_softmax,
    "lstm_step": _k_lstm_step,
}

OP_KINDS = tuple(sorted(_KERNELS))


# ---------------------------------------------------------------------------
# backward rules
#
# Each rule maps (upstream adjoint, input values, output value, attrs) to one
# gradient per input.  Returned arrays are fresh or safely shareable; the
# backward sweep never mutates an adjoint in place.


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _b_matmul(g, vals, out, attrs):
    a, b = vals
    return [g @ b.T, a.T @ g]


def _b_add(g, vals, out, attrs):
    return [_unbroadcast(g, vals[0].shape), _unbroadcast(g, vals[1].shape)]


def _b_sub(g, vals, out, attrs):
    return [_unbroadcast(g, vals[0].shape), _unbroadcast(-g, vals[1].shape)]


def _b_mul(g, vals, out, attrs):
    a, b = vals
    return [_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)]


def _b_div(g, vals, out, attrs):
    a, b = vals
    return [_unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)]


def _b_concat(g, vals, out, attrs):
    axis = attrs["axis"]
    sizes = [v.shape[axis] for v in vals]
    return [p.copy() for p in np.split(g, np.cumsum(sizes)[:-1], axis=axis)]


def _b_sigmoid(g, vals, out, attrs):
    return [g * out * (1.0 - out)]


def _b_tanh(g, vals, out, attrs):
    return [g * (1.0 - out * out)]


def _b_lrelu(g, vals, out, attrs):
    return [np.where(vals[0] > 0, g, attrs["alpha"] * g)]


def _b_log(g, vals, out, attrs):
    return [g / vals[0]]


def _b_exp(g, vals, out, attrs):
    return [g * out]


def _b_square(g, vals, out, attrs):
    return [2.0 * vals[0] * g]


def _b_sqrt(g, vals, out, attrs):
    return [g / (2.0 * out)]


def _b_abs(g, vals, out, attrs):
    return [g * np.sign(vals[0])]


def _b_clamp(g, vals, out, attrs):
    x = vals[0]
    return [g * ((x >= attrs["lo"]) & (x <= attrs["hi"]))]


def _reduce_grad(g, x_shape, axis, scale):
    axes = _axis_tuple(axis, len(x_shape))
    g_keep = np.expand_dims(g, axes) if g.ndim != len(x_shape) else g
    return np.broadcast_to(g_keep, x_shape) * scale


def _b_mean(g, vals, out, attrs):
    x = vals[0]
    axes = _axis_tuple(attrs.get("axis"), x.ndim)
    count = int(np.prod([x.shape[a] for a in axes], dtype=np.int64))
    return [_reduce_grad(g, x.shape, attrs.get("axis"), 1.0 / count)]


def _b_sum(g, vals, out, attrs):
    return [_reduce_grad(g, vals[0].shape, attrs.get("axis"), 1.0)]


def _b_transpose(g, vals, out, attrs):
    return [g.T.copy()]


def _b_reshape(g, vals, out, attrs):
    return [g.reshape(vals[0].shape).copy()]


def _b_slice(g, vals, out, attrs):
    x = vals[0]
    axis, start, stop = attrs["axis"], attrs["start"], attrs["stop"]
    gx = np.zeros_like(x)
    idx = (slice(None),) * axis + (slice(start, stop),)
    gx[idx] = g
    return [gx]


def _b_conv2d(g, vals, out, attrs):
    x, k = vals
    O, C, kh, kw = k.shape
    ph, pw = kh // 2, kw // 2
    B, _, H, W = x.shape
    col = _im2col(x, kh, kw, ph, pw)
    gmat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(B * H * W, O)
    gk = (gmat.T @ col).reshape(O, C, kh, kw)
    # grad wrt input: correlate the (padded) output grad with the flipped kernel
    gcol = _im2col(g, kh, kw, ph, pw)
    kflip = np.ascontiguousarray(k[:, :, ::-1, ::-1].transpose(0, 2, 3, 1)).reshape(O * kh * kw, C)
    gx = (gcol @ kflip).reshape(B, H, W, C).transpose(0, 3, 1, 2)
    return [np.ascontiguousarray(gx), gk]


def _b_softmax(g, vals, out, attrs):
    axis = attrs["axis"]
    dot = np.sum(g * out, axis=axis, keepdims=True)
    return [out * (g - dot)]


def _b_lstm_step(g, vals, out, attrs):
    gates, c_prev = vals
    H = attrs["hidden"]
    acts = attrs.get("_acts")
    if acts is None:  # node replayed without its forward stash
        i = _sigmoid(gates[:, :H])
        f = _sigmoid(gates[:, H:2 * H])
        o = _sigmoid(gates[:, 2 * H:3 * H])
        gt = np.tanh(gates[:, 3 * H:])
        tc = np.tanh(out[:, H:])
    else:
        i, f, o, gt, tc = acts
    gh, gc_out = g[:, :H], g[:, H:]
    dc = gc_out + gh * o * (1.0 - tc * tc)
    dgates = np.concatenate([
        dc * gt * i * (1.0 - i),          # input gate
        dc * c_prev * f * (1.0 - f),      # forget gate
        gh * tc * o * (1.0 - o),          # output gate
        dc * i * (1.0 - gt * gt),         # candidate
    ], axis=1)
    return [dgates, dc * f]


_BACKWARD = {
    "matmul": _b_matmul,
    "add": _b_add,
    "sub": _b_sub,
    "mul": _b_mul,
    "div": _b_div,
    "concat": _b_concat,
    "sigmoid": _b_sigmoid,
    "tanh": _b_tanh,
    "lrelu": _b_lrelu,
    "log": _b_log,
    "exp": _b_exp,
    "square": _b_square,
    "sqrt": _b_sqrt,
    "abs": _b_abs,
    "clamp": _b_clamp,
    "mean": _b_mean,
    "sum": _b_sum,
    "transpose": _b_transpose,
    "reshape": _b_reshape,
    "slice": _b_slice,
    "conv2d": _b_conv2d,
    "softmax": _b_softmax,
    "lstm_step": _b_lstm_step,
}


# ---------------------------------------------------------------------------
# the tape


class _Node:
    __slots__ = ("kind", "inputs", "attrs", "out", "param")

    def __init__(self, kind, inputs, attrs, out, param=None):
        self.kind = kind
        self.inputs = inputs
        self.attrs = attrs
        self.out = out
        self.param = param


class Tape:
    """Ordered record of executed ops.

    Nodes reference only earlier nodes, so construction order is a valid
    topological order and the backward sweep is a plain reverse loop.
    Tensors fed in without a prior registration become constant leaves;
    ``param()`` registers a trainable leaf whose gradient lands in
    ``Param.grad``.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._index: dict[int, int] = {}

    # -- leaves -------------------------------------------------------------

    def _add_leaf(self, t: Tensor, param) -> int:
        idx = len(self.nodes)
        self.nodes.append(_Node("leaf", (), {}, t, param))
        self._index[id(t)] = idx
        return idx

    def leaf(self, t) -> Tensor:
        """Register (or look up) a constant leaf."""
        if not isinstance(t, Tensor):
            t = Tensor(t)
        if id(t) not in self._index:
            self._add_leaf(t, None)
        return t

    def param(self, p: Param) -> Tensor:
        """Register (or look up) a trainable leaf bound to ``p``."""
        idx = self._index.get(id(p.value))
        if idx is None:
            self._add_leaf(p.value, p)
        return p.value

    # -- op application ------------------------------------------------------

    def apply(self, kind: str, inputs, attrs: dict | None = None) -> Tensor:
        """Run one op, record it, and return its output tensor."""
        kernel = _KERNELS.get(kind)
        if kernel is None:
            raise ValueError(f"unknown op kind {kind!r}")
        attrs = attrs or {}
        idxs = []
        vals = []
        for t in inputs:
            if not isinstance(t, Tensor):
                t = Tensor(t)
            i = self._index.get(id(t))
            if i is None:
                i = self._add_leaf(t, None)
            idxs.append(i)
            vals.append(self.nodes[i].out.data)
        out_data = kernel(vals, attrs)
        out = Tensor.__new__(Tensor)
        out.data = out_data
        idx = len(self.nodes)
        self.nodes.append(_Node(kind, tuple(idxs), attrs, out))
        self._index[id(out)] = idx
        return out

    # -- convenience wrappers ------------------------------------------------

    def matmul(self, a, b):
        return self.apply("matmul", [a, b])

    def add(self, a, b):
        return self.apply("add", [a, b])

    def sub(self, a, b):
        return self.apply("sub", [a, b])

    def mul(self, a, b):
        return self.apply("mul", [a, b])

    def div(self, a, b):
        return self.apply("div", [a, b])

    def concat(self, parts, axis: int):
        return self.apply("concat", list(parts), {"axis": axis})

    def sigmoid(self, x):
        return self.apply("sigmoid", [x])

    def tanh(self, x):
        return self.apply("tanh", [x])

    def lrelu(self, x, alpha: float = 0.2):
        return self.apply("lrelu", [x], {"alpha": alpha})

    def log(self, x):
        return self.apply("log", [x])

    def exp(self, x):
        return self.apply("exp", [x])

    def square(self, x):
        return self.apply("square", [x])

    def sqrt(self, x):
        return self.apply("sqrt", [x])

    def abs(self, x):
        return self.apply("abs", [x])

    def clamp(self, x, lo: float, hi: float):
        return self.apply("clamp", [x], {"lo": lo, "hi": hi})

    def mean(self, x, axis=None):
        return self.apply("mean", [x], {"axis": axis})

    def sum(self, x, axis=None):
        return self.apply("sum", [x], {"axis": axis})

    def transpose(self, x):
        return self.apply("transpose", [x])

    def reshape(self, x, shape):
        return self.apply("reshape", [x], {"shape": tuple(shape)})

    def slice(self, x, axis: int, start: int, stop: int):
        return self.apply("slice", [x], {"axis": axis, "start": start, "stop": stop})

    def conv2d(self, x, kernels):
        return self.apply("conv2d", [x, kernels])

    def softmax(self, x, axis: int):
        return self.apply("softmax", [x], {"axis": axis})

    def lstm_step(self, gates, c_prev, hidden: int):
        return self.apply("lstm_step", [gates, c_prev], {"hidden": hidden})

    # -- replay ---------------------------------------------------------------

    def replay(self) -> list[np.ndarray]:
        """Recompute every node from the leaves; returns the new values.

        Used to assert that recorded forwards are reproducible bit-for-bit.
        """
        values: list[np.ndarray] = []
        for node in self.nodes:
            if node.kind == "leaf":
                values.append(node.out.data)
            else:
                vals = [values[i] for i in node.inputs]
                values.append(_KERNELS[node.kind](vals, node.attrs))
        return values


def tensor_op(tape: Tape, kind: str, inputs, attrs: dict | None = None) -> Tensor:
    """Functional alias for ``Tape.apply``."""
    return tape.apply(kind, inputs, attrs)


# ---------------------------------------------------------------------------
# backward


def backward(tape: Tape, loss: Tensor, leaf_grads=None) -> dict[str, np.ndarray]:
    """Reverse sweep from ``loss``; accumulates into each ``Param.grad``.

    Returns this call's gradient contribution per parameter name.  Gradients
    add up across calls until ``zero_grad`` — two backward passes double
    them.  Non-parameter leaves are skipped unless passed in ``leaf_grads``,
    in which case their gradients appear under keys ``"leaf:<i>"``.
    """
    i_loss = tape._index.get(id(loss))
    if i_loss is None:
        raise ValueError("loss tensor was not produced on this tape")
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar-shaped, got shape {loss.data.shape}")
    if not np.isfinite(loss.data.reshape(-1)[0]):
        raise GradientError(f"backward: loss value is non-finite (op '{tape.nodes[i_loss].kind}')")

    adjoints: list = [None] * (i_loss + 1)
    adjoints[i_loss] = np.ones_like(loss.data)
    wanted = {id(t): f"leaf:{i}" for i, t in enumerate(leaf_grads or [])}
    result: dict[str, np.ndarray] = {}

    nodes = tape.nodes
    for i in range(i_loss, -1, -1):
        g = adjoints[i]
        if g is None:
            continue
        node = nodes[i]
        if node.kind == "leaf":
            if node.param is not None:
                node.param.grad.data += g
                name = node.param.name
                result[name] = result[name] + g if name in result else g
            key = wanted.get(id(node.out))
            if key is not None:
                result[key] = g
            continue
        vals = [nodes[j].out.data for j in node.inputs]
        grads = _BACKWARD[node.kind](g, vals, node.out.data, node.attrs)
        for j, gj in zip(node.inputs, grads):
            if gj is None:
                continue
            if not np.isfinite(gj.sum()):
                raise GradientError(f"backward: non-finite gradient produced by op '{node.kind}'")
            prev = adjoints[j]
            adjoints[j] = gj if prev is None else prev + gj
    return result


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckEntry:
    param: str
    index: int
    autodiff: float
    numeric: float
    rel_err: float


@dataclass
class GradCheckReport:
    """Outcome of comparing autodiff gradients to central differences."""

    max_rel_err: float
    passed: bool
    tol: float
    h: float
    per_param: dict[str, float] = field(default_factory=dict)
    worst: GradCheckEntry | None = None

    def __str__(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return f"GradCheckReport({verdict}, max_rel_err={self.max_rel_err:.3e}, tol={self.tol:g})"


def check_gradients(f, params, h: float = 1e-5, tol: float = 1e-6) -> GradCheckReport:
    """Compare autodiff gradients of ``f`` to central differences.

    ``f`` must be a deterministic zero-argument callable returning
    ``(tape, loss_tensor)`` built from the current parameter values.  The
    relative error per element is |ad - fd| / max(1, |ad|, |fd|), i.e.
    absolute below unit scale and relative above it.
    """
    zero_grads(params)
    tape, loss = f()
    backward(tape, loss)
    auto = {p.name: p.grad.data.copy() for p in params}

    max_err = 0.0
    worst = None
    per_param: dict[str, float] = {}
    for p in params:
        flat = p.value.data.reshape(-1)
        p_err = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = f()[1].item()
            flat[i] = orig - h
            f_minus = f()[1].item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            ad = auto[p.name].reshape(-1)[i]
            err = abs(ad - numeric) / max(1.0, abs(ad), abs(numeric))
            if err > p_err:
                p_err = err
            if err > max_err:
                max_err = err
                worst = GradCheckEntry(p.name, i, float(ad), float(numeric), float(err))
        per_param[p.name] = p_err
    zero_grads(params)
    return GradCheckReport(max_err, max_err <= tol, tol, h, per_param, worst)
