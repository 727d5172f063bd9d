"""Minimal reverse-mode autodiff over channel x time matrices.

The op set is exactly what the dance model needs: causal dilated 1-D
convolution, 1x1 convolution, tanh/sigmoid/relu, elementwise arithmetic,
channel/frame slicing, limb-edge lengths, and mean-absolute-error losses.
Every op is a pure function of its inputs; graphs are built eagerly and
differentiated by :func:`backward`.

Determinism contract: the value of output column t never depends on how
many columns sit to its right. Elementwise ufuncs satisfy this on their
own; matrix products do not (BLAS picks different kernels for skinny
matrices), so every forward GEMM runs over fixed-width column blocks,
zero-padding the tail block. This is what makes prefix re-evaluation
bit-identical to a full-sequence pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import DimensionError, GraphError, NumericError

# Fixed GEMM column width; changing it changes low-order output bits.
_GEMM_BLOCK = 64

_DTYPES = (np.float32, np.float64)


def _blocked_matmul(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``a @ x`` computed in fixed-width column blocks of ``x``."""
    rows = a.shape[0]
    cols = x.shape[1]
    out = np.empty((rows, cols), dtype=x.dtype)
    for j0 in range(0, cols, _GEMM_BLOCK):
        j1 = min(j0 + _GEMM_BLOCK, cols)
        if j1 - j0 == _GEMM_BLOCK:
            np.matmul(a, x[:, j0:j1], out=out[:, j0:j1])
        else:
            pad = np.zeros((x.shape[0], _GEMM_BLOCK), dtype=x.dtype)
            pad[:, : j1 - j0] = x[:, j0:j1]
            out[:, j0:j1] = np.matmul(a, pad)[:, : j1 - j0]
    return out


class Tensor2D:
    """A channels x frames value and, when produced by an op, a graph node.

    ``data`` is float32 by default; float64 is accepted for the shadow
    mode used by gradient checking. Leaf tensors (inputs, constants) have
    no parents and no vjp.
    """

    __slots__ = ("data", "_parents", "_vjp")

    def __init__(self, data, _parents=(), _vjp=None):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise DimensionError(f"Tensor2D is 2-D, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise DimensionError(f"Tensor2D needs positive extents, got {arr.shape}")
        if arr.dtype not in _DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self._parents = _parents
        self._vjp = _vjp

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() on non-scalar tensor {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor2D({self.channels}x{self.frames}, {self.data.dtype})"


class Param:
    """A named trainable array of any shape (graph leaf)."""

    __slots__ = ("name", "data")

    def __init__(self, name: str, data):
        arr = np.asarray(data)
        if arr.dtype not in _DTYPES:
            arr = arr.astype(np.float32)
        self.name = name
        self.data = arr

    def astype(self, dtype) -> "Param":
        return Param(self.name, self.data.astype(dtype))

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.data.shape})"


@dataclass(frozen=True)
class ConvSpec:
    """Shape contract of one causal convolution."""

    in_channels: int
    out_channels: int
    kernel_size: int = 3
    dilation: int = 1
    has_bias: bool = True

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise DimensionError("channel counts must be positive")
        if self.kernel_size not in (1, 3):
            raise DimensionError(f"kernel_size must be 1 or 3, got {self.kernel_size}")
        if self.dilation < 1:
            raise DimensionError(f"dilation must be positive, got {self.dilation}")
        if self.kernel_size == 1 and self.dilation != 1:
            raise DimensionError("kernel_size 1 requires dilation 1")
        if not self.has_bias:
            raise DimensionError("convolutions always carry a bias here")

    @property
    def left_pad(self) -> int:
        return (self.kernel_size - 1) * self.dilation


def init_bound(in_channels: int, kernel_size: int) -> float:
    """Half-width of the uniform init interval for conv weights and biases."""
    return float(np.sqrt(1.0 / (in_channels * kernel_size)))


def _as_value(x) -> np.ndarray:
    if isinstance(x, (Tensor2D, Param)):
        return x.data
    return np.asarray(x)


def _require_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values in {name}")


def _shifted(x: np.ndarray, shift: int) -> np.ndarray:
    """x delayed by ``shift`` frames, zero-filled on the left."""
    if shift == 0:
        return x
    out = np.zeros_like(x)
    if shift < x.shape[1]:
        out[:, shift:] = x[:, : x.shape[1] - shift]
    return out


def conv1d_causal(x: Tensor2D, spec: ConvSpec, weights, bias) -> Tensor2D:
    """Causal dilated 1-D convolution.

    Output column t reads input columns t, t-d, ..., t-(k-1)d only;
    missing history is zero. ``weights`` is (out, in, kernel) with tap 0
    multiplying the oldest frame; ``bias`` is (out,). Both may be Params
    (tracked) or plain arrays (constants).
    """
    w = _as_value(weights)
    b = _as_value(bias)
    if x.channels != spec.in_channels:
        raise DimensionError(
            f"input has {x.channels} channels, spec expects {spec.in_channels}")
    if w.shape != (spec.out_channels, spec.in_channels, spec.kernel_size):
        raise DimensionError(
            f"weight shape {w.shape} != "
            f"{(spec.out_channels, spec.in_channels, spec.kernel_size)}")
    if b.shape != (spec.out_channels,):
        raise DimensionError(f"bias shape {b.shape} != {(spec.out_channels,)}")
    _require_finite("conv input", x.data)

    w = w.astype(x.dtype, copy=False)
    b = b.astype(x.dtype, copy=False)
    k, d = spec.kernel_size, spec.dilation
    xv = x.data
    out = np.tile(b[:, None], (1, x.frames))
    for tap in range(k):
        shift = (k - 1 - tap) * d
        out += _blocked_matmul(w[:, :, tap], _shifted(xv, shift))

    parents = [x]
    if isinstance(weights, Param):
        parents.append(weights)
    if isinstance(bias, Param):
        parents.append(bias)

    def vjp(g):
        grads = []
        dx = np.zeros_like(xv)
        for tap in range(k):
            shift = (k - 1 - tap) * d
            back = w[:, :, tap].T @ g
            if shift == 0:
                dx += back
            elif shift < xv.shape[1]:
                dx[:, : xv.shape[1] - shift] += back[:, shift:]
        grads.append(dx)
        if isinstance(weights, Param):
            dw = np.empty_like(w)
            for tap in range(k):
                shift = (k - 1 - tap) * d
                dw[:, :, tap] = g @ _shifted(xv, shift).T
            grads.append(dw)
        if isinstance(bias, Param):
            grads.append(g.sum(axis=1))
        return grads

    return Tensor2D(out, tuple(parents), vjp)


def pointwise_affine(x: Tensor2D, weights, bias) -> Tensor2D:
    """Per-frame linear map (1x1 convolution): out[:, t] = W @ x[:, t] + b."""
    w = _as_value(weights)
    b = _as_value(bias)
    if w.ndim != 2 or w.shape[1] != x.channels:
        raise DimensionError(f"weight shape {w.shape} incompatible with {x.channels} channels")
    if b.shape != (w.shape[0],):
        raise DimensionError(f"bias shape {b.shape} != {(w.shape[0],)}")
    _require_finite("pointwise input", x.data)

    w = w.astype(x.dtype, copy=False)
    b = b.astype(x.dtype, copy=False)
    out = _blocked_matmul(w, x.data) + b[:, None]

    parents = [x]
    if isinstance(weights, Param):
        parents.append(weights)
    if isinstance(bias, Param):
        parents.append(bias)

    def vjp(g):
        grads = [w.T @ g]
        if isinstance(weights, Param):
            grads.append(g @ x.data.T)
        if isinstance(bias, Param):
            grads.append(g.sum(axis=1))
        return grads

    return Tensor2D(out, tuple(parents), vjp)


def activate(x: Tensor2D, kind: str) -> Tensor2D:
    """Elementwise tanh, sigmoid, or relu."""
    if kind == "tanh":
        y = np.tanh(x.data)
        return Tensor2D(y, (x,), lambda g, y=y: [g * (1.0 - y * y)])
    if kind == "sigmoid":
        y = expit(x.data)
        return Tensor2D(y, (x,), lambda g, y=y: [g * y * (1.0 - y)])
    if kind == "relu":
        y = np.maximum(x.data, 0)
        mask = x.data > 0  # derivative 0 at the kink
        return Tensor2D(y, (x,), lambda g, mask=mask: [g * mask])
    raise ValueError(f"unknown activation {kind!r}")


def tanh(x: Tensor2D) -> Tensor2D:
    return activate(x, "tanh")


def sigmoid(x: Tensor2D) -> Tensor2D:
    return activate(x, "sigmoid")


def relu(x: Tensor2D) -> Tensor2D:
    return activate(x, "relu")


def _check_same_shape(a: Tensor2D, b: Tensor2D) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"shape mismatch {a.data.shape} vs {b.data.shape}")


def add(a: Tensor2D, b: Tensor2D) -> Tensor2D:
    _check_same_shape(a, b)
    return Tensor2D(a.data + b.data, (a, b), lambda g: [g, g])


def sub(a: Tensor2D, b: Tensor2D) -> Tensor2D:
    _check_same_shape(a, b)
    return Tensor2D(a.data - b.data, (a, b), lambda g: [g, -g])


def mul(a: Tensor2D, b: Tensor2D) -> Tensor2D:
    _check_same_shape(a, b)
    return Tensor2D(a.data * b.data, (a, b), lambda g: [g * b.data, g * a.data])


def affine(x: Tensor2D, scale: float, offset: float = 0.0) -> Tensor2D:
    """scale * x + offset with python-float constants."""
    out = x.data * x.dtype.type(scale) + x.dtype.type(offset)
    return Tensor2D(out, (x,), lambda g: [g * x.dtype.type(scale)])


def slice_channels(x: Tensor2D, start: int, stop: int) -> Tensor2D:
    if not (0 <= start < stop <= x.channels):
        raise DimensionError(f"channel slice [{start}:{stop}] outside 0..{x.channels}")

    def vjp(g):
        dx = np.zeros_like(x.data)
        dx[start:stop] = g
        return [dx]

    return Tensor2D(x.data[start:stop].copy(), (x,), vjp)


def slice_frames(x: Tensor2D, start: int, stop: int) -> Tensor2D:
    if not (0 <= start < stop <= x.frames):
        raise DimensionError(f"frame slice [{start}:{stop}] outside 0..{x.frames}")

    def vjp(g):
        dx = np.zeros_like(x.data)
        dx[:, start:stop] = g
        return [dx]

    return Tensor2D(x.data[:, start:stop].copy(), (x,), vjp)


def edge_lengths(coords: Tensor2D, edges) -> Tensor2D:
    """Per-frame Euclidean length of each skeleton edge.

    ``coords`` is 2*J x T, interleaved as x0,y0,...; ``edges`` is a list of
    (joint_a, joint_b) index pairs. Output is len(edges) x T. The gradient
    of a zero-length edge is defined as 0 (same subgradient convention as
    the L1 loss at a tie).
    """
    if coords.channels % 2 != 0:
        raise DimensionError("coords must interleave x,y per joint")
    n_joints = coords.channels // 2
    ai = np.asarray([e[0] for e in edges], dtype=np.intp)
    bi = np.asarray([e[1] for e in edges], dtype=np.intp)
    if ai.size and (ai.max() >= n_joints or bi.max() >= n_joints):
        raise DimensionError("edge index outside joint range")

    pts = coords.data.reshape(n_joints, 2, coords.frames)
    diff = pts[ai] - pts[bi]  # (E, 2, T)
    lengths = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2)

    def vjp(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(lengths[:, None, :] > 0, diff / lengths[:, None, :], 0.0)
        contrib = g[:, None, :] * unit
        dpts = np.zeros_like(pts)
        np.add.at(dpts, ai, contrib)
        np.add.at(dpts, bi, -contrib)
        return [dpts.reshape(coords.channels, coords.frames)]

    return Tensor2D(lengths, (coords,), vjp)


def l1_loss(pred: Tensor2D, target) -> Tensor2D:
    """Mean absolute difference as a 1x1 tensor.

    The subgradient at pred == target is 0. ``target`` may be a Tensor2D
    (gradient flows into it too) or a plain array (constant).
    """
    tgt = target if isinstance(target, Tensor2D) else Tensor2D(np.asarray(target, dtype=pred.dtype))
    _check_same_shape(pred, tgt)
    diff = pred.data - tgt.data
    loss = np.abs(diff).mean(dtype=pred.dtype)
    n = pred.dtype.type(diff.size)
    parents = (pred, tgt) if isinstance(target, Tensor2D) else (pred,)

    def vjp(g):
        d = g * np.sign(diff) / n
        return [d, -d] if isinstance(target, Tensor2D) else [d]

    return Tensor2D(np.asarray(loss, dtype=pred.dtype).reshape(1, 1), parents, vjp)


Gradients = dict  # parameter name -> array of the parameter's shape


def backward(loss: Tensor2D) -> Gradients:
    """Reverse-mode gradients of a scalar loss w.r.t. every reachable Param.

    Accumulation order is fixed by graph construction order, so repeated
    runs on identical inputs are bit-identical.
    """
    if not isinstance(loss, Tensor2D) or loss.data.size != 1:
        raise GraphError("backward() expects a scalar (1x1) Tensor2D loss")
    if loss._vjp is None:
        raise GraphError("loss is not the output of a registered op")
    _require_finite("loss", loss.data)

    order: list[Tensor2D] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor2D, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if isinstance(parent, Tensor2D) and id(parent) not in seen:
                stack.append((parent, False))

    # Out-of-place accumulation: vjps may hand back their input gradient
    # unchanged (add/sub), so stored arrays are never mutated.
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1), dtype=loss.dtype)}
    param_grads: Gradients = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None or node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if isinstance(parent, Param):
                cur = param_grads.get(parent.name)
                param_grads[parent.name] = pg if cur is None else cur + pg
            else:
                cur = grads.get(id(parent))
                grads[id(parent)] = pg if cur is None else cur + pg
    return param_grads
