"""A small tape-based reverse-mode autodiff engine over 2-D float64 arrays.

Operations executed while a :class:`Tape` is active (``with Tape() as
tape:``) and touching at least one ``requires_grad`` tensor are recorded
with their adjoint rule. :meth:`Tape.backward` replays the record in
reverse and accumulates gradients into the leaf tensors' ``grad``.

The op set is exactly what the models need: ``matmul``, ``spmm``,
``add``, ``add_bias``, ``relu``, ``concat_cols``, ``dropout``,
``log_softmax``, ``sum``, and the ``nll_loss`` / ``mse_loss`` reductions.
"""

from __future__ import annotations

import contextvars
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .graph import SparseMatrix


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    """Dense 2-D float64 array, optionally tracked for gradients."""

    __slots__ = ("value", "requires_grad", "grad", "_is_leaf", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        arr = np.array(value, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.value = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._is_leaf = True
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass
class _Op:
    output: Tensor
    inputs: tuple[Tensor, ...]
    adjoint: Callable[[np.ndarray], Sequence[np.ndarray | None]]


_ACTIVE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("topoaug_tape", default=None)


class Tape:
    """Ordered record of executed operations.

    Every recorded op's inputs were created before it, so reversing the
    record is a valid topological order for the adjoint sweep.
    """

    def __init__(self):
        self.ops: list[_Op] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.ops)

    def record(self, output: Tensor, inputs: tuple[Tensor, ...], adjoint) -> None:
        self.ops.append(_Op(output, inputs, adjoint))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``; consumes the tape."""
        if loss.shape != (1, 1):
            raise ShapeError(f"backward needs a scalar (1x1) loss, got shape {loss.shape}")
        adj: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
        leaves: dict[int, Tensor] = {}
        if loss._is_leaf and loss.requires_grad:
            leaves[id(loss)] = loss
        for op in reversed(self.ops):
            g_out = adj.pop(id(op.output), None)
            if g_out is None:
                continue
            grads = op.adjoint(g_out)
            for t, g in zip(op.inputs, grads):
                if g is None or not t.requires_grad:
                    continue
                key = id(t)
                adj[key] = adj[key] + g if key in adj else g
                if t._is_leaf:
                    leaves[key] = t
        for key, t in leaves.items():
            g = adj.get(key)
            if g is None:
                continue
            t.grad = g.copy() if t.grad is None else t.grad + g
        self.ops.clear()


def backward(loss: Tensor, tape: Tape) -> None:
    tape.backward(loss)


def _result(value: np.ndarray, inputs: tuple[Tensor, ...], adjoint) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.value = value
    out.grad = None
    out.name = None
    out.requires_grad = any(t.requires_grad for t in inputs)
    out._is_leaf = not out.requires_grad
    tape = _ACTIVE.get()
    if out.requires_grad and tape is not None:
        tape.record(out, inputs, adjoint)
    return out


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} are incompatible")
    av, bv = a.value, b.value
    return _result(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def spmm(s: SparseMatrix, d: Tensor) -> Tensor:
    """Sparse (constant) times dense; only ``d`` receives a gradient."""
    if s.shape[1] != d.shape[0]:
        raise ShapeError(f"spmm shapes {s.shape} and {d.shape} are incompatible")
    csr = s.csr
    return _result(np.asarray(csr @ d.value), (d,), lambda g: (np.asarray(csr.T @ g),))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add shapes {a.shape} and {b.shape} differ")
    return _result(a.value + b.value, (a, b), lambda g: (g, g))


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a ``1 x c`` row vector to every row of ``x``."""
    if bias.shape != (1, x.shape[1]):
        raise ShapeError(f"bias shape {bias.shape} does not match (1, {x.shape[1]}) for input {x.shape}")
    return _result(x.value + bias.value, (x, bias), lambda g: (g, g.sum(axis=0, keepdims=True)))


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0
    return _result(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,))


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols row counts differ: {a.shape} and {b.shape}")
    k = a.shape[1]
    return _result(np.concatenate([a.value, b.value], axis=1), (a, b), lambda g: (g[:, :k], g[:, k:]))


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: zero entries with probability ``p``, scale survivors by ``1/(1-p)``."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an explicit rng")
    scale = (rng.random(x.shape) >= p) / (1.0 - p)
    return _result(x.value * scale, (x,), lambda g: (g * scale,))


def log_softmax(x: Tensor) -> Tensor:
    """Row-wise log-softmax."""
    shifted = x.value - x.value.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    soft = np.exp(out)
    return _result(out, (x,), lambda g: (g - soft * g.sum(axis=1, keepdims=True),))


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = x.shape
    return _result(np.array([[x.value.sum()]]), (x,), lambda g: (np.full(shape, g[0, 0]),))


def scale(x: Tensor, c: float) -> Tensor:
    return _result(x.value * c, (x,), lambda g: (g * c,))


def _mask_index(mask, n: int) -> np.ndarray:
    idx = np.asarray(mask)
    if idx.dtype == bool:
        if idx.shape != (n,):
            raise ShapeError(f"boolean mask must have shape ({n},), got {idx.shape}")
        idx = np.flatnonzero(idx)
    idx = idx.astype(np.int64).ravel()
    if idx.size == 0:
        raise ValueError("mask selects no rows")
    return idx


def nll_loss(log_probs: Tensor, targets, mask) -> Tensor:
    """Mean of ``-log_probs[i, targets[i]]`` over rows ``i`` in ``mask``."""
    n, c = log_probs.shape
    idx = _mask_index(mask, n)
    y = np.asarray(targets, dtype=np.int64).ravel()
    if y.shape[0] != n:
        raise ShapeError(f"targets has {y.shape[0]} entries for {n} rows")
    ty = y[idx]
    if ty.min() < 0 or ty.max() >= c:
        raise ShapeError(f"target index out of range for {c} classes")
    loss = -log_probs.value[idx, ty].mean()

    def adjoint(g):
        grad = np.zeros((n, c))
        np.add.at(grad, (idx, ty), -g[0, 0] / len(idx))
        return (grad,)

    return _result(np.array([[loss]]), (log_probs,), adjoint)


def mse_loss(pred: Tensor, targets, mask) -> Tensor:
    """Mean squared residual over masked rows (averaged over columns too)."""
    n = pred.shape[0]
    idx = _mask_index(mask, n)
    t = np.asarray(targets, dtype=np.float64).reshape(n, -1)
    if t.shape != pred.shape:
        raise ShapeError(f"targets shape {t.shape} does not match predictions {pred.shape}")
    resid = pred.value[idx] - t[idx]
    count = resid.size

    def adjoint(g):
        grad = np.zeros(pred.shape)
        grad[idx] = 2.0 * g[0, 0] * resid / count
        return (grad,)

    return _result(np.array([[np.mean(resid**2)]]), (pred,), adjoint)


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    params: list[Tensor]
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.m:
            self.m = [np.zeros_like(p.value) for p in self.params]
            self.v = [np.zeros_like(p.value) for p in self.params]
        for p, m, v in zip(self.params, self.m, self.v):
            if m.shape != p.shape or v.shape != p.shape:
                raise ShapeError(f"moment buffers {m.shape}/{v.shape} do not match parameter {p.shape}")


def adam_step(state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update; parameters without a gradient are skipped."""
    state.step += 1
    b1, b2 = state.betas
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for i, p in enumerate(state.params):
        if p.grad is None:
            continue
        g = p.grad
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.value = p.value - lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass(frozen=True)
class CosineSchedule:
    base_lr: float
    total_steps: int

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be >= 1, got {self.total_steps}")


def cosine_lr(sched: CosineSchedule, step: int) -> float:
    """``base_lr * (1 + cos(pi * step / total_steps)) / 2``, clamped at the end."""
    step = min(max(step, 0), sched.total_steps)
    return sched.base_lr * (1.0 + math.cos(math.pi * step / sched.total_steps)) / 2.0


# ---------------------------------------------------------------------------
# Finite-difference checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e < self.tolerance for e in self.max_rel_error.values())

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)


def gradient_check(
    forward: Callable[[], Tensor],
    params: Iterable[Tensor],
    tolerance: float = 1e-4,
    step: float = 1e-5,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare tape gradients with central finite differences.

    ``forward`` must be deterministic and return a scalar tensor. Tensors
    with ``requires_grad=False`` are excluded. The element-wise relative
    error is ``|a - n| / max(|a|, |n|, floor)``; the floor keeps
    near-zero gradients from dominating through round-off.
    """
    params = [p for p in params if p.requires_grad]
    for p in params:
        p.value = np.ascontiguousarray(p.value)
        p.zero_grad()
    with Tape() as tape:
        loss = forward()
    tape.backward(loss)
    analytic = [np.zeros_like(p.value) if p.grad is None else p.grad.copy() for p in params]

    errors: dict[str, float] = {}
    for k, (p, a) in enumerate(zip(params, analytic)):
        numeric = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = forward().item()
            flat[i] = orig - step
            f_minus = forward().item()
            flat[i] = orig
            numeric.reshape(-1)[i] = (f_plus - f_minus) / (2.0 * step)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), floor)
        name = p.name or f"param{k}"
        if name in errors:
            name = f"{name}#{k}"
        errors[name] = float(np.max(np.abs(a - numeric) / denom)) if a.size else 0.0
        p.zero_grad()
    return GradCheckReport(errors, tolerance)
