"""Minimal reverse-mode automatic differentiation over float64 numpy buffers.

Every operation optionally records itself on a Tape. backward() walks the
tape once in reverse creation order (which is already topological) and
accumulates gradients into the participating tensors. Evaluation-only
forward passes simply pass tape=None and skip all recording.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A float64 array plus an accumulated gradient slot.

    ``constant`` marks leaves (inputs, targets) whose gradient nobody
    reads; backward passes skip accumulating into them.
    """

    __slots__ = ("data", "grad", "_backward", "constant")

    def __init__(self, data, _backward=None, constant=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._backward = _backward
        self.constant = constant

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Tape:
    """Recorded operation graph for one forward pass; single backward use."""

    __slots__ = ("nodes", "used")

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.used = False

    def record(self, out: Tensor) -> Tensor:
        self.nodes.append(out)
        return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.constant:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def backward(tape: Tape, loss: Tensor) -> None:
    """Propagate d(loss)/d(node) through the tape.

    Gradients accumulate on every tensor touched by the recorded graph,
    parameters included; tensors never visited keep grad None.
    """
    if loss.data.shape != ():
        raise ValueError(
            f"backward needs a scalar loss, got shape {loss.data.shape}")
    if tape.used:
        raise RuntimeError("tape already consumed by a previous backward")
    tape.used = True
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(tape.nodes):
        if node.grad is not None and node._backward is not None:
            node._backward(node.grad)
        # break the closure cycles so dead graphs don't pile up for the GC
        node._backward = None
        node.grad = None
    tape.nodes.clear()


def _shape_guard(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(
            f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


def add(a: Tensor, b: Tensor, tape: Tape | None) -> Tensor:
    _shape_guard(a, b, "add")
    out = Tensor(a.data + b.data)
    if tape is not None:
        def back(g):
            _accumulate(a, g)
            _accumulate(b, g)
        out._backward = back
        tape.record(out)
    return out


def sub(a: Tensor, b: Tensor, tape: Tape | None) -> Tensor:
    _shape_guard(a, b, "sub")
    out = Tensor(a.data - b.data)
    if tape is not None:
        def back(g):
            _accumulate(a, g)
            _accumulate(b, -g)
        out._backward = back
        tape.record(out)
    return out


def mul(a: Tensor, b: Tensor, tape: Tape | None) -> Tensor:
    _shape_guard(a, b, "mul")
    out = Tensor(a.data * b.data)
    if tape is not None:
        def back(g):
            _accumulate(a, g * b.data)
            _accumulate(b, g * a.data)
        out._backward = back
        tape.record(out)
    return out


def scalar_mul(a: Tensor, k: float, tape: Tape | None) -> Tensor:
    out = Tensor(a.data * k)
    if tape is not None:
        def back(g):
            _accumulate(a, g * k)
        out._backward = back
        tape.record(out)
    return out


def tensor_exp(a: Tensor, tape: Tape | None) -> Tensor:
    out = Tensor(np.exp(a.data))
    if tape is not None:
        def back(g):
            _accumulate(a, g * out.data)
        out._backward = back
        tape.record(out)
    return out


def tensor_abs(a: Tensor, tape: Tape | None) -> Tensor:
    out = Tensor(np.abs(a.data))
    if tape is not None:
        sign = np.sign(a.data)

        def back(g):
            _accumulate(a, g * sign)
        out._backward = back
        tape.record(out)
    return out


def relu(a: Tensor, tape: Tape | None) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))
    if tape is not None:
        mask = a.data > 0.0

        def back(g):
            _accumulate(a, g * mask)
        out._backward = back
        tape.record(out)
    return out


def sum_all(a: Tensor, tape: Tape | None) -> Tensor:
    out = Tensor(a.data.sum())
    if tape is not None:
        def back(g):
            _accumulate(a, np.full(a.data.shape, float(g)))
        out._backward = back
        tape.record(out)
    return out


def mean_all(a: Tensor, tape: Tape | None) -> Tensor:
    n = a.data.size
    out = Tensor(a.data.mean())
    if tape is not None:
        def back(g):
            _accumulate(a, np.full(a.data.shape, float(g) / n))
        out._backward = back
        tape.record(out)
    return out


def linear(x: Tensor, w: Tensor, b: Tensor, tape: Tape | None) -> Tensor:
    """x (N, in) @ w (in, out) + b (out,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ValueError(
            f"linear: incompatible shapes x{x.data.shape} w{w.data.shape}")
    if b.data.shape != (w.data.shape[1],):
        raise ValueError(
            f"linear: bias shape {b.data.shape} vs out dim {w.data.shape[1]}")
    out = Tensor(x.data @ w.data + b.data)
    if tape is not None:
        def back(g):
            if not x.constant:
                _accumulate(x, g @ w.data.T)
            _accumulate(w, x.data.T @ g)
            _accumulate(b, g.sum(axis=0))
        out._backward = back
        tape.record(out)
    return out


def _im2col(xp: np.ndarray, stride: int, ho: int, wo: int) -> np.ndarray:
    n, c, _, _ = xp.shape
    cols = np.empty((c * 9, n * ho * wo))
    k = 0
    for di in range(3):
        for dj in range(3):
            sl = xp[:, :, di:di + stride * ho:stride, dj:dj + stride * wo:stride]
            cols[k * c:(k + 1) * c, :] = sl.transpose(1, 0, 2, 3).reshape(c, -1)
            k += 1
    return cols


def conv3x3(x: Tensor, w: Tensor, b: Tensor, stride: int,
            tape: Tape | None) -> Tensor:
    """3x3 convolution, padding 1, stride 1 or 2, via one GEMM."""
    if x.data.ndim != 4 or w.data.ndim != 4 or w.data.shape[2:] != (3, 3):
        raise ValueError(
            f"conv3x3: expected x (N,C,H,W) and w (F,C,3,3), got "
            f"x{x.data.shape} w{w.data.shape}")
    n, c, h, wdt = x.data.shape
    f, cw = w.data.shape[0], w.data.shape[1]
    if cw != c:
        raise ValueError(
            f"conv3x3: channel mismatch x{x.data.shape} vs w{w.data.shape}")
    if b.data.shape != (f,):
        raise ValueError(f"conv3x3: bias shape {b.data.shape}, want ({f},)")
    if stride not in (1, 2):
        raise ValueError(f"conv3x3: stride must be 1 or 2, got {stride}")
    ho, wo = h // stride, wdt // stride
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = _im2col(xp, stride, ho, wo)
    flat = w.data.reshape(f, c * 9) @ cols + b.data[:, None]
    out = Tensor(flat.reshape(f, n, ho, wo).transpose(1, 0, 2, 3))
    if tape is not None:
        def back(g):
            go = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(f, -1)
            _accumulate(w, (go @ cols.T).reshape(w.data.shape))
            _accumulate(b, go.sum(axis=1))
            if x.constant:
                return
            dcols = w.data.reshape(f, c * 9).T @ go
            dxp = np.zeros((n, c, h + 2, wdt + 2))
            k = 0
            for di in range(3):
                for dj in range(3):
                    view = dxp[:, :, di:di + stride * ho:stride,
                               dj:dj + stride * wo:stride]
                    view += dcols[k * c:(k + 1) * c].reshape(
                        c, n, ho, wo).transpose(1, 0, 2, 3)
                    k += 1
            _accumulate(x, dxp[:, :, 1:-1, 1:-1])
        out._backward = back
        tape.record(out)
    return out


def flatten(x: Tensor, tape: Tape | None) -> Tensor:
    n = x.data.shape[0]
    out = Tensor(x.data.reshape(n, -1))
    if tape is not None:
        def back(g):
            _accumulate(x, g.reshape(x.data.shape))
        out._backward = back
        tape.record(out)
    return out


def concat(parts: list[Tensor], tape: Tape | None) -> Tensor:
    """Concatenate along axis 1."""
    if any(p.data.shape[0] != parts[0].data.shape[0] for p in parts):
        raise ValueError(
            "concat: row counts differ: "
            + ", ".join(str(p.data.shape) for p in parts))
    out = Tensor(np.concatenate([p.data for p in parts], axis=1))
    if tape is not None:
        widths = [p.data.shape[1] for p in parts]

        def back(g):
            at = 0
            for p, wd in zip(parts, widths):
                _accumulate(p, g[:, at:at + wd])
                at += wd
        out._backward = back
        tape.record(out)
    return out


def dropout(x: Tensor, p: float, rng: np.random.Generator | None,
            train: bool, tape: Tape | None) -> Tensor:
    """Inverted dropout; identity (the same tensor) in eval mode."""
    if not train or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs a seeded generator")
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    out = Tensor(x.data * mask)
    if tape is not None:
        def back(g):
            _accumulate(x, g * mask)
        out._backward = back
        tape.record(out)
    return out


def take_rows(x: Tensor, idx: np.ndarray, tape: Tape | None) -> Tensor:
    out = Tensor(x.data[idx])
    if tape is not None:
        def back(g):
            if x.constant:
                return
            if x.grad is None:
                x.grad = np.zeros(x.data.shape)
            np.add.at(x.grad, idx, g)
        out._backward = back
        tape.record(out)
    return out


def slice_cols(x: Tensor, start: int, stop: int, tape: Tape | None) -> Tensor:
    out = Tensor(x.data[:, start:stop])
    if tape is not None:
        def back(g):
            full = np.zeros(x.data.shape)
            full[:, start:stop] = g
            _accumulate(x, full)
        out._backward = back
        tape.record(out)
    return out
