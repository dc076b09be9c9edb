"""Single-layer LSTM with a scalar linear head, written directly in numpy.

Gate order is fixed everywhere (stacked weights, biases, gradients,
checkpoints): input, forget, candidate, output. One step computes

    i = sigmoid(W_x[i] x + W_h[i] h + b[i])
    f = sigmoid(W_x[f] x + W_h[f] h + b[f])
    g = tanh   (W_x[g] x + W_h[g] h + b[g])
    o = sigmoid(W_x[o] x + W_h[o] h + b[o])
    c' = f * c + i * g
    h' = o * tanh(c')
    prediction = v . h' + c_out

Everything runs in float64 so analytic gradients can be checked against
central finite differences at tight tolerance. Training uses truncated
backpropagation through time: hidden and cell state are carried across
windows, gradients are not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INPUT_DIM = 8


class NumericsError(RuntimeError):
    """Non-finite value produced by a forward or backward pass."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form is overflow-safe for large |x|
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


@dataclass
class LstmParams:
    """Learnable weights. The 4 gate blocks are stacked along the first axis
    in (i, f, g, o) order: w_x is (4H, D), w_h is (4H, H), b is (4H,)."""

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray
    v: np.ndarray
    c_out: float

    @property
    def hidden_dim(self) -> int:
        return self.w_h.shape[1]

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[1]

    def copy(self) -> "LstmParams":
        return LstmParams(
            w_x=self.w_x.copy(),
            w_h=self.w_h.copy(),
            b=self.b.copy(),
            v=self.v.copy(),
            c_out=self.c_out,
        )

    def tensors(self) -> tuple[np.ndarray, ...]:
        """The array-valued fields, in checkpoint order (c_out excluded)."""
        return (self.w_x, self.w_h, self.b, self.v)


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "LstmState":
        return cls(h=np.zeros(hidden_dim), c=np.zeros(hidden_dim))

    def copy(self) -> "LstmState":
        return LstmState(h=self.h.copy(), c=self.c.copy())


@dataclass
class Gradients:
    """Loss gradients, shaped exactly like :class:`LstmParams`."""

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray
    v: np.ndarray
    c_out: float

    def tensors(self) -> tuple[np.ndarray, ...]:
        return (self.w_x, self.w_h, self.b, self.v)

    @classmethod
    def zeros_like(cls, params: LstmParams) -> "Gradients":
        return cls(
            w_x=np.zeros_like(params.w_x),
            w_h=np.zeros_like(params.w_h),
            b=np.zeros_like(params.b),
            v=np.zeros_like(params.v),
            c_out=0.0,
        )


def init_params(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmParams:
    """Uniform(-s, s) weights with s = 1/sqrt(hidden_dim); forget bias 1 so
    the cell state survives early training, all other biases 0."""
    s = 1.0 / np.sqrt(hidden_dim)
    b = np.zeros(4 * hidden_dim)
    b[hidden_dim : 2 * hidden_dim] = 1.0
    return LstmParams(
        w_x=rng.uniform(-s, s, size=(4 * hidden_dim, input_dim)),
        w_h=rng.uniform(-s, s, size=(4 * hidden_dim, hidden_dim)),
        b=b,
        v=rng.uniform(-s, s, size=hidden_dim),
        c_out=0.0,
    )


def cell_forward(
    params: LstmParams, state: LstmState, x: np.ndarray
) -> tuple[LstmState, float, dict]:
    """One step. Returns the new state, the scalar prediction and a cache of
    intermediates for the backward pass."""
    hd = params.hidden_dim
    if x.shape != (params.input_dim,):
        raise ValueError(f"input shape {x.shape}, expected ({params.input_dim},)")
    if state.h.shape != (hd,) or state.c.shape != (hd,):
        raise ValueError("state dimensions do not match the parameters")
    z = params.w_x @ x + params.w_h @ state.h + params.b
    a = np.empty_like(z)
    a[: 2 * hd] = sigmoid(z[: 2 * hd])
    a[2 * hd : 3 * hd] = np.tanh(z[2 * hd : 3 * hd])
    a[3 * hd :] = sigmoid(z[3 * hd :])
    i, f, g, o = a[:hd], a[hd : 2 * hd], a[2 * hd : 3 * hd], a[3 * hd :]
    c_new = f * state.c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    pred = float(params.v @ h_new + params.c_out)
    if not np.isfinite(pred):
        raise NumericsError("non-finite prediction in cell_forward")
    cache = {"x": x, "h_prev": state.h, "c_prev": state.c, "a": a, "c": c_new, "tc": tc}
    return LstmState(h=h_new, c=c_new), pred, cache


def sequence_forward(
    params: LstmParams,
    rows: np.ndarray,
    initial_state: LstmState | None = None,
    collect_cache: bool = True,
) -> tuple[np.ndarray, dict | None, LstmState]:
    """Run a whole window of shape (T, input_dim), threading the state.

    The default zero initial state is the per-session contract; the training
    loop passes the carried state between windows of one session. Returns
    one prediction per row, the backward cache (None when not collected, for
    cheap inference) and the final state.
    """
    T = rows.shape[0]
    hd = params.hidden_dim
    if rows.ndim != 2 or rows.shape[1] != params.input_dim:
        raise ValueError(f"rows shape {rows.shape}, expected (T, {params.input_dim})")
    state = LstmState.zeros(hd) if initial_state is None else initial_state
    h, c = state.h, state.c

    zx = rows @ params.w_x.T + params.b  # (T, 4H), input contribution hoisted
    w_h = params.w_h
    acts = np.empty((T, 4 * hd)) if collect_cache else None
    cs = np.empty((T, hd)) if collect_cache else None
    tcs = np.empty((T, hd)) if collect_cache else None
    hs = np.empty((T, hd))
    h_prev0 = h.copy()
    c_prev0 = c.copy()

    for t in range(T):
        z = zx[t] + w_h @ h
        a = np.empty_like(z)
        a[: 2 * hd] = sigmoid(z[: 2 * hd])
        a[2 * hd : 3 * hd] = np.tanh(z[2 * hd : 3 * hd])
        a[3 * hd :] = sigmoid(z[3 * hd :])
        c = a[hd : 2 * hd] * c + a[:hd] * a[2 * hd : 3 * hd]
        tc = np.tanh(c)
        h = a[3 * hd :] * tc
        hs[t] = h
        if collect_cache:
            acts[t] = a
            cs[t] = c
            tcs[t] = tc

    predictions = hs @ params.v + params.c_out
    if not np.isfinite(predictions).all():
        raise NumericsError("non-finite predictions in sequence_forward")
    cache = None
    if collect_cache:
        cache = {
            "rows": rows,
            "acts": acts,
            "cs": cs,
            "tcs": tcs,
            "hs": hs,
            "h_prev0": h_prev0,
            "c_prev0": c_prev0,
        }
    return predictions, cache, LstmState(h=h.copy(), c=c.copy())


def masked_loss(predictions: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over the masked-in steps; 0.0 when none are in."""
    n = int(mask.sum())
    if n == 0:
        return 0.0
    diff = (predictions - targets)[mask]
    return float(diff @ diff / n)


def sequence_backward(
    params: LstmParams,
    cache: dict,
    predictions: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray,
) -> tuple[Gradients, float]:
    """Exact gradients of the masked mean squared error over one window.

    Gradients flow through every step of the window but stop at its initial
    state, which truncated training treats as a constant. A window with no
    masked-in step yields zero loss and zero gradients.
    """
    hd = params.hidden_dim
    T = predictions.shape[0]
    loss = masked_loss(predictions, targets, mask)
    n_masked = int(mask.sum())
    if n_masked == 0:
        return Gradients.zeros_like(params), 0.0

    dy = np.where(mask, 2.0 * (predictions - targets) / n_masked, 0.0)

    rows = cache["rows"]
    acts = cache["acts"]
    cs = cache["cs"]
    tcs = cache["tcs"]
    hs = cache["hs"]

    dz_all = np.empty((T, 4 * hd))
    dh = np.zeros(hd)
    dc = np.zeros(hd)
    v = params.v
    w_h_T = params.w_h.T

    for t in range(T - 1, -1, -1):
        a = acts[t]
        i, f, g, o = a[:hd], a[hd : 2 * hd], a[2 * hd : 3 * hd], a[3 * hd :]
        tc = tcs[t]
        c_prev = cs[t - 1] if t > 0 else cache["c_prev0"]

        dh = dh + dy[t] * v
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i

        dz = dz_all[t]
        dz[:hd] = di * i * (1.0 - i)
        dz[hd : 2 * hd] = df * f * (1.0 - f)
        dz[2 * hd : 3 * hd] = dg * (1.0 - g * g)
        dz[3 * hd :] = do * o * (1.0 - o)

        dh = w_h_T @ dz
        dc = dc * f

    h_prev = np.vstack([cache["h_prev0"][None, :], hs[:-1]])
    grads = Gradients(
        w_x=dz_all.T @ rows,
        w_h=dz_all.T @ h_prev,
        b=dz_all.sum(axis=0),
        v=dy @ hs,
        c_out=float(dy.sum()),
    )
    for tensor in grads.tensors():
        if not np.isfinite(tensor).all():
            raise NumericsError("non-finite gradient in sequence_backward")
    if not np.isfinite(grads.c_out):
        raise NumericsError("non-finite gradient in sequence_backward")
    return grads, loss


def truncated_windows(n_rows: int, window: int) -> list[tuple[int, int]]:
    """Contiguous non-overlapping [start, end) windows covering n_rows,
    final partial window included."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    return [(s, min(s + window, n_rows)) for s in range(0, n_rows, window)]
