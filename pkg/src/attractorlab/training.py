"""Teacher-forced 1-step-ahead training with truncated BPTT and Adam.

The loss is the plain sum of squared Euclidean one-step errors over a
window (no regularization term).  Within a chunk, windows are processed
consecutively: memory values carry across window boundaries but gradients
are truncated there.  Memory is re-initialized at every chunk start
according to the configured mode; in the Gaussian mode a fresh draw is
taken per chunk per epoch.

The per-epoch reported loss is the mean squared error per step so that
datasets with different chunk counts stay comparable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NonFiniteError
from .lstm import (
    DEFAULT_ARCH,
    Architecture,
    LstmParams,
    MemoryInit,
    MemoryState,
    draw_memory,
    init_params,
    load_params,
    save_params,
    unflatten,
)
from .sampling import Dataset, Scaler, fit_scaler
from .seeding import rng_from

# gradients share the parameter container
Gradient = LstmParams


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    tbptt_window: int = 100
    lr0: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    lr_factor: float = 0.5
    lr_patience: int = 10
    grad_clip: float = 5.0
    memory_init: MemoryInit = field(default_factory=MemoryInit)
    param_seed: int = 0
    shuffle_seed: int = 0
    batch: int = 1
    init_scale: float | None = None

    def __post_init__(self):
        if self.tbptt_window < 1:
            raise ValueError("tbptt_window must be >= 1")
        if not 0.0 < self.lr_factor < 1.0:
            raise ValueError("lr_factor must lie in (0, 1)")
        if not self.lr0 > 0.0:
            raise ValueError("lr0 must be positive")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    def to_dict(self) -> dict:
        d = {
            "epochs": self.epochs,
            "tbptt_window": self.tbptt_window,
            "lr0": self.lr0,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "lr_factor": self.lr_factor,
            "lr_patience": self.lr_patience,
            "grad_clip": self.grad_clip,
            "memory_init": {"mode": self.memory_init.mode, "seed": self.memory_init.seed},
            "param_seed": self.param_seed,
            "shuffle_seed": self.shuffle_seed,
            "batch": self.batch,
            "init_scale": self.init_scale,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        mi = d.pop("memory_init", {"mode": "zero", "seed": 0})
        return cls(memory_init=MemoryInit(mi["mode"], mi["seed"]), **d)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(
    flat_params: np.ndarray,
    flat_grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    clip: float | None = 5.0,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; the gradient is clipped to a global
    norm of `clip` first."""
    if flat_params.shape != flat_grad.shape:
        raise ValueError("parameter and gradient shapes differ")
    g = flat_grad
    if clip is not None and clip > 0.0:
        norm = float(np.linalg.norm(g))
        if norm > clip:
            g = g * (clip / norm)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new = flat_params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamState(m, v, t)


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def _forward_window(p: LstmParams, x_seq: np.ndarray, h0s, c0s):
    """Teacher-forced forward pass over a window.

    x_seq : (T, B, n_in); h0s/c0s : per-layer (B, H) memory.
    Returns predictions (T, B, n_out) plus the caches the backward pass
    needs.  The input-to-hidden products run as one matmul per layer; only
    the recurrence is sequential (in the compiled kernel).
    """
    T, B, _ = x_seq.shape
    inputs = x_seq
    caches = []
    finals_h, finals_c = [], []
    for (w, u, b), h0, c0 in zip(p.layers, h0s, c0s):
        h4 = w.shape[0]
        wx = (inputs.reshape(T * B, -1) @ w.T + b).reshape(T, B, h4)
        ut = np.ascontiguousarray(u.T)
        h_seq, c_seq, gates = _kernels.lstm_layer_forward(wx, ut, h0, c0)
        caches.append((inputs, h_seq, c_seq, gates, h0, c0))
        finals_h.append(h_seq[-1].copy())
        finals_c.append(c_seq[-1].copy())
        inputs = h_seq
    y_lin = inputs.reshape(T * B, -1) @ p.w_out.T + p.b_out
    y = _sigmoid(y_lin).reshape(T, B, -1)
    return y, caches, finals_h, finals_c


def _backward_window(p: LstmParams, y: np.ndarray, targets: np.ndarray, caches):
    """Gradients of the summed squared error for one window."""
    T, B, n_out = y.shape
    dy = 2.0 * (y - targets)
    dy_pre = (dy * y * (1.0 - y)).reshape(T * B, n_out)
    h_top = caches[-1][1].reshape(T * B, -1)
    g_w_out = dy_pre.T @ h_top
    g_b_out = dy_pre.sum(axis=0)
    dh_out = (dy_pre @ p.w_out).reshape(T, B, -1)

    g_layers = [None] * len(p.layers)
    for k in range(len(p.layers) - 1, -1, -1):
        w, u, b = p.layers[k]
        inputs, h_seq, c_seq, gates, h0, c0 = caches[k]
        dgates, _, _ = _kernels.lstm_layer_backward(dh_out, gates, c_seq, c0, u)
        tb = T * B
        dg_flat = dgates.reshape(tb, -1)
        h_prev = np.concatenate([h0[None], h_seq[:-1]], axis=0).reshape(tb, -1)
        g_u = dg_flat.T @ h_prev
        g_w = dg_flat.T @ inputs.reshape(tb, -1)
        g_b = dg_flat.sum(axis=0)
        g_layers[k] = (g_w, g_u, g_b)
        if k > 0:
            dh_out = (dg_flat @ w).reshape(T, B, -1)
    return Gradient(p.arch, g_layers, g_w_out, g_b_out)


def _window_pass(p: LstmParams, x_seq, targets, h0s, c0s):
    y, caches, fin_h, fin_c = _forward_window(p, x_seq, h0s, c0s)
    loss = float(np.sum((y - targets) ** 2))
    grad = _backward_window(p, y, targets, caches)
    return loss, grad, fin_h, fin_c


def sequence_loss(
    p: LstmParams,
    chunk: np.ndarray,
    m0: MemoryState | None = None,
    return_final_memory: bool = False,
):
    """Summed squared 1-step-ahead error and its BPTT gradient on a chunk.

    `chunk` is a normalized (L, 3) sample block with L >= 2; inputs are
    samples 0..L-2 and targets samples 1..L-1, with memory m0 at the start.
    """
    chunk = np.asarray(chunk, dtype=np.float64)
    if chunk.ndim != 2 or len(chunk) < 2:
        raise ValueError("chunk must be a (L>=2, n) sample block")
    if not np.isfinite(chunk).all():
        raise NonFiniteError("chunk contains non-finite samples")
    if m0 is None:
        m0 = MemoryState.zeros(p.arch)
    x_seq = chunk[:-1][:, None, :]
    targets = chunk[1:][:, None, :]
    h0s = [h[None, :].copy() for h in m0.h]
    c0s = [c[None, :].copy() for c in m0.c]
    loss, grad, fin_h, fin_c = _window_pass(p, x_seq, targets, h0s, c0s)
    if not np.isfinite(loss) or not np.isfinite(grad.flatten()).all():
        raise NonFiniteError("loss or gradient overflowed")
    if return_final_memory:
        final = MemoryState([h[0].copy() for h in fin_h], [c[0].copy() for c in fin_c])
        return loss, grad, final
    return loss, grad


@dataclass(eq=False)
class TrainedModel:
    params: LstmParams
    scaler: Scaler
    config: TrainConfig
    history: list[float]
    dataset_fingerprint: str
    dt: float

    @property
    def arch(self) -> Architecture:
        return self.params.arch

    def save(self, path) -> None:
        extra = {
            "scaler": self.scaler.to_dict(),
            "config": self.config.to_dict(),
            "history": self.history,
            "dataset_fingerprint": self.dataset_fingerprint,
            "dt": self.dt,
        }
        save_params(path, self.params, extra=extra)

    @classmethod
    def load(cls, path) -> "TrainedModel":
        params, extra = load_params(path)
        return cls(
            params=params,
            scaler=Scaler.from_dict(extra["scaler"]),
            config=TrainConfig.from_dict(extra["config"]),
            history=list(extra["history"]),
            dataset_fingerprint=extra["dataset_fingerprint"],
            dt=float(extra["dt"]),
        )


def train(
    ds: Dataset,
    cfg: TrainConfig,
    arch: Architecture = DEFAULT_ARCH,
    hooks: dict | None = None,
) -> TrainedModel:
    """Train on a dataset; deterministic given the config seeds.

    Chunks are visited in a freshly shuffled order each epoch, grouped into
    lockstep batches of cfg.batch chunks (all chunks in a group advance
    through the same window positions, losses summed).  One Adam update is
    applied per window.  A window whose loss or gradient overflows is
    skipped and the learning rate halved.  The returned parameters are the
    snapshot from the best epoch.
    """
    if ds.total_samples == 0 or not ds.chunks:
        raise ValueError("dataset is empty")
    if any(len(c) < 2 for c in ds.chunks):
        raise ValueError("every chunk needs >= 2 samples to form training pairs")
    hooks = hooks or {}
    scaler = fit_scaler(ds)
    norm_chunks = [scaler.normalize(c.samples) for c in ds.chunks]
    if cfg.batch > 1 and len({len(c) for c in norm_chunks}) != 1:
        raise ValueError("batch > 1 requires equal-length chunks")

    params = init_params(cfg.param_seed, cfg.init_scale, arch)
    flat = params.flatten()
    adam = AdamState.zeros(flat.size)
    shuffle_rng = rng_from(cfg.shuffle_seed)
    mem_rng = rng_from(cfg.memory_init.seed)
    lr = cfg.lr0

    history: list[float] = []
    best_loss = np.inf
    best_flat = flat.copy()
    plateau = 0

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(norm_chunks))
        sq_err = 0.0
        steps = 0
        for g0 in range(0, len(order), cfg.batch):
            group = order[g0 : g0 + cfg.batch]
            chunks = [norm_chunks[i] for i in group]
            mems = [draw_memory(cfg.memory_init.mode, arch, mem_rng) for _ in group]
            if "on_chunk_start" in hooks:
                for ci, m in zip(group, mems):
                    hooks["on_chunk_start"](epoch, int(ci), m.copy())
            h0s = [np.stack([m.h[k] for m in mems]) for k in range(len(arch.hidden))]
            c0s = [np.stack([m.c[k] for m in mems]) for k in range(len(arch.hidden))]
            length = len(chunks[0])
            x_all = np.stack(chunks, axis=1)  # (L, B, 3)
            n_inputs = length - 1
            for start in range(0, n_inputs, cfg.tbptt_window):
                end = min(start + cfg.tbptt_window, n_inputs)
                x_seq = x_all[start:end]
                targets = x_all[start + 1 : end + 1]
                p_now = unflatten(flat, arch)
                loss, grad, h0s_next, c0s_next = _window_pass(p_now, x_seq, targets, h0s, c0s)
                flat_g = grad.flatten()
                if not np.isfinite(loss) or not np.isfinite(flat_g).all():
                    lr *= 0.5
                    if "on_nonfinite" in hooks:
                        hooks["on_nonfinite"](epoch, start, lr)
                    continue
                h0s, c0s = h0s_next, c0s_next
                flat, adam = adam_step(
                    flat, flat_g, adam, lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.grad_clip
                )
                sq_err += loss
                steps += (end - start) * len(group)

        epoch_loss = sq_err / max(steps, 1)
        history.append(epoch_loss)
        if "on_epoch_end" in hooks:
            hooks["on_epoch_end"](epoch, epoch_loss, lr)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_flat = flat.copy()
            plateau = 0
        else:
            plateau += 1
            if plateau >= cfg.lr_patience:
                lr *= cfg.lr_factor
                plateau = 0

    return TrainedModel(
        params=unflatten(best_flat, arch),
        scaler=scaler,
        config=cfg,
        history=history,
        dataset_fingerprint=ds.fingerprint(),
        dt=ds.dt,
    )


def save_config(cfg: TrainConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        return TrainConfig.from_dict(json.load(fh))
