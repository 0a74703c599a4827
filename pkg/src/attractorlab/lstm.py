"""From-scratch stacked LSTM with an externalized memory state.

The default network is the studied architecture: two LSTM layers of 50
units followed by a sigmoid dense head, 31,153 parameters in total.  Gate
layout everywhere is i, f, g, o (input gate, forget gate, candidate,
output gate); candidate and cell output use tanh, gates and the head use
the logistic function.

Memory (hidden + cell vectors) is never stored inside the model: every
step takes a MemoryState and returns a new one, which is what makes the
zero-vs-Gaussian initialization experiments explicit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError
from .seeding import rng_from


@dataclass(frozen=True)
class Architecture:
    n_in: int = 3
    hidden: tuple[int, ...] = (50, 50)
    n_out: int = 3

    def __post_init__(self):
        if self.n_in < 1 or self.n_out < 1 or len(self.hidden) < 1:
            raise ValueError("architecture needs n_in, n_out >= 1 and >= 1 layer")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be >= 1")

    @property
    def fan_ins(self) -> tuple[int, ...]:
        return (self.n_in,) + self.hidden[:-1]

    @property
    def param_count(self) -> int:
        total = sum(4 * h * (fan + h + 1) for fan, h in zip(self.fan_ins, self.hidden))
        return total + self.n_out * (self.hidden[-1] + 1)

    def to_dict(self) -> dict:
        return {"n_in": self.n_in, "hidden": list(self.hidden), "n_out": self.n_out}

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(n_in=d["n_in"], hidden=tuple(d["hidden"]), n_out=d["n_out"])


DEFAULT_ARCH = Architecture()


@dataclass(eq=False)
class LstmParams:
    """All weights of the network.

    layers[k] is the triple (w, u, b): input weights (4H, fan_in),
    recurrent weights (4H, H) and bias (4H,) of LSTM layer k.  The
    flattening order is fixed: per layer w, u, b, then head w, b, with
    the i, f, g, o blocks along the 4H axis.
    """

    arch: Architecture
    layers: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    w_out: np.ndarray
    b_out: np.ndarray

    def copy(self) -> "LstmParams":
        return LstmParams(
            self.arch,
            [(w.copy(), u.copy(), b.copy()) for w, u, b in self.layers],
            self.w_out.copy(),
            self.b_out.copy(),
        )

    def flatten(self) -> np.ndarray:
        parts = []
        for w, u, b in self.layers:
            parts.extend([w.ravel(), u.ravel(), b])
        parts.extend([self.w_out.ravel(), self.b_out])
        return np.concatenate(parts)


def flatten(p: LstmParams) -> np.ndarray:
    return p.flatten()


def unflatten(vec: np.ndarray, arch: Architecture = DEFAULT_ARCH) -> LstmParams:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1 or vec.size != arch.param_count:
        raise LengthMismatchError(
            f"expected a flat vector of {arch.param_count} values, got shape {vec.shape}"
        )
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        out = vec[pos : pos + size].reshape(shape).copy()
        pos += size
        return out

    layers = []
    for fan, h in zip(arch.fan_ins, arch.hidden):
        w = take((4 * h, fan))
        u = take((4 * h, h))
        b = take((4 * h,))
        layers.append((w, u, b))
    w_out = take((arch.n_out, arch.hidden[-1]))
    b_out = take((arch.n_out,))
    return LstmParams(arch, layers, w_out, b_out)


def zeros_like_params(arch: Architecture = DEFAULT_ARCH) -> LstmParams:
    return unflatten(np.zeros(arch.param_count), arch)


def init_params(seed: int, scale: float | None = None, arch: Architecture = DEFAULT_ARCH) -> LstmParams:
    """Gaussian weight initialization from a seeded generator.

    With scale=None each matrix uses 1/sqrt(fan_in), keeping pre-activations
    O(1); an explicit scale applies uniformly to every weight.  Biases start
    at zero except the forget-gate block, which starts at 1 so early
    training does not flush the cell state.
    """
    if scale is not None and not scale > 0.0:
        raise ValueError("scale must be positive")
    rng = rng_from(seed)
    layers = []
    for fan, h in zip(arch.fan_ins, arch.hidden):
        w = rng.normal(0.0, scale if scale is not None else 1.0 / np.sqrt(fan), (4 * h, fan))
        u = rng.normal(0.0, scale if scale is not None else 1.0 / np.sqrt(h), (4 * h, h))
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0
        layers.append((w, u, b))
    h_last = arch.hidden[-1]
    w_out = rng.normal(
        0.0, scale if scale is not None else 1.0 / np.sqrt(h_last), (arch.n_out, h_last)
    )
    b_out = np.zeros(arch.n_out)
    return LstmParams(arch, layers, w_out, b_out)


@dataclass(eq=False)
class MemoryState:
    """Per-layer hidden and cell vectors."""

    h: list[np.ndarray]
    c: list[np.ndarray]

    def copy(self) -> "MemoryState":
        return MemoryState([v.copy() for v in self.h], [v.copy() for v in self.c])

    def ravel(self) -> np.ndarray:
        return np.concatenate(self.h + self.c)

    @classmethod
    def zeros(cls, arch: Architecture = DEFAULT_ARCH) -> "MemoryState":
        return cls([np.zeros(h) for h in arch.hidden], [np.zeros(h) for h in arch.hidden])


@dataclass(frozen=True)
class MemoryInit:
    """How the memory is set at the start of a sequence: zero or N(0, I)."""

    mode: str = "zero"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("zero", "gaussian"):
            raise ValueError("mode must be 'zero' or 'gaussian'")


def draw_memory(mode: str, arch: Architecture, rng: np.random.Generator) -> MemoryState:
    """One memory draw from an existing generator (h then c per layer)."""
    if mode == "zero":
        return MemoryState.zeros(arch)
    mem = MemoryState.zeros(arch)
    for k, width in enumerate(arch.hidden):
        mem.h[k] = rng.normal(size=width)
        mem.c[k] = rng.normal(size=width)
    return mem


def init_memory(mi: MemoryInit, arch: Architecture = DEFAULT_ARCH) -> MemoryState:
    return draw_memory(mi.mode, arch, rng_from(mi.seed))


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def step(p: LstmParams, x: np.ndarray, mem: MemoryState) -> tuple[np.ndarray, MemoryState]:
    """One network step on a normalized input; returns (output, new memory).

    Pure: the input memory is never mutated.  Outputs are sigmoid values,
    always inside (0, 1).
    """
    x = np.asarray(x, dtype=np.float64)
    new_h, new_c = [], []
    inp = x
    for (w, u, b), h, c in zip(p.layers, mem.h, mem.c):
        width = h.shape[0]
        a = w @ inp + u @ h + b
        gi = _sigmoid(a[:width])
        gf = _sigmoid(a[width : 2 * width])
        gg = np.tanh(a[2 * width : 3 * width])
        go = _sigmoid(a[3 * width :])
        c_new = gf * c + gi * gg
        h_new = go * np.tanh(c_new)
        new_h.append(h_new)
        new_c.append(c_new)
        inp = h_new
    y = _sigmoid(p.w_out @ inp + p.b_out)
    return y, MemoryState(new_h, new_c)


# ---------------------------------------------------------------------------
# Persistence: one file per model, a single-line JSON header followed by the
# flattened parameters as little-endian float64.

_FORMAT_NAME = "attractorlab-model"
_FORMAT_VERSION = 1


def save_params(path, p: LstmParams, extra: dict | None = None) -> None:
    header = {
        "format": _FORMAT_NAME,
        "version": _FORMAT_VERSION,
        "arch": p.arch.to_dict(),
        "n_params": p.arch.param_count,
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(p.flatten().astype("<f8").tobytes())


def load_params(path) -> tuple[LstmParams, dict]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        raw = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != _FORMAT_NAME:
        raise ValueError(f"{path} is not a model file")
    if header.get("version") != _FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {header.get('version')}")
    arch = Architecture.from_dict(header["arch"])
    vec = np.frombuffer(raw, dtype="<f8")
    if vec.size != header["n_params"]:
        raise LengthMismatchError("model payload length does not match header")
    return unflatten(vec.astype(np.float64), arch), header["extra"]
