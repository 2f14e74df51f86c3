"""Layer primitives with hand-written reverse-mode gradients.

Tensors are float64 arrays shaped [samples, timesteps, features]. Every
layer exposes a forward function and a backward function that takes the
upstream gradient plus whatever the forward pass cached.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .errors import ConfigError, OptimizerError, ShapeError

ACTIVATIONS = ("relu", "tanh", "linear")


@dataclass(frozen=True)
class ConvLayerSpec:
    kernel: int
    filters: int
    activation: str = "relu"
    stride: int = 1

    def __post_init__(self):
        if self.kernel < 1 or self.filters < 1:
            raise ConfigError("kernel and filters must be >= 1")
        if self.stride != 1:
            raise ConfigError("only stride 1 is supported")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def padding(self) -> int:
        return self.kernel - 1


def _as3(x, name="input"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"{name} must be rank 3 [samples, timesteps, features], got {x.shape}")
    return x


def pad_end(x, count):
    """Append ``count`` zero steps to the temporal axis."""
    if count == 0:
        return x
    s, _, f = x.shape
    return np.concatenate([x, np.zeros((s, count, f))], axis=1)


@numba.njit(cache=True)
def _conv_kernel(xp, w, b, n):
    # Accumulation order is fixed: taps outer, input features inner, bias last.
    S = xp.shape[0]
    k, fin, fout = w.shape
    out = np.empty((S, n, fout))
    acc = np.empty(fout)
    for s in range(S):
        for i in range(n):
            acc[:] = 0.0
            for j in range(k):
                for f in range(fin):
                    z = xp[s, i + j, f]
                    for o in range(fout):
                        acc[o] += z * w[j, f, o]
            for o in range(fout):
                out[s, i, o] = acc[o] + b[o]
    return out


def conv1d_forward(x, weights, bias, spec: ConvLayerSpec | None = None):
    """Stride-1 temporal convolution with k-1 zeros appended at the end.

    ``out[s, i, o] = sum_j sum_f W[j, f, o] * xpad[s, i + j, f] + b[o]`` so
    the output keeps the input length.
    """
    x = _as3(x)
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if w.ndim != 3:
        raise ShapeError("conv weights must be [kernel, in_features, filters]")
    k, fin, fout = w.shape
    if spec is not None and (spec.kernel != k or spec.filters != fout):
        raise ShapeError("weights disagree with layer spec")
    if x.shape[2] != fin:
        raise ShapeError(f"input has {x.shape[2]} features, weights expect {fin}")
    if b.shape != (fout,):
        raise ShapeError("bias must have one entry per filter")
    n = x.shape[1]
    xp = np.ascontiguousarray(pad_end(x, k - 1))
    return _conv_kernel(xp, np.ascontiguousarray(w), b, n)


def conv1d_backward(grad, x, weights, spec: ConvLayerSpec | None = None):
    """Gradients w.r.t. (input, weights, bias) for :func:`conv1d_forward`."""
    grad = _as3(grad, "upstream gradient")
    x = _as3(x)
    w = np.asarray(weights, dtype=np.float64)
    k, fin, fout = w.shape
    s, n, _ = x.shape
    if grad.shape != (s, n, fout) or x.shape[2] != fin:
        raise ShapeError("gradient/input shapes inconsistent with forward pass")
    xp = pad_end(x, k - 1)
    g2 = grad.reshape(s * n, fout)
    dxp = np.zeros_like(xp)
    dw = np.empty_like(w)
    for j in range(k):
        window = xp[:, j:j + n, :]
        dw[j] = window.reshape(s * n, fin).T @ g2
        dxp[:, j:j + n, :] += (g2 @ w[j].T).reshape(s, n, fin)
    db = grad.sum(axis=(0, 1))
    return dxp[:, :n, :], dw, db


def activation_forward(x, tag):
    if tag == "relu":
        return np.where(x >= 0, x, 0.0)
    if tag == "tanh":
        return np.tanh(x)
    if tag == "linear":
        return np.array(x, dtype=np.float64, copy=True)
    raise ConfigError(f"unknown activation {tag!r}")


def activation_backward(x, grad, tag):
    """Gradient through the activation; ``x`` is the pre-activation input."""
    if tag == "relu":
        return grad * (x > 0)
    if tag == "tanh":
        t = np.tanh(x)
        return grad * (1.0 - t * t)
    if tag == "linear":
        return grad
    raise ConfigError(f"unknown activation {tag!r}")


def dropout(x, rate, mode="train", seed=None, rng=None):
    """Inverted dropout. Returns ``(y, mask)``; mask is None in infer mode."""
    if not (0.0 <= rate < 1.0):
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "infer"):
        raise ConfigError(f"unknown dropout mode {mode!r}")
    if mode == "infer" or rate == 0.0:
        return x, None
    if rng is None:
        rng = np.random.default_rng(seed)
    mask = (rng.random(np.shape(x)) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(grad, mask):
    return grad if mask is None else grad * mask


def fc_forward(x, weights, bias):
    """Affine map applied independently at every timestep."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or x.shape[-1] != w.shape[0] or np.shape(bias) != (w.shape[1],):
        raise ShapeError(f"fc shapes incompatible: x {x.shape}, W {w.shape}, b {np.shape(bias)}")
    return (x.reshape(-1, w.shape[0]) @ w + bias).reshape(x.shape[:-1] + (w.shape[1],))


def fc_backward(grad, x, weights):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if grad.shape[:-1] != x.shape[:-1] or grad.shape[-1] != w.shape[1]:
        raise ShapeError("gradient shape inconsistent with fc forward pass")
    fin, fout = w.shape
    dw = x.reshape(-1, fin).T @ grad.reshape(-1, fout)
    db = grad.reshape(-1, fout).sum(axis=0)
    return (grad.reshape(-1, fout) @ w.T).reshape(x.shape), dw, db


def finite_difference(y, dt, axis=1):
    """Second-order temporal derivative along ``axis``.

    Central differences inside, one-sided three-point stencils at both ends.
    """
    y = np.asarray(y, dtype=np.float64)
    if dt <= 0:
        raise ShapeError("dt must be positive")
    y = np.moveaxis(y, axis, 0)
    if y.shape[0] < 3:
        raise ShapeError("finite difference needs at least 3 steps")
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2 * dt)
    d[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * dt)
    d[-1] = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * dt)
    return np.moveaxis(d, 0, axis)


def finite_difference_adjoint(g, dt, axis=1):
    """Transpose of :func:`finite_difference`; used for reverse mode."""
    g = np.asarray(g, dtype=np.float64)
    g = np.moveaxis(g, axis, 0)
    if g.shape[0] < 3:
        raise ShapeError("finite difference needs at least 3 steps")
    h = 1.0 / (2 * dt)
    out = np.zeros_like(g)
    out[2:] += h * g[1:-1]
    out[:-2] -= h * g[1:-1]
    out[0] += -3 * h * g[0]
    out[1] += 4 * h * g[0]
    out[2] += -h * g[0]
    out[-1] += 3 * h * g[-1]
    out[-2] += -4 * h * g[-1]
    out[-3] += h * g[-1]
    return np.moveaxis(out, 0, axis)


def mse(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a - b
    return float(np.sum(d * d) / d.size)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state: AdamState | None = None, lr=1e-3,
              beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    if state is None:
        state = AdamState()
    if set(grads) != set(params):
        raise OptimizerError("gradient keys do not match parameter keys")
    for name, g in grads.items():
        if np.shape(g) != np.shape(params[name]):
            raise OptimizerError(f"gradient for {name} has shape {np.shape(g)}")
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for {name}")
    t = state.t + 1
    new_params, new_m, new_v = {}, {}, {}
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        m = beta1 * state.m.get(name, 0.0) + (1 - beta1) * g
        v = beta2 * state.v.get(name, 0.0) + (1 - beta2) * g * g
        new_params[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, t)


# --------------------------------------------------------------------------
# parameter container and weights file

FORMAT_VERSION = 1
_MAGIC = b"PHYCNNW\x00"


@dataclass
class NetworkParams:
    arrays: dict
    descriptor: dict
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def copy(self) -> "NetworkParams":
        return NetworkParams({k: v.copy() for k, v in self.arrays.items()},
                             json.loads(json.dumps(self.descriptor)), self.seed,
                             json.loads(json.dumps(self.meta)))

    @property
    def count(self) -> int:
        return int(sum(a.size for a in self.arrays.values()))

    def equals(self, other: "NetworkParams") -> bool:
        return (list(self.arrays) == list(other.arrays)
                and all(np.array_equal(self.arrays[k], other.arrays[k]) for k in self.arrays)
                and self.descriptor == other.descriptor and self.meta == other.meta)

    def _header(self):
        return {
            "format": "phycnn-weights",
            "version": FORMAT_VERSION,
            "descriptor": self.descriptor,
            "seed": self.seed,
            "meta": self.meta,
            "layers": [[k, list(v.shape)] for k, v in self.arrays.items()],
        }

    def to_bytes(self) -> bytes:
        header = json.dumps(self._header(), sort_keys=True).encode()
        chunks = [_MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header]
        chunks += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in self.arrays.values()]
        return b"".join(chunks)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "NetworkParams":
        if blob[:8] != _MAGIC:
            raise ConfigError("not a weights file")
        version, hlen = struct.unpack("<II", blob[8:16])
        if version != FORMAT_VERSION:
            raise ConfigError(f"unsupported weights version {version}")
        header = json.loads(blob[16:16 + hlen])
        pos = 16 + hlen
        arrays = {}
        for name, shape in header["layers"]:
            size = int(np.prod(shape)) * 8
            arrays[name] = np.frombuffer(blob[pos:pos + size], dtype="<f8").reshape(shape).astype(np.float64)
            pos += size
        if pos != len(blob):
            raise ConfigError("weights file has trailing or missing bytes")
        return cls(arrays, header["descriptor"], header["seed"], header["meta"])

    def to_json(self) -> str:
        doc = self._header()
        doc["arrays"] = {k: v.ravel().tolist() for k, v in self.arrays.items()}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NetworkParams":
        doc = json.loads(text)
        if doc.get("format") != "phycnn-weights":
            raise ConfigError("not a weights file")
        arrays = {name: np.asarray(doc["arrays"][name], dtype=np.float64).reshape(shape)
                  for name, shape in doc["layers"]}
        return cls(arrays, doc["descriptor"], doc["seed"], doc["meta"])

    def save(self, path):
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(self.to_json())
        else:
            path.write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "NetworkParams":
        path = Path(path)
        if path.suffix == ".json":
            return cls.from_json(path.read_text())
        return cls.from_bytes(path.read_bytes())
