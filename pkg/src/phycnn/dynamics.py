"""Nonlinear single-DOF oscillator under ground excitation.

    m*a + c*v + k1*x + k2*x**3 = -m * gamma * ag

Integrated with fixed-step classical RK4 at the record's sampling interval;
the excitation is linearly interpolated for the half-step stages.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal.windows import tukey

from .errors import ConfigError, DomainError, EmptyDatasetError, ShapeError, SimulationError

G_ACCEL = 9.80665  # m/s^2 per g

FEATURES = ("x", "v", "a", "g")
FEATURE_UNITS = {"x": "m", "v": "m/s", "a": "m/s^2", "g": "m/s^2"}
CASE1_OUTPUTS = ("x", "v", "g")
CASE2_OUTPUTS = ("a",)


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{name} must be finite")


@dataclass(frozen=True)
class SystemParams:
    m: float = 1.0
    c: float = 1.0
    k1: float = 20.0
    k2: float = 200.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("m", "c", "k1", "k2", "gamma"):
            _check_finite(name, getattr(self, name))
        if self.m <= 0:
            raise DomainError("mass must be positive")
        if self.c < 0:
            raise DomainError("damping must be non-negative")
        if self.k1 <= 0:
            raise DomainError("linear stiffness must be positive")


@dataclass(frozen=True)
class GroundMotion:
    accel: np.ndarray
    dt: float
    label: str = ""

    def __post_init__(self):
        accel = np.asarray(self.accel, dtype=np.float64)
        if accel.ndim != 1 or accel.size < 2:
            raise ShapeError("ground motion needs a 1-D sequence of at least 2 samples")
        _check_finite("ground acceleration", accel)
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DomainError("dt must be positive")
        accel.setflags(write=False)
        object.__setattr__(self, "accel", accel)

    @property
    def n(self) -> int:
        return self.accel.size

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n) * self.dt

    @property
    def pga(self) -> float:
        """Peak ground acceleration in g."""
        return float(np.max(np.abs(self.accel)) / G_ACCEL)

    def scaled(self, factor: float) -> "GroundMotion":
        return GroundMotion(self.accel * factor, self.dt, f"{self.label}x{factor:g}")


@dataclass(frozen=True)
class Trajectory:
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    g: np.ndarray
    dt: float

    def __post_init__(self):
        if not (len(self.x) == len(self.v) == len(self.a) == len(self.g)):
            raise ShapeError("trajectory fields must share one length")

    @property
    def n(self) -> int:
        return len(self.x)

    def feature(self, name: str) -> np.ndarray:
        if name not in FEATURES:
            raise ConfigError(f"unknown feature {name!r}")
        return getattr(self, name)


def restoring_force(params: SystemParams, x, v):
    """Mass-normalized restoring force g = (c*v + k1*x + k2*x**3) / m."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_finite("x", x)
    _check_finite("v", v)
    g = (params.c * v + params.k1 * x + params.k2 * x**3) / params.m
    return float(g) if g.ndim == 0 else g


def _g(params, x, v):
    return (params.c * v + params.k1 * x + params.k2 * x * x * x) / params.m


def simulate_sdof(params: SystemParams, gm: GroundMotion, init=(0.0, 0.0),
                  blowup: float = 1e6) -> Trajectory:
    x0, v0 = (float(s) for s in init)
    if not (np.isfinite(x0) and np.isfinite(v0)):
        raise DomainError("initial state must be finite")
    ag = gm.accel.tolist()
    dt = gm.dt
    n = gm.n
    gam = params.gamma
    x = np.empty(n)
    v = np.empty(n)
    x[0], v[0] = x0, v0
    xi, vi = x0, v0
    for i in range(n - 1):
        f0 = ag[i]
        f1 = ag[i + 1]
        fm = 0.5 * (f0 + f1)
        k1x = vi
        k1v = -_g(params, xi, vi) - gam * f0
        xa, va = xi + 0.5 * dt * k1x, vi + 0.5 * dt * k1v
        k2x = va
        k2v = -_g(params, xa, va) - gam * fm
        xb, vb = xi + 0.5 * dt * k2x, vi + 0.5 * dt * k2v
        k3x = vb
        k3v = -_g(params, xb, vb) - gam * fm
        xc, vc = xi + dt * k3x, vi + dt * k3v
        k4x = vc
        k4v = -_g(params, xc, vc) - gam * f1
        xi = xi + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vi = vi + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (abs(xi) <= blowup and abs(vi) <= blowup):
            raise SimulationError("state exceeded blow-up bound", i + 1)
        x[i + 1] = xi
        v[i + 1] = vi
    g = _g(params, x, v)
    a = -g - gam * gm.accel
    return Trajectory(x=x, v=v, a=a, g=g, dt=dt)


def infer_restoring(accel, gm: GroundMotion, gamma: float) -> np.ndarray:
    """Restoring force recovered from measured response acceleration."""
    accel = np.asarray(accel, dtype=np.float64)
    if accel.shape != gm.accel.shape:
        raise ShapeError(f"length mismatch: {accel.shape} vs {gm.accel.shape}")
    return -accel - gamma * gm.accel


def synth_ground_motion(seed: int, duration: float = 50.0, dt: float = 0.05,
                        corner_freqs=(0.2, 8.0), amplitude: float = 1.0,
                        taper: float = 0.2, label: str | None = None) -> GroundMotion:
    """Band-limited Gaussian noise with a cosine-taper envelope.

    The band limit is applied exactly in the frequency domain, then the
    envelope, then a mean correction proportional to the envelope so the
    record ends stay at zero. Peak |accel| equals ``amplitude``.
    """
    if not (dt > 0 and duration > 0):
        raise DomainError("duration and dt must be positive")
    steps = duration / dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise DomainError("duration must be an integer multiple of dt")
    n = int(round(steps)) + 1
    lo, hi = (float(f) for f in corner_freqs)
    nyq = 0.5 / dt
    if not (0.0 <= lo < hi <= nyq):
        raise DomainError(f"invalid band [{lo}, {hi}] for Nyquist {nyq}")
    if amplitude <= 0:
        raise DomainError("amplitude must be positive")

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, dt)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    band = np.fft.irfft(spec, n)
    env = tukey(n, taper)
    acc = band * env
    acc = acc - env * (acc.sum() / env.sum())
    acc *= amplitude / np.max(np.abs(acc))
    return GroundMotion(acc, dt, label if label is not None else f"synth-{seed}")


@dataclass
class Dataset:
    """Network-ready arrays: inputs [S, n, 1], outputs [S, n, F]."""

    inputs: np.ndarray
    outputs: np.ndarray
    features: tuple
    dt: float
    record_ids: list = field(default_factory=list)
    scales: dict | None = None

    def __post_init__(self):
        if self.inputs.ndim != 3 or self.outputs.ndim != 3:
            raise ShapeError("dataset arrays must be rank 3")
        if self.inputs.shape[:2] != self.outputs.shape[:2]:
            raise ShapeError("inputs and outputs disagree on samples/timesteps")
        if self.outputs.shape[2] != len(self.features):
            raise ShapeError("feature labels do not match output depth")
        if not self.record_ids:
            self.record_ids = [f"rec{i:03d}" for i in range(self.inputs.shape[0])]

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def ground_accel(self) -> np.ndarray:
        return self.inputs[..., 0]

    def subset(self, idx: Sequence[int]) -> "Dataset":
        idx = list(idx)
        return Dataset(self.inputs[idx], self.outputs[idx], self.features, self.dt,
                       [self.record_ids[i] for i in idx], self.scales)


def generate_dataset(params: SystemParams, motions: Sequence[GroundMotion],
                     outputs: Sequence[str] = CASE1_OUTPUTS,
                     trajectories: Sequence[Trajectory] | None = None) -> Dataset:
    if len(motions) == 0:
        raise EmptyDatasetError("no ground motions supplied")
    outputs = tuple(outputs)
    for name in outputs:
        if name not in FEATURES:
            raise ConfigError(f"unknown output feature {name!r}")
    n, dt = motions[0].n, motions[0].dt
    for gm in motions:
        if gm.n != n or gm.dt != dt:
            raise ShapeError("all motions must share dt and length")
    if trajectories is None:
        trajectories = [simulate_sdof(params, gm) for gm in motions]
    inputs = np.stack([gm.accel for gm in motions])[..., None]
    outs = np.stack([np.stack([tr.feature(f) for f in outputs], axis=-1) for tr in trajectories])
    ids = [gm.label or f"rec{i:03d}" for i, gm in enumerate(motions)]
    return Dataset(inputs, outs, outputs, dt, ids)
