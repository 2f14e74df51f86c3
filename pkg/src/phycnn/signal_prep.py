"""High-pass filtering and acceleration-to-displacement integration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.integrate import cumulative_trapezoid

from .errors import ConfigError, DomainError, ShapeError


@dataclass(frozen=True)
class FilterSpec:
    order: int = 2
    cutoff: float = 0.1  # Hz
    sample_rate: float = 20.0  # Hz
    kind: str = "highpass"

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError("filter order must be >= 1")
        if self.kind != "highpass":
            raise ConfigError(f"unsupported filter type {self.kind!r}")
        if not (0 < self.cutoff < self.sample_rate / 2):
            raise ConfigError(f"cutoff {self.cutoff} Hz must lie in (0, Nyquist={self.sample_rate / 2})")

    def sos(self):
        # scipy designs via the bilinear transform with pre-warping, so the
        # single-pass gain at the cutoff is exactly -3 dB.
        return signal.butter(self.order, self.cutoff, btype="highpass",
                             fs=self.sample_rate, output="sos")


def butterworth_highpass(x, spec: FilterSpec, zero_phase: bool = True) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("expected a 1-D signal")
    if x.size <= 3 * spec.order:
        raise ShapeError(f"signal length {x.size} too short for order {spec.order}")
    sos = spec.sos()
    if not zero_phase:
        return signal.sosfilt(sos, x)
    # scipy's default pad (a few samples) leaves slow edge transients; one
    # cutoff period of mirrored signal lets them die out before the record.
    padlen = min(int(np.ceil(spec.sample_rate / spec.cutoff)), x.size - 1)
    return signal.sosfiltfilt(sos, x, padtype="even", padlen=padlen)


def accel_to_disp(accel, dt: float, spec: FilterSpec | None = None) -> np.ndarray:
    """Filter, integrate to velocity, filter, integrate to displacement, filter."""
    accel = np.asarray(accel, dtype=np.float64)
    if dt <= 0:
        raise DomainError("dt must be positive")
    if accel.ndim != 1 or accel.size < 8:
        raise ShapeError("need a 1-D record of at least 8 samples")
    if spec is None:
        spec = FilterSpec(sample_rate=1.0 / dt)
    a = butterworth_highpass(accel, spec)
    v = butterworth_highpass(cumulative_trapezoid(a, dx=dt, initial=0.0), spec)
    return butterworth_highpass(cumulative_trapezoid(v, dx=dt, initial=0.0), spec)
