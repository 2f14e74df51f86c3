"""Serviceability fragility: limit-state checks and lognormal MLE fitting."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from .dynamics import GroundMotion, SystemParams, simulate_sdof
from .errors import DomainError, EmptyDatasetError, FitError, NonIdentifiableError


@dataclass(frozen=True)
class LimitState:
    drift_threshold: float = 0.005
    story_height: float = 20.0  # m
    feature: str = "x"

    def __post_init__(self):
        if not (self.drift_threshold > 0 and self.story_height > 0):
            raise DomainError("drift threshold and story height must be positive")

    @property
    def displacement_limit(self) -> float:
        return self.drift_threshold * self.story_height


@dataclass(frozen=True)
class ExceedanceObservation:
    im: float  # PGA in g
    exceeded: int
    record_id: str = ""
    peak_disp: float = float("nan")  # m

    def __post_init__(self):
        if not self.im > 0:
            raise DomainError("intensity measure must be positive")
        if self.exceeded not in (0, 1):
            raise DomainError("indicator must be 0 or 1")


@dataclass
class FragilityParams:
    median: float  # g
    beta: float
    log_likelihood: float = float("nan")
    n: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.median > 0 and self.beta > 0):
            raise DomainError("median and beta must be positive")

    def to_json(self) -> str:
        doc = {"median_g": self.median, "beta": self.beta, "log_likelihood": self.log_likelihood,
               "n": self.n, "diagnostics": self.diagnostics}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text) -> "FragilityParams":
        doc = json.loads(text)
        return cls(doc["median_g"], doc["beta"], doc["log_likelihood"], doc["n"], doc.get("diagnostics", {}))


def exceedance_probability(x, params: FragilityParams):
    """P(limit state exceeded | PGA = x) = Phi(ln(x / median) / beta)."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x > 0)):
        raise DomainError("intensity must be positive")
    p = stats.norm.cdf(np.log(x / params.median) / params.beta)
    return float(p) if p.ndim == 0 else p


def check_limit_state(peak_disp: float, ls: LimitState) -> int:
    """1 when the drift angle reaches the threshold (boundary inclusive)."""
    return int(abs(peak_disp) / ls.story_height >= ls.drift_threshold)


def log_likelihood(im, y, median, beta) -> float:
    z = (np.log(im) - math.log(median)) / beta
    return float(np.sum(np.where(y == 1, stats.norm.logcdf(z), stats.norm.logsf(z))))


def mle_fit(observations: Sequence[ExceedanceObservation], beta_bounds=(1e-3, 10.0),
            tol=1e-8) -> FragilityParams:
    """Maximize the Bernoulli likelihood over (ln median, ln beta).

    Bounded Nelder-Mead search, restarted from its own optimum until the
    log-likelihood stops improving by more than ``tol``.
    """
    if len(observations) == 0:
        raise EmptyDatasetError("no observations")
    im = np.array([o.im for o in observations], dtype=np.float64)
    y = np.array([o.exceeded for o in observations], dtype=int)
    order = np.lexsort((y, im))
    im, y = im[order], y[order]
    if y.min() == y.max():
        raise NonIdentifiableError("fragility is not identifiable when every indicator is equal")
    log_im = np.log(im)
    lo_mu, hi_mu = log_im.min() - 5.0, log_im.max() + 5.0
    bounds = [(lo_mu, hi_mu), (math.log(beta_bounds[0]), math.log(beta_bounds[1]))]

    def nll(theta):
        return -log_likelihood(im, y, math.exp(theta[0]), math.exp(theta[1]))

    x0 = np.array([log_im.mean(), math.log(max(log_im.std(), 0.1))])
    best = None
    for _ in range(20):
        res = optimize.minimize(nll, x0, method="Nelder-Mead", bounds=bounds,
                                options={"xatol": 1e-10, "fatol": tol * 1e-2, "maxiter": 20000})
        improved = best is None or best.fun - res.fun > tol
        if best is None or res.fun < best.fun:
            best = res
        if not improved:
            break
        x0 = best.x
    else:
        raise FitError("likelihood maximization did not settle",
                       {"nll": float(best.fun), "theta": best.x.tolist()})
    if not np.isfinite(best.fun):
        raise FitError("non-finite likelihood at optimum", {"theta": best.x.tolist()})
    at_bound = bool(best.x[1] <= bounds[1][0] + 1e-6)
    # perfectly separated indicators push beta towards 0 and leave the median
    # anywhere in the gap; the likelihood is flat there so report it
    separable = bool(im[y == 0].max() < im[y == 1].min())
    return FragilityParams(math.exp(best.x[0]), math.exp(best.x[1]), -float(best.fun), len(im),
                           {"beta_at_lower_bound": at_bound, "separable": separable,
                            "iterations": int(best.nit)})


def curve_table(params: FragilityParams, pga_grid=None):
    if pga_grid is None:
        pga_grid = np.round(np.arange(0.01, 1.0001, 0.01), 10)
    grid = np.asarray(pga_grid, dtype=np.float64)
    return grid, exceedance_probability(grid, params)


def peak_response_surrogate(params) -> Callable[[GroundMotion], float]:
    from .model import predict

    def response(gm):
        out = predict(params, gm)
        idx = params.meta.get("features", ["x"]).index("x")
        return float(np.max(np.abs(out[0, :, idx])))

    return response


def peak_response_simulator(system: SystemParams) -> Callable[[GroundMotion], float]:
    def response(gm):
        return float(np.max(np.abs(simulate_sdof(system, gm).x)))

    return response


@dataclass
class Assessment:
    observations: list
    params: FragilityParams | None
    grid: np.ndarray | None = None
    probabilities: np.ndarray | None = None
    failures: dict = field(default_factory=dict)


def run_assessment(response: Callable[[GroundMotion], float], motions: Sequence[GroundMotion],
                   limit_state: LimitState, scale_factors=(1.0,), pga_grid=None) -> Assessment:
    """Predict peak displacement per (motion, scale), check the limit state, fit.

    ``response`` maps a ground motion to its peak displacement in metres;
    see :func:`peak_response_surrogate` and :func:`peak_response_simulator`.
    Per-record failures are collected in ``failures``; fitting errors
    propagate with the partial observations attached.
    """
    if len(motions) == 0:
        raise EmptyDatasetError("empty ground-motion suite")
    observations, failures = [], {}
    for gm in motions:
        for factor in scale_factors:
            scaled = gm if factor == 1.0 else gm.scaled(factor)
            rid = scaled.label
            try:
                peak = response(scaled)
                if not np.isfinite(peak):
                    raise FitError(f"non-finite peak response for {rid}")
            except Exception as exc:  # noqa: BLE001 - collected per record
                failures[rid] = f"{type(exc).__name__}: {exc}"
                continue
            observations.append(ExceedanceObservation(scaled.pga, check_limit_state(peak, limit_state),
                                                      rid, peak))
    try:
        params = mle_fit(observations)
    except FitError as exc:
        exc.diagnostics["partial"] = Assessment(observations, None, failures=failures)
        raise
    grid, prob = curve_table(params, pga_grid)
    return Assessment(observations, params, grid, prob, failures)
