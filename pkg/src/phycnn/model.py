"""Physics-guided 1D CNN surrogate: architecture, losses, training, metrics."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .dynamics import CASE1_OUTPUTS, Dataset, GroundMotion
from .errors import ConfigError, MetricError, ShapeError, TrainingError

log = logging.getLogger(__name__)

OUTPUT_MODES = {"full-state": CASE1_OUTPUTS, "displacement-only": ("x",)}


@dataclass(frozen=True)
class ArchitectureSpec:
    """Conv stack (filters, kernel) per layer, then per-timestep FC layers.

    ``fc_hidden`` lists the hidden FC widths; the output FC layer always has
    one node per output feature. With ``time_reversed`` the convolution
    stack runs over the reversed record so that each output step sees the
    current and preceding excitation.
    """

    conv_layers: tuple = ((16, 17), (16, 17), (16, 17))
    fc_hidden: tuple = (32,)
    dropout: float = 0.2
    output_mode: str = "full-state"
    conv_activation: str = "relu"
    fc_activation: str = "tanh"
    output_activation: str = "linear"
    time_reversed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(tuple(int(v) for v in c) for c in self.conv_layers))
        object.__setattr__(self, "fc_hidden", tuple(int(w) for w in self.fc_hidden))
        if self.output_mode not in OUTPUT_MODES:
            raise ConfigError(f"unknown output mode {self.output_mode!r}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError("dropout must be in [0, 1)")
        for filters, kernel in self.conv_layers:
            nn.ConvLayerSpec(kernel, filters, self.conv_activation)
        if any(w < 1 for w in self.fc_hidden):
            raise ConfigError("FC widths must be positive")
        for tag in (self.fc_activation, self.output_activation):
            if tag not in nn.ACTIVATIONS:
                raise ConfigError(f"unknown activation {tag!r}")

    @classmethod
    def full_size(cls, output_mode="full-state"):
        """Five 64-filter convolutions with kernel 50 and three FC layers."""
        return cls(conv_layers=((64, 50),) * 5, fc_hidden=(64, 32), output_mode=output_mode)

    @property
    def outputs(self) -> tuple:
        return OUTPUT_MODES[self.output_mode]

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    @property
    def fc_widths(self) -> tuple:
        return self.fc_hidden + (self.n_outputs,)

    @property
    def receptive_field(self) -> int:
        return 1 + sum(k - 1 for _, k in self.conv_layers)

    def to_dict(self):
        d = asdict(self)
        d["conv_layers"] = [list(c) for c in self.conv_layers]
        d["fc_hidden"] = list(self.fc_hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 2000
    lr: float = 1e-3
    lambda_data: float = 1.0
    lambda_phys: float = 1.0
    seed: int = 0
    patience: int = 0  # 0 disables early stopping
    scaling: str = "maxabs"
    loss_units: str = "physical"
    grad_clip: float = 0.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.lambda_data < 0 or self.lambda_phys < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.scaling not in ("maxabs", "none"):
            raise ConfigError(f"unknown scaling policy {self.scaling!r}")
        if self.loss_units not in ("physical", "scaled"):
            raise ConfigError(f"unknown loss units {self.loss_units!r}")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")


@dataclass
class LossReport:
    total: float
    data: float
    physics: float
    terms: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# network construction and passes

def _init_uniform(rng, shape, fan_in, activation):
    gain = 6.0 if activation == "relu" else 3.0
    limit = np.sqrt(gain / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def build_network(spec: ArchitectureSpec, n_inputs: int = 1, n_outputs: int | None = None,
                  seed: int = 0) -> nn.NetworkParams:
    if n_outputs is None:
        n_outputs = spec.n_outputs
    if n_outputs != spec.n_outputs:
        raise ConfigError(f"last FC width {spec.n_outputs} ({spec.output_mode}) "
                          f"does not match {n_outputs} output features")
    if n_inputs < 1:
        raise ConfigError("need at least one input feature")
    rng = np.random.default_rng(seed)
    arrays = {}
    depth = n_inputs
    for i, (filters, kernel) in enumerate(spec.conv_layers):
        arrays[f"conv{i}.W"] = _init_uniform(rng, (kernel, depth, filters), kernel * depth,
                                             spec.conv_activation)
        arrays[f"conv{i}.b"] = np.zeros(filters)
        depth = filters
    widths = spec.fc_widths
    for i, width in enumerate(widths):
        tag = spec.output_activation if i == len(widths) - 1 else spec.fc_activation
        arrays[f"fc{i}.W"] = _init_uniform(rng, (depth, width), depth, tag)
        arrays[f"fc{i}.b"] = np.zeros(width)
        depth = width
    descriptor = {"architecture": spec.to_dict(), "n_inputs": n_inputs, "n_outputs": n_outputs}
    meta = {
        "input_scale": [1.0] * n_inputs,
        "output_scale": [1.0] * n_outputs,
        "features": list(spec.outputs),
    }
    return nn.NetworkParams(arrays, descriptor, seed, meta)


def parameter_count(spec: ArchitectureSpec, n_inputs: int = 1) -> int:
    total, depth = 0, n_inputs
    for filters, kernel in spec.conv_layers:
        total += kernel * depth * filters + filters
        depth = filters
    for width in spec.fc_widths:
        total += depth * width + width
        depth = width
    return total


def architecture(params: nn.NetworkParams) -> ArchitectureSpec:
    return ArchitectureSpec.from_dict(params.descriptor["architecture"])


def forward(params: nn.NetworkParams, x, mode="infer", rng=None, spec=None):
    """Network pass in scaled units. Returns ``(y, cache)``."""
    spec = spec or architecture(params)
    x = nn._as3(x)
    if x.shape[2] != params.descriptor["n_inputs"]:
        raise ConfigError(f"model expects {params.descriptor['n_inputs']} input features, "
                          f"got {x.shape[2]}")
    h = x[:, ::-1, :] if spec.time_reversed else x
    cache = []
    for i in range(len(spec.conv_layers)):
        z = nn.conv1d_forward(h, params.arrays[f"conv{i}.W"], params.arrays[f"conv{i}.b"])
        cache.append(("conv", i, h, z))
        h = nn.activation_forward(z, spec.conv_activation)
    if spec.time_reversed:
        h = h[:, ::-1, :]
    widths = spec.fc_widths
    for i in range(len(widths)):
        h, mask = nn.dropout(h, spec.dropout, mode, rng=rng)
        tag = spec.output_activation if i == len(widths) - 1 else spec.fc_activation
        z = nn.fc_forward(h, params.arrays[f"fc{i}.W"], params.arrays[f"fc{i}.b"])
        cache.append(("fc", i, h, z, mask, tag))
        h = nn.activation_forward(z, tag)
    return h, cache


def backward(params: nn.NetworkParams, grad, cache, spec=None) -> dict:
    spec = spec or architecture(params)
    grads = {}
    g = grad
    crossed = False
    for entry in reversed(cache):
        if entry[0] == "fc":
            _, i, h, z, mask, tag = entry
            g = nn.activation_backward(z, g, tag)
            g, grads[f"fc{i}.W"], grads[f"fc{i}.b"] = nn.fc_backward(g, h, params.arrays[f"fc{i}.W"])
            g = nn.dropout_backward(g, mask)
        else:
            if spec.time_reversed and not crossed:
                g = g[:, ::-1, :]
                crossed = True
            _, i, h, z = entry
            g = nn.activation_backward(z, g, spec.conv_activation)
            g, grads[f"conv{i}.W"], grads[f"conv{i}.b"] = nn.conv1d_backward(
                g, h, params.arrays[f"conv{i}.W"])
    return {k: grads[k] for k in params.arrays}


def _scales(params):
    return (np.asarray(params.meta["input_scale"], dtype=np.float64),
            np.asarray(params.meta["output_scale"], dtype=np.float64))


def predict(params: nn.NetworkParams, gm) -> np.ndarray:
    """Physical-unit outputs [S, n, F] for a ground motion or input tensor."""
    if isinstance(gm, GroundMotion):
        x = gm.accel[None, :, None]
    else:
        x = np.asarray(gm, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :, None]
        elif x.ndim == 2:
            x = x[..., None]
    if x.shape[2] != params.descriptor["n_inputs"]:
        raise ConfigError(f"model expects {params.descriptor['n_inputs']} input features, "
                          f"got {x.shape[2]}")
    in_scale, out_scale = _scales(params)
    y, _ = forward(params, x / in_scale, "infer")
    return y * out_scale


# --------------------------------------------------------------------------
# losses

def _full_state(pred, meas, ag, gamma, dt, lam_d, lam_p, norm=None, want_grad=False):
    pred = np.asarray(pred, dtype=np.float64)
    meas = np.asarray(meas, dtype=np.float64)
    ag = np.asarray(ag, dtype=np.float64)
    if pred.ndim != 3 or pred.shape[2] != 3 or pred.shape != meas.shape:
        raise ShapeError(f"full-state loss needs matching [S, n, 3] tensors, got {pred.shape} / {meas.shape}")
    if ag.shape != pred.shape[:2]:
        raise ShapeError("ground acceleration must be [S, n]")
    if dt <= 0:
        raise ShapeError("dt must be positive")
    wx, wv, wg = (1.0, 1.0, 1.0) if norm is None else (1.0 / s**2 for s in norm)
    x, v, g = pred[..., 0], pred[..., 1], pred[..., 2]
    N = x.size
    dx, dv, dg = x - meas[..., 0], v - meas[..., 1], g - meas[..., 2]
    jx = wx * float(np.sum(dx * dx)) / N
    jv = wv * float(np.sum(dv * dv)) / N
    jg = wg * float(np.sum(dg * dg)) / N
    x_t = nn.finite_difference(x[..., None], dt)[..., 0]
    v_t = nn.finite_difference(v[..., None], dt)[..., 0]
    r1 = v - x_t
    r2 = v_t + g + gamma * ag
    jp1 = wv * float(np.sum(r1 * r1)) / N
    jp2 = wg * float(np.sum(r2 * r2)) / N
    data = jx + jv + jg
    physics = jp1 + jp2
    total = lam_d * data + lam_p * physics
    report = LossReport(total, data, physics,
                        {"x": jx, "v": jv, "g": jg, "kinematic": jp1, "equilibrium": jp2})
    if not want_grad:
        return report, None
    grad = np.empty_like(pred)
    c1 = lam_p * 2.0 * wv / N * r1
    c2 = lam_p * 2.0 * wg / N * r2
    grad[..., 0] = lam_d * 2.0 * wx / N * dx - nn.finite_difference_adjoint(c1[..., None], dt)[..., 0]
    grad[..., 1] = (lam_d * 2.0 * wv / N * dv + c1
                    + nn.finite_difference_adjoint(c2[..., None], dt)[..., 0])
    grad[..., 2] = lam_d * 2.0 * wg / N * dg + c2
    return report, grad


def full_state_loss(pred, meas, ag, gamma, dt, lambda_data=1.0, lambda_phys=1.0) -> LossReport:
    """Data misfit on (x, v, g) plus the kinematic and equilibrium residuals.

    ``pred`` and ``meas`` are [S, n, 3] tensors in physical units ordered
    (x, v, g); ``ag`` is the ground acceleration [S, n].
    """
    return _full_state(pred, meas, ag, gamma, dt, lambda_data, lambda_phys)[0]


def _accel_only(pred_x, meas_a, dt, norm=None, want_grad=False):
    pred_x = np.asarray(pred_x, dtype=np.float64)
    meas_a = np.asarray(meas_a, dtype=np.float64)
    if pred_x.shape != meas_a.shape:
        raise ShapeError(f"shape mismatch {pred_x.shape} vs {meas_a.shape}")
    if pred_x.ndim != 3:
        raise ShapeError("accel-only loss needs [S, n, 1] tensors")
    if pred_x.shape[1] < 5:
        raise ShapeError("double differentiation needs at least 5 steps")
    w = 1.0 if norm is None else 1.0 / norm[0] ** 2
    a_p = nn.finite_difference(nn.finite_difference(pred_x, dt), dt)
    d = a_p - meas_a
    N = d.size
    j = w * float(np.sum(d * d)) / N
    report = LossReport(j, j, 0.0, {"a": j})
    if not want_grad:
        return report, None
    g = nn.finite_difference_adjoint(nn.finite_difference_adjoint(2.0 * w / N * d, dt), dt)
    return report, g


def accel_only_loss(pred_x, meas_a, dt) -> LossReport:
    """Misfit between twice-differentiated predicted displacement and measured acceleration."""
    return _accel_only(pred_x, meas_a, dt)[0]


# --------------------------------------------------------------------------
# training

@dataclass
class EpochRecord:
    epoch: int
    train: LossReport
    validation: float


@dataclass
class TrainResult:
    params: nn.NetworkParams
    history: list
    best_epoch: int
    best_validation: float


def _fit_scales(params, dataset: Dataset, config: TrainingConfig, spec):
    n_in = params.descriptor["n_inputs"]
    if config.scaling == "none":
        return [1.0] * n_in, [1.0] * spec.n_outputs
    in_scale = [float(np.max(np.abs(dataset.inputs[..., j]))) or 1.0 for j in range(n_in)]
    if spec.output_mode == "full-state":
        out_scale = [float(np.max(np.abs(dataset.outputs[..., j]))) or 1.0 for j in range(3)]
    else:
        out_scale = [displacement_scale(dataset)]
    return in_scale, out_scale


def displacement_scale(dataset: Dataset) -> float:
    """Peak displacement implied by the training targets.

    Uses measured displacement when present, otherwise high-pass filtered
    double integration of the measured response acceleration.
    """
    if "x" in dataset.features:
        return float(np.max(np.abs(dataset.outputs[..., dataset.features.index("x")]))) or 1.0
    from .signal_prep import FilterSpec, accel_to_disp

    spec = FilterSpec(order=2, cutoff=0.1, sample_rate=1.0 / dataset.dt)
    a = dataset.outputs[..., dataset.features.index("a")]
    peak = max(float(np.max(np.abs(accel_to_disp(rec, dataset.dt, spec)))) for rec in a)
    return peak or 1.0


def _targets(dataset: Dataset, spec: ArchitectureSpec):
    if spec.output_mode == "full-state":
        try:
            idx = [dataset.features.index(f) for f in CASE1_OUTPUTS]
        except ValueError:
            raise ConfigError(f"full-state training needs features {CASE1_OUTPUTS}, "
                              f"dataset has {dataset.features}") from None
        return dataset.outputs[..., idx]
    if "a" not in dataset.features:
        raise ConfigError("displacement-only training needs acceleration targets")
    return dataset.outputs[..., [dataset.features.index("a")]]


class _Objective:
    def __init__(self, params, dataset, config, spec, gamma):
        self.spec = spec
        self.config = config
        self.gamma = gamma
        self.dt = dataset.dt
        in_scale, out_scale = _scales(params)
        self.x = dataset.inputs / in_scale
        self.ag = dataset.ground_accel
        self.target = _targets(dataset, spec)
        self.out_scale = out_scale
        self.norm = None if config.loss_units == "physical" else out_scale

    def evaluate(self, params, mode="infer", rng=None, want_grad=False):
        y, cache = forward(params, self.x, mode, rng, self.spec)
        pred = y * self.out_scale
        if self.spec.output_mode == "full-state":
            report, g = _full_state(pred, self.target, self.ag, self.gamma, self.dt,
                                    self.config.lambda_data, self.config.lambda_phys,
                                    self.norm, want_grad)
        else:
            report, g = _accel_only(pred, self.target, self.dt, self.norm, want_grad)
            report = LossReport(self.config.lambda_data * report.data, report.data, 0.0, report.terms)
            if g is not None:
                g = g * self.config.lambda_data
        if not want_grad:
            return report, None
        return report, backward(params, g * self.out_scale, cache, self.spec)


def train(params: nn.NetworkParams, dataset: Dataset, config: TrainingConfig,
          validation: Dataset | None = None, gamma: float = 1.0) -> TrainResult:
    """Full-batch Adam; keeps the weights with the lowest validation loss.

    Without a validation set the dropout-free training loss is used for
    model selection. Epoch 0 in the result refers to the initial weights.
    """
    if len(dataset) == 0:
        raise ConfigError("training dataset is empty")
    spec = architecture(params)
    params = params.copy()
    in_scale, out_scale = _fit_scales(params, dataset, config, spec)
    params.meta["input_scale"] = in_scale
    params.meta["output_scale"] = out_scale
    params.meta["features"] = list(spec.outputs)
    params.meta["dt"] = dataset.dt
    params.meta["gamma"] = gamma

    objective = _Objective(params, dataset, config, spec, gamma)
    val_objective = _Objective(params, validation, config, spec, gamma) if validation is not None else objective
    rng = np.random.default_rng(config.seed)

    # With no dropout and no separate validation set, the next epoch's
    # training pass already yields the selection loss for the current weights.
    shortcut = validation is None and spec.dropout == 0.0
    sel = {"best": params.copy(), "val": val_objective.evaluate(params)[0].total,
           "epoch": 0, "wait": 0}

    def record(epoch, weights, val):
        if not np.isfinite(val):
            raise TrainingError("non-finite validation loss", epoch)
        history[epoch - 1].validation = val
        if val < sel["val"]:
            sel.update(best=weights.copy(), val=val, epoch=epoch, wait=0)
            return False
        sel["wait"] += 1
        return bool(config.patience and sel["wait"] >= config.patience)

    history = []
    arrays = params.arrays
    state = None
    pending = None
    stopped = False
    for epoch in range(1, config.epochs + 1):
        report, grads = objective.evaluate(params, "train", rng, want_grad=True)
        if not np.isfinite(report.total):
            raise TrainingError("non-finite training loss", epoch)
        if pending is not None:
            stopped = record(pending, params, report.total)
            pending = None
            if stopped:
                break
        if config.grad_clip > 0:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if norm > config.grad_clip:
                grads = {k: g * (config.grad_clip / norm) for k, g in grads.items()}
        try:
            arrays, state = nn.adam_step(arrays, grads, state, lr=config.lr)
        except Exception as exc:
            raise TrainingError(str(exc), epoch) from exc
        params = nn.NetworkParams(arrays, params.descriptor, params.seed, params.meta)
        history.append(EpochRecord(epoch, report, float("nan")))
        if shortcut:
            pending = epoch
        elif record(epoch, params, val_objective.evaluate(params)[0].total):
            stopped = True
            break
    if pending is not None:
        record(pending, params, val_objective.evaluate(params)[0].total)
    if stopped:
        log.info("early stop after epoch %d (best %d)", len(history), sel["epoch"])
    return TrainResult(sel["best"], history, sel["epoch"], sel["val"])


# --------------------------------------------------------------------------
# metrics

def correlation(pred, true) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    true = np.asarray(true, dtype=np.float64).ravel()
    if pred.shape != true.shape:
        raise ShapeError("sequences differ in length")
    dp = pred - pred.mean()
    dt = true - true.mean()
    sp = np.sum(dp * dp)
    st = np.sum(dt * dt)
    if sp == 0 or st == 0:
        raise MetricError("correlation undefined for zero-variance sequence")
    # single sqrt so that r is exactly +/-1 for identical or negated inputs
    r = float(np.sum(dp * dt) / np.sqrt(sp * st))
    return min(1.0, max(-1.0, r))


@dataclass
class ErrorPDF:
    centers: np.ndarray
    mass: np.ndarray
    density: np.ndarray
    within: float
    tolerance: float


def error_pdf(true, pred, tolerance=0.05, bin_width=0.05, limit=1.0) -> ErrorPDF:
    """Histogram of (true - pred) / max|true|.

    Bins are centred on multiples of ``bin_width``; errors beyond ``limit``
    land in the outermost bins. ``within`` is the fraction of samples with
    normalized |error| <= tolerance.
    """
    true = np.asarray(true, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    if true.shape != pred.shape:
        raise ShapeError("sequences differ in length")
    peak = np.max(np.abs(true)) if true.size else 0.0
    if peak == 0:
        raise MetricError("normalized error undefined for all-zero reference")
    err = (true - pred) / peak
    half = int(round(limit / bin_width))
    centers = np.arange(-half, half + 1) * bin_width
    idx = np.clip(np.rint(err / bin_width).astype(int), -half, half) + half
    counts = np.bincount(idx, minlength=centers.size).astype(np.float64)
    mass = counts / err.size
    within = float(np.mean(np.abs(err) <= tolerance + 1e-15))
    return ErrorPDF(centers, mass, mass / bin_width, within, tolerance)
