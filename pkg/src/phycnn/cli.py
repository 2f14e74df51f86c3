"""Command-line pipeline: generate, partition, train, predict, fragility.

Every command writes a resolved-config snapshot next to its outputs so the
run can be replayed with ``--config <snapshot>``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig, dump_config, load_config
from .dynamics import (CASE1_OUTPUTS, CASE2_OUTPUTS, G_ACCEL, Dataset, SystemParams,
                       generate_dataset, simulate_sdof, synth_ground_motion)
from .errors import ConfigError, DataError, PhyCNNError
from .fragility import LimitState, peak_response_simulator, peak_response_surrogate, run_assessment
from .model import ArchitectureSpec, TrainingConfig, architecture, build_network, correlation, error_pdf, predict, \
    train
from .nn import NetworkParams
from .partition import FeaturePoint, elbow_distortions, random_partition, select_partition

log = logging.getLogger("phycnn")

MODES = ("case1", "case2", "baseline")
SUITE_OFFSET = 50_000


def system_params(cfg: RunConfig) -> SystemParams:
    s = cfg.system
    return SystemParams(s.m, s.c, s.k1, s.k2, s.gamma)


def motion_suite(cfg: RunConfig, count: int, offset: int, pga_range, prefix: str):
    m = cfg.motions
    rng = np.random.default_rng([cfg.run.seed, offset])
    pgas = rng.uniform(pga_range[0], pga_range[1], size=count)
    base = cfg.run.seed * 100_000 + offset
    return [synth_ground_motion(base + i, m.duration, m.dt, (m.f_lo, m.f_hi),
                                amplitude=pgas[i] * G_ACCEL, taper=m.taper,
                                label=f"{prefix}{i:03d}")
            for i in range(count)]


def _snapshot(cfg: RunConfig, out: Path, name: str):
    (out / f"{name}.config.ini").write_text(dump_config(cfg))


def _ensure_dir(path: Path):
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {path}: {exc}") from None


# --------------------------------------------------------------------------
# commands

def cmd_generate(cfg: RunConfig, out: Path):
    params = system_params(cfg)
    motions = motion_suite(cfg, cfg.motions.count, 0, (cfg.motions.pga_min_g, cfg.motions.pga_max_g), "rec")
    _ensure_dir(out / "motions")
    _ensure_dir(out / "trajectories")
    records = []
    for gm in motions:
        tr = simulate_sdof(params, gm)
        io.write_motion(out / "motions" / f"{gm.label}.csv", gm)
        io.write_trajectory(out / "trajectories" / f"{gm.label}.csv", tr)
        records.append({"id": gm.label, "pga_g": gm.pga, "peak_disp_m": float(np.max(np.abs(tr.x)))})
    manifest = {
        "records": records,
        "dt": cfg.motions.dt,
        "n": motions[0].n,
        "seed": cfg.run.seed,
        "system": vars(cfg.system),
    }
    io.write_json(out / "dataset.json", manifest)
    _snapshot(cfg, out, "generate")
    print(f"wrote {len(records)} records ({motions[0].n} steps) to {out}")


def load_records(out: Path):
    manifest = io.read_json(out / "dataset.json")
    motions, trajs = {}, {}
    for rec in manifest["records"]:
        rid = rec["id"]
        motions[rid] = io.read_motion(out / "motions" / f"{rid}.csv", rid)
        trajs[rid] = io.read_trajectory(out / "trajectories" / f"{rid}.csv")
    return manifest, motions, trajs


def cmd_partition(cfg: RunConfig, out: Path):
    manifest = io.read_json(out / "dataset.json")
    p = cfg.partition
    ids = [r["id"] for r in manifest["records"]]
    if p.method == "random":
        part = random_partition(ids, min(p.n_train, len(ids)),
                                min(p.n_validation, max(0, len(ids) - p.n_train)), seed=cfg.run.seed)
    else:
        feats = [FeaturePoint(r["id"], r["pga_g"], r["peak_disp_m"] * 100.0) for r in manifest["records"]]
        part = select_partition(feats, p.k, p.n_validation, p.boundary_cm, seed=cfg.run.seed,
                                restarts=p.restarts)
        inside = [f for f in feats if f.peak_disp <= p.boundary_cm]
        kmax = min(p.k_max, len(inside))
        part.elbow = elbow_distortions(np.array([f.coords for f in inside]), range(1, kmax + 1),
                                       seed=cfg.run.seed, restarts=p.restarts)
        print("k  distortion")
        for k, d in part.elbow:
            print(f"{k:<2d} {d:.6g}")
    (out / "partition.json").write_text(part.to_json())
    _snapshot(cfg, out, "partition")
    for label in ("training", "validation", "prediction"):
        members = part.ids(label)
        print(f"{label:<11s} {len(members):3d}  {' '.join(members)}")


def _mode_config(cfg: RunConfig, mode: str) -> RunConfig:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "baseline":
        cfg.training.lambda_phys = 0.0
    return cfg


def _arch(cfg: RunConfig, mode: str) -> ArchitectureSpec:
    a = cfg.architecture
    return ArchitectureSpec(conv_layers=tuple(zip(a.conv_filters, a.conv_kernels)),
                            fc_hidden=a.fc_hidden, dropout=a.dropout,
                            output_mode="displacement-only" if mode == "case2" else "full-state",
                            time_reversed=a.time_reversed)


def _dataset(ids, motions, trajs, mode) -> Dataset:
    outputs = CASE2_OUTPUTS if mode == "case2" else CASE1_OUTPUTS
    return generate_dataset(None, [motions[i] for i in ids], outputs, [trajs[i] for i in ids])


def _load_partition(out: Path):
    from .partition import PartitionManifest

    path = out / "partition.json"
    if not path.exists():
        raise DataError(f"missing {path}; run `partition` first")
    return PartitionManifest.from_json(path.read_text())


def cmd_train(cfg: RunConfig, out: Path, mode: str):
    _, motions, trajs = load_records(out)
    part = _load_partition(out)
    train_ids = part.ids("training")
    if not train_ids:
        raise DataError("partition has no training records")
    val_ids = part.ids("validation")
    dataset = _dataset(train_ids, motions, trajs, mode)
    validation = _dataset(val_ids, motions, trajs, mode) if val_ids else None
    spec = _arch(cfg, mode)
    t = cfg.training
    tcfg = TrainingConfig(epochs=t.epochs, lr=t.lr, lambda_data=t.lambda_data, lambda_phys=t.lambda_phys,
                          seed=cfg.run.seed, patience=t.patience, scaling=t.scaling, loss_units=t.loss_units)
    params = build_network(spec, 1, spec.n_outputs, seed=cfg.run.seed)
    result = train(params, dataset, tcfg, validation, gamma=cfg.system.gamma)
    result.params.save(out / f"model_{mode}.bin")
    io.write_history(out / f"history_{mode}.csv", result.history)
    pred = predict(result.params, dataset.inputs)
    xi = result.params.meta["features"].index("x")
    r = [correlation(pred[i, :, xi], trajs[rid].x) for i, rid in enumerate(train_ids)]
    metrics = {
        "mode": mode,
        "best_epoch": result.best_epoch,
        "best_selection_loss": result.best_validation,
        "epochs_run": len(result.history),
        "final_train_loss": result.history[-1].train.total if result.history else None,
        "train_r_displacement": dict(zip(train_ids, r)),
    }
    io.write_json(out / f"metrics_{mode}.json", metrics)
    _snapshot(cfg, out, f"train_{mode}")
    print(f"{mode}: best epoch {result.best_epoch}, mean training r(x) = {np.mean(r):.4f}")


def _load_model(out: Path, mode: str, cfg: RunConfig) -> NetworkParams:
    path = out / f"model_{mode}.bin"
    if not path.exists():
        raise DataError(f"missing {path}; run `train --mode {mode}` first")
    params = NetworkParams.load(path)
    want, have = _arch(cfg, mode), architecture(params)
    if (want.conv_layers, want.fc_hidden, want.outputs) != (have.conv_layers, have.fc_hidden, have.outputs):
        raise ConfigError(f"{path} was trained with {have.conv_layers} / fc {have.fc_hidden} "
                          f"-> {list(have.outputs)}, config asks for {want.conv_layers} / fc "
                          f"{want.fc_hidden} -> {list(want.outputs)}")
    return params


def cmd_predict(cfg: RunConfig, out: Path, mode: str):
    """Predict every record in the manifest; summaries are grouped by partition label."""
    _, motions, trajs = load_records(out)
    part = _load_partition(out)
    params = _load_model(out, mode, cfg)
    feats = params.meta["features"]
    xi = feats.index("x")
    pdir = out / f"predictions_{mode}"
    _ensure_dir(pdir)
    records, by_label = {}, {}
    for rid in sorted(part.labels):
        gm, tr = motions[rid], trajs[rid]
        pred = predict(params, gm)[0]
        truth = np.stack([tr.feature(f) for f in feats], axis=-1)
        io.write_prediction(pdir / f"{rid}.csv", gm.time, pred, feats, truth)
        r = correlation(pred[:, xi], tr.x)
        records[rid] = {"set": part.labels[rid], "r_x": r, "within_5pct": error_pdf(tr.x, pred[:, xi]).within}
        by_label.setdefault(part.labels[rid], []).append(r)
    summary = {lab: {"count": len(rs), "median_r_x": float(np.median(rs)), "mean_r_x": float(np.mean(rs))}
               for lab, rs in sorted(by_label.items())}
    io.write_json(out / f"predict_{mode}.json", {"records": records, "summary": summary})
    _snapshot(cfg, out, f"predict_{mode}")
    for lab, st in summary.items():
        print(f"{mode} {lab:<11s} {st['count']:3d} records, median r(x) = {st['median_r_x']:.4f}")


def cmd_fragility(cfg: RunConfig, out: Path, mode: str):
    f = cfg.fragility
    if f.suite_size < 1:
        raise DataError("fragility suite is empty")
    suite = motion_suite(cfg, f.suite_size, SUITE_OFFSET, (f.pga_min_g, f.pga_max_g), "ida")
    if f.response == "simulator":
        response = peak_response_simulator(system_params(cfg))
    else:
        response = peak_response_surrogate(_load_model(out, mode, cfg))
    ls = LimitState(f.drift_threshold, f.story_height)
    res = run_assessment(response, suite, ls, f.scale_factors)
    fdir = out / f"fragility_{mode if f.response == 'surrogate' else 'simulator'}"
    _ensure_dir(fdir)
    io.write_observations(fdir / "observations.csv", res.observations)
    io.write_curve(fdir / "curve.csv", res.grid, res.probabilities)
    (fdir / "params.json").write_text(res.params.to_json())
    _snapshot(cfg, fdir, "fragility")
    print(f"median = {res.params.median:.4f} g, beta = {res.params.beta:.4f} "
          f"({len(res.observations)} observations, {len(res.failures)} failures)")


# --------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="phycnn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("generate", "partition", "train", "predict", "fragility"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI config file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--out", type=Path, help="override run.out_dir")
        if name in ("train", "predict", "fragility"):
            p.add_argument("--mode", choices=MODES, default="case1")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.run.seed = args.seed
        if args.out is not None:
            cfg.run.out_dir = str(args.out)
        out = Path(cfg.run.out_dir)
        if args.command == "generate":
            _ensure_dir(out)
            cmd_generate(cfg, out)
        elif args.command == "partition":
            cmd_partition(cfg, out)
        else:
            cfg = _mode_config(cfg, args.mode)
            {"train": cmd_train, "predict": cmd_predict, "fragility": cmd_fragility}[args.command](
                cfg, out, args.mode)
    except PhyCNNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
