"""Evaluation metrics, resolution-transfer matrices and benchmark suites."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, model_from_checkpoint
from .data import (OperatorDataset, generate_dataset, load_dataset, poisson_amplitudes, poisson_dataset,
                   save_dataset, split_dataset)
from .errors import ConfigurationError, FvrkhsError, UsageError
from .grid import grid_points, resample_values
from .model import FieldOperator
from .svg import heatmap, line_plot
from .train import TrainConfig, build_model, train, train_poisson

log = logging.getLogger(__name__)

SUITES = ("advection", "burgers", "kdv", "poisson")
TRANSFER_RESOLUTIONS = (64, 128, 256, 512)


def _as_model(obj) -> FieldOperator:
    return model_from_checkpoint(obj) if isinstance(obj, Checkpoint) else obj


def at_eval_resolution(test_set: OperatorDataset, resolution: int) -> OperatorDataset:
    """The test set sampled on the ``resolution`` grid.

    Exact stride subsampling when the grids nest, otherwise resampling
    (spectral in 1D, bilinear in 2D).
    """
    if resolution == test_set.resolution:
        return test_set
    try:
        return test_set.at_resolution(resolution)
    except FvrkhsError:
        return OperatorDataset(test_set.pde, resample_values(test_set.inputs, resolution, test_set.dim),
                               resample_values(test_set.targets, resolution, test_set.dim),
                               test_set.seed)


def per_sample_errors(model, test_set: OperatorDataset, eval_resolution: int | None = None,
                      batch: int = 50) -> np.ndarray:
    model = _as_model(model)
    if test_set.n_samples == 0:
        raise UsageError("cannot evaluate on an empty test set")
    res = eval_resolution or test_set.resolution
    ds = at_eval_resolution(test_set, res)
    pts = grid_points(res, ds.dim).reshape(-1, ds.dim)
    errs = []
    for i in range(0, ds.n_samples, batch):
        pred = model.predict_batch(ds.inputs[i:i + batch], pts)
        tgt = ds.targets[i:i + batch].reshape(len(pred), -1)
        errs.append(np.linalg.norm(pred - tgt, axis=1) / np.linalg.norm(tgt, axis=1))
    return np.concatenate(errs)


def eval_rel_l2(model, test_set: OperatorDataset, eval_resolution: int | None = None) -> float:
    """Mean per-sample relative L2 error with predictions queried on the eval grid."""
    return float(per_sample_errors(model, test_set, eval_resolution).mean())


@dataclass
class TransferMatrix:
    train_resolutions: list[int]
    test_resolutions: list[int]
    errors: np.ndarray  # NaN marks an absent checkpoint

    def row_spread(self, i: int) -> float:
        return float(np.max(self.errors[i]) - np.min(self.errors[i]))

    def present_rows(self) -> list[int]:
        return [i for i in range(len(self.train_resolutions)) if np.all(np.isfinite(self.errors[i]))]

    def rows(self) -> list[list[str]]:
        out = [["train\\test"] + [f"s'={s}" for s in self.test_resolutions]]
        for s, row in zip(self.train_resolutions, self.errors):
            out.append([f"s={s}"] + ["absent" if np.isnan(e) else f"{e:.6f}" for e in row])
        return out


def transfer_matrix(checkpoints: dict, test_set: OperatorDataset, resolutions) -> TransferMatrix:
    """Evaluate each checkpoint at every test resolution; absent checkpoints give NaN rows."""
    train_res = sorted(checkpoints)
    resolutions = list(resolutions)
    errors = np.full((len(train_res), len(resolutions)), np.nan)
    for i, s in enumerate(train_res):
        if checkpoints[s] is None:
            continue
        model = _as_model(checkpoints[s])
        for j, r in enumerate(resolutions):
            errors[i, j] = eval_rel_l2(model, test_set, r)
    return TransferMatrix(train_res, resolutions, errors)


@dataclass
class SuiteConfig:
    n_train: int = 1000
    n_test: int = 200
    epochs: int = 4000
    batch_size: int = 20
    seed: int = 0
    fast: bool = False
    train_resolutions: tuple | None = None
    test_resolutions: tuple | None = None
    n_anchors: int = 128
    deeponet: bool | None = None
    weight_decay: float = 0.0
    poisson_sources: int = 10
    poisson_test_a: float = 15.0
    poisson_eval_grid: int = 101
    model: dict = field(default_factory=dict)
    data_dir: str | None = None

    def for_suite(self, suite: str) -> "SuiteConfig":
        """Copy with the suite's default resolutions and baseline switch filled in."""
        if suite not in SUITES:
            raise ConfigurationError(f"unknown suite {suite!r}; expected one of {SUITES}")
        defaults = {
            "advection": ((256,), (256, 512), False),
            "burgers": (TRANSFER_RESOLUTIONS, TRANSFER_RESOLUTIONS, True),
            "kdv": (TRANSFER_RESOLUTIONS, TRANSFER_RESOLUTIONS, True),
            "poisson": ((64,), (self.poisson_eval_grid,), True),
        }[suite]
        return dataclasses.replace(
            self,
            train_resolutions=tuple(self.train_resolutions or defaults[0]),
            test_resolutions=tuple(self.test_resolutions or defaults[1]),
            deeponet=defaults[2] if self.deeponet is None else self.deeponet)

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                           weight_decay=self.weight_decay, seed=self.seed)


@dataclass
class BenchReport:
    suite: str
    config: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)  # model -> {resolution: error}
    transfer: TransferMatrix | None = None
    tables: dict = field(default_factory=dict)  # file name -> rows
    figures: dict = field(default_factory=dict)  # file name -> svg text
    metrics: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)
    checkpoints: dict = field(default_factory=dict)
    partial: bool = False

    def artifacts(self) -> list[str]:
        return sorted(self.tables) + sorted(self.figures) + ["summary.txt"]


class SuiteAborted(FvrkhsError):
    """Training failed mid-suite; ``report`` holds what finished."""

    def __init__(self, message: str, report: BenchReport):
        super().__init__(message)
        self.report = report


def _error_table(errors: dict, resolutions) -> list[list[str]]:
    rows = [["model"] + [f"s={s}" for s in resolutions]]
    for name, by_res in errors.items():
        rows.append([name] + [f"{by_res[s]:.6f}" if s in by_res else "absent" for s in resolutions])
    return rows


def _overlay(title: str, x: np.ndarray, exact: np.ndarray, preds: dict) -> str:
    series = [("exact", x, exact)] + [(name, x, p) for name, p in preds.items()]
    return line_plot(series, title=title, xlabel="x", ylabel="u(x, 1)")


def _loss_plot(title: str, histories: dict) -> str:
    series = [(name, np.arange(len(h)), np.asarray(h)) for name, h in histories.items() if len(h)]
    return line_plot(series, title=title, xlabel="epoch", ylabel="training loss", log_y=True)


def _fit(kind: str, train_set: OperatorDataset, cfg: SuiteConfig) -> Checkpoint:
    overrides = cfg.model if kind == "rkhs" else {}
    model = build_model(kind, train_set, n_anchors=cfg.n_anchors, seed=cfg.seed, **overrides)
    t0 = time.perf_counter()
    ck = train(model, train_set, cfg.train_config())
    ck.meta["seconds"] = round(time.perf_counter() - t0, 3)
    ck.meta["model"] = model
    return ck


def _suite_data(suite: str, cfg: SuiteConfig) -> tuple[OperatorDataset, OperatorDataset]:
    """Generate the suite's dataset, or reuse the copy cached under ``cfg.data_dir``."""
    total = cfg.n_train + cfg.n_test
    path = None
    if cfg.data_dir is not None:
        mode = "fast" if cfg.fast else "full"
        path = Path(cfg.data_dir) / f"{suite}_n{total}_seed{cfg.seed}_{mode}.bin"
    if path is not None and path.exists():
        ds = load_dataset(path)
        log.info("loaded cached %s data from %s", suite, path)
    else:
        ds = generate_dataset(suite, total, seed=cfg.seed, fast=cfg.fast)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            save_dataset(ds, path)
    return split_dataset(ds, cfg.n_train, cfg.n_test, seed=cfg.seed)


def _run_1d(suite: str, cfg: SuiteConfig, report: BenchReport) -> None:
    t0 = time.perf_counter()
    train_full, test_full = _suite_data(suite, cfg)
    report.runtime["datagen_seconds"] = round(time.perf_counter() - t0, 3)
    report.metrics["generation_resolution"] = train_full.resolution
    kinds = ["rkhs"] + (["deeponet"] if cfg.deeponet else [])
    ckpts: dict[str, dict[int, Checkpoint | None]] = {k: {} for k in kinds}
    histories = {}
    for s in cfg.train_resolutions:
        train_s = train_full.at_resolution(s)
        for kind in kinds:
            ckpts[kind][s] = None
            try:
                ck = _fit(kind, train_s, cfg)
            except FvrkhsError as exc:
                report.partial = True
                raise SuiteAborted(f"{suite}: {kind} training at s={s} aborted: {exc}", report) from exc
            ckpts[kind][s] = ck
            report.checkpoints[f"{kind}_s{s}"] = ck
            report.runtime[f"{kind}_s{s}_train_seconds"] = ck.meta["seconds"]
            histories[f"{kind} s={s}"] = ck.meta["loss_history"]
            report.errors.setdefault(kind, {})[s] = eval_rel_l2(ck.meta["model"], test_full, s)

    example = test_full.subset([0])
    if suite == "advection":
        s = cfg.train_resolutions[0]
        model = ckpts["rkhs"][s].meta["model"]
        report.tables["table0.csv"] = [["model", "train_res"] + [f"s'={r}" for r in cfg.test_resolutions],
                                       ["rkhs", str(s)] + [f"{eval_rel_l2(model, test_full, r):.6f}"
                                                           for r in cfg.test_resolutions]]
        for r in cfg.test_resolutions:
            ex = at_eval_resolution(example, r)
            x = grid_points(r, 1)
            pred = model.predict_batch(ex.inputs, x)[0]
            report.figures[f"fig2_advection_s{r}.svg"] = _overlay(
                f"Advection, trained at s={s}, evaluated at s'={r}", x, ex.targets[0], {"rkhs": pred})
            report.metrics[f"rkhs_s{s}_eval{r}"] = eval_rel_l2(model, test_full, r)
        report.figures["fig3_advection_loss.svg"] = _loss_plot("Advection training loss", histories)
        report.metrics["rel_l2"] = report.metrics[f"rkhs_s{s}_eval{cfg.test_resolutions[0]}"]
        return

    main_table, transfer_table, overlay_fig, val_fig = {
        "burgers": ("table1.csv", "table2.csv", "fig4_burgers_overlay.svg", "fig3_burgers_validation.svg"),
        "kdv": ("table4.csv", "table3.csv", "fig5_kdv_overlay.svg", "fig6_kdv_validation.svg"),
    }[suite]
    report.tables[main_table] = _error_table(report.errors, cfg.train_resolutions)
    report.transfer = transfer_matrix(
        {s: ckpts["rkhs"][s].meta["model"] for s in cfg.train_resolutions}, test_full, cfg.test_resolutions)
    report.tables[transfer_table] = report.transfer.rows()
    for i, s in enumerate(report.transfer.train_resolutions):
        report.metrics[f"transfer_row_spread_s{s}"] = report.transfer.row_spread(i)
    s = max(cfg.train_resolutions)
    ex = at_eval_resolution(example, s)
    x = grid_points(s, 1)
    preds = {k: ckpts[k][s].meta["model"].predict_batch(ex.inputs, x)[0] for k in kinds}
    report.figures[overlay_fig] = _overlay(f"{suite}: test sample at s={s}", x, ex.targets[0], preds)
    val_series = [(k, np.array(cfg.train_resolutions, dtype=float),
                   np.array([report.errors[k][r] for r in cfg.train_resolutions])) for k in kinds]
    report.figures[val_fig] = line_plot(val_series, title=f"{suite}: test relative L2 vs resolution",
                                        xlabel="s", ylabel="relative L2")
    for k in kinds:
        for r in cfg.train_resolutions:
            report.metrics[f"{k}_s{r}"] = report.errors[k][r]


def _run_poisson(cfg: SuiteConfig, report: BenchReport) -> None:
    a_values = poisson_amplitudes(cfg.poisson_sources, cfg.seed)
    report.metrics["train_amplitudes"] = " ".join(f"{a:g}" for a in a_values)
    train_set = poisson_dataset(a_values, cfg.train_resolutions[0], cfg.seed)
    test_set = poisson_dataset([cfg.poisson_test_a], cfg.poisson_eval_grid, cfg.seed)
    kinds = ["rkhs"] + (["deeponet"] if cfg.deeponet else [])
    histories = {}
    grid = grid_points(cfg.poisson_eval_grid, 2)
    maps = {}
    for kind in kinds:
        overrides = cfg.model if kind == "rkhs" else {}
        model = build_model(kind, train_set, n_anchors=cfg.n_anchors, seed=cfg.seed, **overrides)
        t0 = time.perf_counter()
        try:
            ck = train_poisson(model, a_values, cfg.train_config())
        except FvrkhsError as exc:
            report.partial = True
            raise SuiteAborted(f"poisson: {kind} training aborted: {exc}", report) from exc
        report.runtime[f"{kind}_train_seconds"] = round(time.perf_counter() - t0, 3)
        report.checkpoints[kind] = ck
        histories[kind] = ck.meta["loss_history"]
        err = eval_rel_l2(model, test_set, cfg.poisson_eval_grid)
        report.errors[kind] = {cfg.poisson_eval_grid: err}
        report.metrics[f"{kind}_a{cfg.poisson_test_a:g}"] = err
        n = cfg.poisson_eval_grid
        maps[kind] = model.predict_batch(test_set.inputs, grid).reshape(n, n)
    exact = test_set.targets[0]
    report.tables["table5.csv"] = [["model", "a", "grid", "rel_l2"]] + [
        [k, f"{cfg.poisson_test_a:g}", f"{cfg.poisson_eval_grid}x{cfg.poisson_eval_grid}",
         f"{report.errors[k][cfg.poisson_eval_grid]:.6f}"] for k in kinds]
    lo, hi = float(exact.min()), float(exact.max())
    report.figures["fig7_poisson_exact.svg"] = heatmap(exact, f"Exact solution, a={cfg.poisson_test_a:g}", lo, hi)
    report.figures["fig7_poisson_pred.svg"] = heatmap(maps["rkhs"], "RKHS prediction", lo, hi)
    report.figures["fig7_poisson_diff.svg"] = heatmap(maps["rkhs"] - exact, "Prediction minus exact")
    report.figures["fig7_poisson_loss.svg"] = _loss_plot("Poisson training loss (MSE)", histories)


def run_suite(suite: str, cfg: SuiteConfig | None = None) -> BenchReport:
    """Train, evaluate and assemble the tables and figures for one benchmark suite."""
    cfg = (cfg or SuiteConfig()).for_suite(suite)
    snapshot = dataclasses.asdict(cfg)
    report = BenchReport(suite=suite, config=snapshot)
    report.metrics["error_aggregation"] = "mean of per-sample relative L2"
    report.metrics["n_test"] = cfg.n_test if suite != "poisson" else 1
    t0 = time.perf_counter()
    if suite == "poisson":
        _run_poisson(cfg, report)
    else:
        _run_1d(suite, cfg, report)
    report.runtime["total_seconds"] = round(time.perf_counter() - t0, 3)
    for ck in report.checkpoints.values():
        ck.meta.pop("model", None)
    return report


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _summary_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return str(v)


def emit_report(report: BenchReport, out_dir, include_runtime: bool = True) -> list[Path]:
    """Write tables, figures and summary.txt under ``out_dir``; returns the written paths.

    Runtime values are the only non-deterministic fields; pass
    ``include_runtime=False`` for byte-stable summaries.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, rows in sorted(report.tables.items()):
            (out / name).write_text(_csv_text(rows))
            written.append(out / name)
        for name, text in sorted(report.figures.items()):
            (out / name).write_text(text)
            written.append(out / name)
        lines = [f"suite={report.suite}", f"partial={str(report.partial).lower()}"]
        lines += [f"config.{k}={_summary_value(v)}" for k, v in sorted(report.config.items())]
        lines += [f"metric.{k}={_summary_value(v)}" for k, v in sorted(report.metrics.items())]
        for model, by_res in sorted(report.errors.items()):
            lines += [f"error.{model}.s{s}={e!r}" for s, e in sorted(by_res.items())]
        if include_runtime:
            lines += [f"runtime.{k}={_summary_value(v)}" for k, v in sorted(report.runtime.items())]
        lines.append("artifacts=" + " ".join(report.artifacts()))
        (out / "summary.txt").write_text("\n".join(lines) + "\n")
        written.append(out / "summary.txt")
    except OSError as exc:
        raise OSError(f"writing report to {out}: {exc}") from exc
    return written
