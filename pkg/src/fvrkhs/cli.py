"""Command-line entry point: gen, train, eval, bench and predict.

Every subcommand accepts ``--config FILE`` holding flat ``key = value``
lines whose keys are flag names (``train-res`` or ``train_res``).  Values
from the file replace built-in defaults and explicit flags replace both.

Exit codes: 0 success, 2 usage or configuration error, 3 data or format
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import SUITES, SuiteAborted, SuiteConfig, emit_report, per_sample_errors, run_suite
from .checkpoint import load_checkpoint, model_from_checkpoint, save_checkpoint
from .core import LrSchedule
from .data import PDES, generate_dataset, load_dataset, save_dataset, split_dataset
from .errors import (ConfigurationError, DimensionError, DomainError, FormatError, NumericalError,
                     UsageError)
from .solvers import default_config
from .train import (EpochRecord, TrainConfig, amplitudes_of, build_model, train, train_poisson,
                    write_history_csv)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
DEFAULT_N = {"advection": 1200, "burgers": 1200, "kdv": 1200, "poisson": 10}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}") from None


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    entries = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc.strerror}", EXIT_USAGE) from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise CliError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}", EXIT_USAGE)
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _add(p: argparse.ArgumentParser, *flags, **kw):
    kw.setdefault("help", " ")
    p.add_argument(*flags, **kw)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="fvrkhs", formatter_class=fmt,
                                     description="Operator learning with function-valued RKHS networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        _add(p, "--config", default=None, help="flat key = value file overriding defaults")
        _add(p, "-v", "--verbose", action="store_true", help="log progress to stderr")
        return p

    g = command("gen", "generate a dataset of input fields and PDE solutions")
    _add(g, "--pde", choices=PDES, required=True, help="equation family")
    _add(g, "--n", type=int, default=None, help="number of samples (1200 for 1D, 10 Poisson sources)")
    _add(g, "--res", type=int, default=None, help="grid resolution (family default when omitted)")
    _add(g, "--seed", type=int, default=0, help="generation seed; 1D sample i uses seed + i")
    _add(g, "--out", required=True, help="output dataset path")
    _add(g, "--fast", type=_bool, nargs="?", const=True, default=False,
         help="coarser solver grid for Burgers/KdV")
    _add(g, "--dt", type=float, default=None, help="solver time step override")

    t = command("train", "train an RKHS or DeepONet model on a dataset")
    _add(t, "--data", required=True, help="dataset path")
    _add(t, "--model", choices=("rkhs", "deeponet"), default="rkhs", help="model kind")
    _add(t, "--train-res", type=int, default=None, help="training resolution (data resolution when omitted)")
    _add(t, "--epochs", type=int, default=4000, help="training epochs")
    _add(t, "--batch-size", type=int, default=20, help="mini-batch size")
    _add(t, "--lr-init", type=float, default=2e-4, help="peak learning rate of each cycle")
    _add(t, "--lr-final", type=float, default=2e-8, help="floor learning rate of each cycle")
    _add(t, "--lr-cycle", type=int, default=200, help="epochs per learning-rate cycle")
    _add(t, "--anchors", type=int, default=128, help="number of anchor inputs (<= 0 uses every sample)")
    _add(t, "--d-k", type=int, default=32, help="K2 output dimension")
    _add(t, "--d-a", type=int, default=1, help="A_i output dimension")
    _add(t, "--m", type=int, default=10, help="Chebyshev terms per axis")
    _add(t, "--quad", type=int, default=10, help="quadrature nodes per axis")
    _add(t, "--quad-weights", choices=("corrected", "raw"), default="corrected", help="quadrature weights")
    _add(t, "--a-eval", choices=("node", "query"), default="node", help="where A_i is evaluated")
    _add(t, "--k1-form", choices=("product", "stacked"), default="product", help="K1 construction")
    _add(t, "--pool", choices=("cells", "global"), default="cells", help="encoder pooling")
    _add(t, "--weight-decay", type=float, default=0.0, help="L2 penalty on all parameters")
    _add(t, "--n-train", type=int, default=1000, help="training samples (1D data)")
    _add(t, "--n-test", type=int, default=200, help="held-out samples excluded from training (1D data)")
    _add(t, "--seed", type=int, default=0, help="seed for initialization, split and batching")
    _add(t, "--ckpt", required=True, help="output checkpoint path")
    _add(t, "--log", default=None, help="per-epoch CSV log path (epoch, lr, loss)")

    e = command("eval", "evaluate a checkpoint on a dataset")
    _add(e, "--ckpt", required=True, help="checkpoint path")
    _add(e, "--data", required=True, help="dataset path")
    _add(e, "--res", type=int, default=None, help="evaluation resolution (data resolution when omitted)")
    _add(e, "--split", choices=("test", "all"), default="test",
         help="'test' re-derives the held-out part from the checkpoint's split record")
    _add(e, "--out", required=True, help="output directory")

    b = command("bench", "run a benchmark suite and write its report")
    _add(b, "--suite", choices=SUITES, required=True, help="benchmark suite")
    _add(b, "--out", default="report", help="report root; files go to OUT/<suite>")
    _add(b, "--seeds", type=_int_list, default=[0], help="comma-separated seeds")
    _add(b, "--epochs", type=int, default=4000, help="training epochs per model")
    _add(b, "--n-train", type=int, default=1000, help="training samples (1D suites)")
    _add(b, "--n-test", type=int, default=200, help="test samples (1D suites)")
    _add(b, "--anchors", type=int, default=128, help="number of anchor inputs")
    _add(b, "--resolutions", type=_int_list, default=None,
         help="training resolutions (suite default when omitted)")
    _add(b, "--fast", type=_bool, nargs="?", const=True, default=False,
         help="coarser solver grid for data generation")
    _add(b, "--deeponet", type=_bool, default=None, help="also train the DeepONet baseline")
    _add(b, "--data-dir", default=None, help="cache directory for generated suite datasets")

    p = command("predict", "evaluate a checkpoint at arbitrary points")
    _add(p, "--ckpt", required=True, help="checkpoint path")
    _add(p, "--input", required=True, help="CSV of input field samples, one value per line")
    _add(p, "--points", required=True, help="CSV of query points, one point per line")
    _add(p, "--out", required=True, help="CSV of predictions, one value per line")
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv=None) -> argparse.Namespace:
    """Parse with precedence defaults < config file < flags."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    command = next((tok for tok in argv if tok in COMMANDS), None)
    if path is None or command is None:
        return parser.parse_args(argv)
    sub = _subparser(parser, command)
    known = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    entries = read_config_file(path)
    unknown = sorted(set(entries) - set(known))
    if unknown:
        raise CliError(f"{path}: unknown key(s) for '{command}': {', '.join(unknown)}", EXIT_USAGE)
    for key, value in entries.items():
        action = known[key]
        if action.choices is not None and value not in action.choices:
            raise CliError(f"{path}: {key} must be one of {list(action.choices)}, got {value!r}",
                           EXIT_USAGE)
        if isinstance(action, argparse._StoreTrueAction):
            entries[key] = _bool(value)
        action.required = False
    sub.set_defaults(**entries)
    args = parser.parse_args(argv)
    missing = [k for k, a in known.items() if getattr(args, k) is None and k in _REQUIRED[command]]
    if missing:
        raise CliError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}",
                       EXIT_USAGE)
    return args


def effective_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "verbose")}


def _echo(cfg: dict) -> str:
    return "\n".join(f"{k} = {' '.join(map(str, v)) if isinstance(v, list) else v}"
                     for k, v in cfg.items()) + "\n"


def cmd_gen(args) -> None:
    n = args.n if args.n is not None else DEFAULT_N[args.pde]
    if n < 1:
        raise ConfigurationError(f"--n must be positive, got {n}")
    ds = generate_dataset(args.pde, n, seed=args.seed, resolution=args.res, fast=args.fast, dt=args.dt)
    save_dataset(ds, args.out)
    cfg = effective_config(args)
    cfg["resolved_resolution"] = ds.resolution
    if args.pde in ("burgers", "kdv"):
        cfg["resolved_dt"] = args.dt or default_config(args.pde, args.fast).dt
    Path(str(args.out) + ".cfg").write_text(_echo(cfg))
    print(f"wrote {ds.n_samples} {args.pde} samples at resolution {ds.resolution} to {args.out}")


def _model_overrides(args) -> dict:
    return dict(d_k=args.d_k, d_a=args.d_a, m=args.m, quad_n=args.quad, quad_weights=args.quad_weights,
                a_eval=args.a_eval, k1_form=args.k1_form, pool=args.pool)


def cmd_train(args) -> None:
    ds = load_dataset(args.data)
    schedule = LrSchedule(lr_init=args.lr_init, lr_final=args.lr_final, cycle_length=args.lr_cycle)
    tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, schedule=schedule,
                       weight_decay=args.weight_decay, seed=args.seed)
    overrides = _model_overrides(args) if args.model == "rkhs" else {}
    history: list[EpochRecord] = []
    if ds.pde == "poisson":
        train_set = ds if args.train_res in (None, ds.resolution) else ds.at_resolution(args.train_res)
        model = build_model(args.model, train_set, n_anchors=args.anchors, seed=args.seed, **overrides)
        ck = train_poisson(model, amplitudes_of(ds), tcfg, on_epoch=history.append)
    else:
        train_set, _ = split_dataset(ds, args.n_train, args.n_test, seed=args.seed)
        if args.train_res is not None:
            train_set = train_set.at_resolution(args.train_res)
        model = build_model(args.model, train_set, n_anchors=args.anchors, seed=args.seed, **overrides)
        ck = train(model, train_set, tcfg, on_epoch=history.append)
    ck.meta["cli_config"] = effective_config(args)
    ck.meta["split"] = dict(n_train=args.n_train, n_test=args.n_test, seed=args.seed)
    save_checkpoint(ck, args.ckpt)
    if args.log:
        write_history_csv(history, args.log)
    final = f"{ck.meta['final_loss']:.6g}" if ck.meta["final_loss"] is not None else "n/a"
    print(f"trained {args.model} for {args.epochs} epochs, final loss {final}; wrote {args.ckpt}")


def cmd_eval(args) -> None:
    ck = load_checkpoint(args.ckpt)
    ds = load_dataset(args.data)
    if ds.dim != ck.dim:
        raise DimensionError(f"checkpoint is for {ck.dim}D inputs but {args.data} holds {ds.dim}D data")
    split = ck.meta.get("split")
    test = ds
    if args.split == "test" and ds.pde != "poisson" and split:
        _, test = split_dataset(ds, split["n_train"], split["n_test"], seed=split["seed"])
    model = model_from_checkpoint(ck)
    res = args.res or test.resolution
    errs = per_sample_errors(model, test, res)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "per_sample_rel_l2.csv", errs, fmt="%.17g")
    cfg = effective_config(args)
    lines = [f"{k}={v}" for k, v in cfg.items()]
    lines += [f"kind={ck.kind}", f"n_samples={len(errs)}", f"resolution={res}",
              f"rel_l2_mean={float(errs.mean())!r}", f"rel_l2_max={float(errs.max())!r}"]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print(f"mean relative L2 {errs.mean():.6f} over {len(errs)} samples at resolution {res}")


def cmd_bench(args) -> None:
    root = Path(args.out) / args.suite
    for seed in args.seeds:
        cfg = SuiteConfig(n_train=args.n_train, n_test=args.n_test, epochs=args.epochs, seed=seed,
                          fast=args.fast, n_anchors=args.anchors, deeponet=args.deeponet,
                          train_resolutions=tuple(args.resolutions) if args.resolutions else None,
                          data_dir=args.data_dir)
        out = root if len(args.seeds) == 1 else root / f"seed{seed}"
        try:
            report = run_suite(args.suite, cfg)
        except SuiteAborted as exc:
            emit_report(exc.report, out)
            raise NumericalError(f"{exc} (partial report in {out})") from exc
        emit_report(report, out)
        for name, ck in report.checkpoints.items():
            save_checkpoint(ck, out / f"{name}.ckpt")
        summary = ", ".join(f"{k}={v:.4f}" for k, v in sorted(report.metrics.items())
                            if isinstance(v, float))
        print(f"{args.suite} seed {seed}: {summary}; report in {out}")


def _read_csv_values(path, what: str) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except OSError as exc:
        raise FormatError(f"cannot read {what} file {path}: {exc}") from None
    except ValueError as exc:
        raise FormatError(f"{path}: {what} file must hold comma-separated floats ({exc})") from None
    return arr


def cmd_predict(args) -> None:
    ck = load_checkpoint(args.ckpt)
    model = model_from_checkpoint(ck)
    values = _read_csv_values(args.input, "input").ravel()
    points = _read_csv_values(args.points, "points")
    if points.shape[1] != ck.dim:
        raise DimensionError(f"points have {points.shape[1]} coordinates, checkpoint is {ck.dim}D")
    if ck.dim == 2:
        side = int(round(np.sqrt(values.size)))
        if side * side != values.size:
            raise DimensionError(f"2D input needs a square number of values, got {values.size}")
        values = values.reshape(side, side)
    if np.any(points < 0) or np.any(points > 1):
        raise DomainError("query points must lie in the unit interval/square")
    pred = model.predict_batch(values, points)[0]
    np.savetxt(args.out, pred, fmt="%.17g")


_REQUIRED = {"gen": ("pde", "out"), "train": ("data", "ckpt"), "eval": ("ckpt", "data", "out"),
             "bench": ("suite",), "predict": ("ckpt", "input", "points", "out")}
COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "bench": cmd_bench,
            "predict": cmd_predict}


def run(argv=None) -> int:
    """Execute one CLI invocation and return its exit code."""
    try:
        args = parse_args(argv)
    except CliError as exc:
        print(f"fvrkhs: error: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except NumericalError as exc:
        code, msg = EXIT_NUMERICAL, f"numerical failure: {exc}"
    except (FormatError, DimensionError, DomainError, FileNotFoundError) as exc:
        code, msg = EXIT_DATA, f"data error: {exc}"
    except OSError as exc:
        code, msg = EXIT_DATA, f"I/O error: {exc}"
    except (ConfigurationError, UsageError) as exc:
        code, msg = EXIT_USAGE, f"usage error: {exc}"
    else:
        return EXIT_OK
    print(f"fvrkhs: {msg}".replace("\n", " "), file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())
