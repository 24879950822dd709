import subprocess
import sys

import numpy as np
import pytest

from fvrkhs.checkpoint import load_checkpoint
from fvrkhs.cli import build_parser, run
from fvrkhs.data import load_dataset, save_dataset, generate_dataset


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run(["gen", "--pde", "advection", "--n", "12", "--res", "32", "--seed", "1",
                "--out", str(d / "adv.bin")]) == 0
    assert run(["train", "--data", str(d / "adv.bin"), "--epochs", "1", "--n-train", "8",
                "--n-test", "4", "--anchors", "4", "--batch-size", "4", "--ckpt", str(d / "m.ckpt"),
                "--log", str(d / "log.csv")]) == 0
    return d


def test_gen_writes_dataset_and_config_echo(work):
    ds = load_dataset(work / "adv.bin")
    assert ds.n_samples == 12 and ds.resolution == 32 and ds.seed == 1
    echo = (work / "adv.bin.cfg").read_text()
    assert "pde = advection" in echo and "seed = 1" in echo


def test_gen_poisson_default_draws_ten_sources(tmp_path):
    assert run(["gen", "--pde", "poisson", "--res", "16", "--out", str(tmp_path / "p.bin")]) == 0
    ds = load_dataset(tmp_path / "p.bin")
    amps = np.round(ds.inputs.max(axis=(1, 2)) / ds.inputs.max(axis=(1, 2)).max() * 1e6)
    assert ds.n_samples == 10 and len(set(amps)) == 10


def test_train_records_config_and_log(work):
    ck = load_checkpoint(work / "m.ckpt")
    assert ck.kind == "rkhs" and ck.meta["cli_config"]["epochs"] == 1
    assert ck.meta["split"] == {"n_train": 8, "n_test": 4, "seed": 0}
    assert (work / "log.csv").read_text().splitlines()[0] == "epoch,lr,loss"


def test_train_defaults_follow_reference_schedule():
    args = build_parser().parse_args(["train", "--data", "x", "--ckpt", "y"])
    assert args.epochs == 4000 and args.lr_init == 2e-4 and args.lr_cycle == 200


def test_eval_writes_summary(work):
    out = work / "ev"
    assert run(["eval", "--ckpt", str(work / "m.ckpt"), "--data", str(work / "adv.bin"),
                "--res", "64", "--out", str(out)]) == 0
    summary = (out / "summary.txt").read_text()
    assert "n_samples=4" in summary and "resolution=64" in summary
    assert len((out / "per_sample_rel_l2.csv").read_text().split()) == 4


def test_predict_round_trip(work, tmp_path):
    ds = load_dataset(work / "adv.bin")
    np.savetxt(tmp_path / "f.csv", ds.inputs[0], fmt="%.17g")
    np.savetxt(tmp_path / "x.csv", [0.0, 0.25, 0.5], fmt="%.17g")
    assert run(["predict", "--ckpt", str(work / "m.ckpt"), "--input", str(tmp_path / "f.csv"),
                "--points", str(tmp_path / "x.csv"), "--out", str(tmp_path / "u.csv")]) == 0
    assert np.loadtxt(tmp_path / "u.csv").shape == (3,)


def test_identical_invocations_give_identical_bytes(work, tmp_path):
    argv = ["train", "--data", str(work / "adv.bin"), "--epochs", "1", "--n-train", "8",
            "--n-test", "4", "--anchors", "4", "--batch-size", "4"]
    assert run(argv + ["--ckpt", str(tmp_path / "a.ckpt")]) == 0
    assert run(argv + ["--ckpt", str(tmp_path / "b.ckpt")]) == 0
    a, b = (tmp_path / "a.ckpt").read_bytes(), (tmp_path / "b.ckpt").read_bytes()
    assert a.replace(b"a.ckpt", b"b.ckpt") == b


def test_config_file_precedence(work, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# experiment\ndata = {work / 'adv.bin'}\nepochs = 2\nn-train = 8\nn_test = 4\n"
                   f"anchors = 4\nbatch_size = 8\nckpt = {tmp_path / 'c.ckpt'}\n")
    assert run(["train", "--config", str(cfg), "--epochs", "1"]) == 0
    ck = load_checkpoint(tmp_path / "c.ckpt")
    assert ck.meta["epoch"] == 1 and ck.meta["batch_size"] == 8


def test_config_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("pde = burgers\nout = x.bin\nbogus = 1\n")
    assert run(["gen", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("fvrkhs:") and "bogus" in err and "\n" not in err


def test_unknown_flag_is_usage_error(capsys):
    assert run(["train", "--nope"]) == 2
    assert "usage:" in capsys.readouterr().err


def test_missing_file_is_data_error(tmp_path, capsys):
    code = run(["eval", "--ckpt", str(tmp_path / "none.ckpt"), "--data", "x", "--out", str(tmp_path)])
    assert code == 3
    assert len(capsys.readouterr().err.strip().splitlines()) == 1


def test_corrupt_checkpoint_is_data_error(tmp_path, work):
    (tmp_path / "bad.ckpt").write_bytes(b"garbage!")
    assert run(["eval", "--ckpt", str(tmp_path / "bad.ckpt"), "--data", str(work / "adv.bin"),
                "--out", str(tmp_path)]) == 3


def test_dimension_mismatch_is_data_error(tmp_path, work):
    save_dataset(generate_dataset("poisson", 2, resolution=16), tmp_path / "p.bin")
    assert run(["eval", "--ckpt", str(work / "m.ckpt"), "--data", str(tmp_path / "p.bin"),
                "--out", str(tmp_path)]) == 3


def test_bad_configuration_is_usage_error(work, tmp_path):
    assert run(["train", "--data", str(work / "adv.bin"), "--n-train", "100",
                "--ckpt", str(tmp_path / "z.ckpt")]) == 2


def test_numerical_failure_exit_code(tmp_path):
    ds = generate_dataset("advection", 4, resolution=32)
    ds.targets[:] = 0.0
    save_dataset(ds, tmp_path / "zero.bin")
    code = run(["train", "--data", str(tmp_path / "zero.bin"), "--epochs", "1", "--n-train", "4",
                "--n-test", "0", "--anchors", "2", "--ckpt", str(tmp_path / "z.ckpt")])
    assert code == 4


def test_bench_writes_report(tmp_path):
    assert run(["bench", "--suite", "advection", "--out", str(tmp_path), "--epochs", "1",
                "--n-train", "4", "--n-test", "2", "--anchors", "2", "--resolutions", "64"]) == 0
    names = {p.name for p in (tmp_path / "advection").iterdir()}
    assert {"table0.csv", "summary.txt", "rkhs_s64.ckpt"} <= names


@pytest.mark.parametrize("command", ["gen", "train", "eval", "bench", "predict"])
def test_help_lists_every_flag_with_default(command):
    out = subprocess.run([sys.executable, "-m", "fvrkhs", command, "--help"], capture_output=True,
                         text=True, check=True).stdout
    sub = [a for a in build_parser()._subparsers._group_actions[0].choices[command]._actions
           if a.dest != "help"]
    for action in sub:
        assert action.option_strings[-1] in out
        if not action.required and action.default is not None and action.default is not False:
            assert "default:" in out
    assert out.count("(default:") >= sum(1 for a in sub if not a.required) - 1
