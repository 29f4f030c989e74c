"""Command-line interface: configs, artifacts, exit codes, reproducibility."""

import json

import numpy as np
import pytest

from sccnn import cli, tasks
from sccnn.cli import RunConfig, load_config
from sccnn.errors import ValidationError
from sccnn.filters import ScFilter
from sccnn.spectra import eigenbasis, filter_frequency_response


def run(*argv):
    return cli.main(list(argv))


TRAJ_ARGS = (
    "--set", "task=trajectory",
    "--set", "data.points=80",
    "--set", "data.holes=1",
    "--set", "data.count=16",
    "--set", "data.splits=10,3,3",
    "--set", "model.variant=psnn",
    "--set", "model.order=1",
    "--set", "model.layers=1",
    "--set", "model.features=4",
    "--set", "train.epochs=2",
    "--set", "train.batch=0",
)


# ---------------------------------------------------------------------------
# config handling


def test_config_round_trip(tmp_path):
    text = "# comment\n\nmodel.layers = 3\nseed = 7\ntask = trajectory\n"
    file = tmp_path / "run.cfg"
    file.write_text(text)
    cfg = load_config(str(file), ["model.layers=4", "out=/tmp/x"])
    assert cfg.get_int("model.layers") == 4  # flag overrides the file
    assert cfg.seed == 7
    assert RunConfig.from_text(cfg.text()) == cfg
    assert cfg.hash() == RunConfig.from_text(cfg.text()).hash()
    assert len(cfg.hash()) == 64


def test_config_rejects_malformed_input(tmp_path):
    with pytest.raises(ValidationError):
        RunConfig.from_text("just words\n")
    with pytest.raises(ValidationError):
        RunConfig((("a", "1"), ("a", "2")))
    with pytest.raises(ValidationError):
        RunConfig((("task", "poetry"),))
    with pytest.raises(ValidationError):
        load_config(str(tmp_path / "missing.cfg"))
    with pytest.raises(ValidationError):
        load_config(None, ["noequals"])
    cfg = RunConfig((("model.layers", "two"),))
    with pytest.raises(ValidationError):
        cfg.get_int("model.layers")
    with pytest.raises(ValidationError):
        RunConfig((("data.flag", "maybe"),)).get_bool("data.flag")
    with pytest.raises(ValidationError):
        cfg.require("absent.key")


def test_resolved_config_is_idempotent():
    cfg = cli._resolve(RunConfig((("task", "trajectory"),)), "train")
    again = cli._resolve(cfg, "train")
    assert again == cfg
    assert cfg.get("train.epochs") == "100"
    assert cfg.get("data.kind") == "synthetic"


# ---------------------------------------------------------------------------
# exit codes


def test_exit_codes(tmp_path):
    assert run("--help") == 0
    assert run("transcode") == 1  # unknown subcommand is a usage error
    assert run("train", "--set", "task=spectra", "--out", str(tmp_path / "x")) == 1
    assert run("train", "--set", "noequals", "--out", str(tmp_path / "y")) == 1
    assert run("train", "--config", str(tmp_path / "none.cfg")) == 1
    assert (
        run(
            "eval", *TRAJ_ARGS,
            "--set", "eval.checkpoint=" + str(tmp_path / "none.json"),
            "--out", str(tmp_path / "ev"),
        )
        == 1
    )


def test_divergent_training_exits_two(tmp_path):
    rc = run(
        "train", *TRAJ_ARGS,
        "--set", "train.epochs=5",
        "--set", "train.lr=1e38",
        "--set", "train.dtype=float32",
        "--out", str(tmp_path / "diverge"),
    )
    assert rc == 2


# ---------------------------------------------------------------------------
# build


def test_build_writes_complex_and_trajectories(tmp_path):
    out = tmp_path / "built"
    assert (
        run(
            "build",
            "--set", "task=trajectory",
            "--set", "data.points=80",
            "--set", "data.holes=1",
            "--set", "data.count=12",
            "--set", "data.splits=8,2,2",
            "--set", "seed=4",
            "--out", str(out),
        )
        == 0
    )
    sc = cli._read_complex_json(out / "complex.json")
    reference = tasks.gen_synthetic_sc(80, 1, seed=4)
    assert sc.simplices == reference.simplices
    assert np.allclose(sc.vertex_positions, reference.vertex_positions)
    walks = json.loads((out / "trajectories.json").read_text())
    assert len(walks["sequences"]) == 12
    digest = (out / "config.txt").read_text().splitlines()[0].split("=")[1].strip()
    assert walks["config_hash"] == digest

    # the built files feed training back in
    rc = run(
        "train", *TRAJ_ARGS,
        "--set", "data.kind=file",
        "--set", "data.path=" + str(out / "complex.json"),
        "--set", "data.trajectories=" + str(out / "trajectories.json"),
        "--set", "data.count=12",
        "--set", "data.splits=8,2,2",
        "--out", str(tmp_path / "refit"),
    )
    assert rc == 0


# ---------------------------------------------------------------------------
# train / eval


def test_train_artifacts_and_byte_identical_rerun(tmp_path):
    out = tmp_path / "run"
    assert run("train", *TRAJ_ARGS, "--out", str(out)) == 0
    files = ["config.txt", "checkpoint.json", "history.csv", "metrics.json"]
    first = {name: (out / name).read_bytes() for name in files}
    metrics = json.loads(first["metrics.json"])
    assert {"accuracy_train", "accuracy_val", "accuracy_test", "accuracy_test_reversed"} <= set(
        metrics
    )
    assert metrics["epochs_run"] == 2
    history = first["history.csv"].decode().splitlines()
    assert history[0].startswith("# config_hash = ")
    assert history[1] == "epoch,train_loss,val_loss,val_metric"
    assert len(history) == 4  # two epoch rows
    assert metrics["config_hash"] == history[0].split("=")[1].strip()

    # rerunning the same resolved config reproduces every byte
    assert run("train", *TRAJ_ARGS, "--out", str(out)) == 0
    for name in files:
        assert (out / name).read_bytes() == first[name], name

    # and so does rerunning from the emitted config file itself
    assert run("train", "--config", str(out / "config.txt")) == 0
    for name in files:
        assert (out / name).read_bytes() == first[name], name


def test_train_zero_epochs_reports_initial_model(tmp_path):
    out = tmp_path / "zero"
    assert run("train", *TRAJ_ARGS, "--set", "train.epochs=0", "--out", str(out)) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["epochs_run"] == 0
    assert metrics["best_epoch"] == 0
    assert 0.0 <= metrics["accuracy_test"] <= 1.0
    history = (out / "history.csv").read_text().splitlines()
    assert len(history) == 2  # hash comment and header only


def test_eval_matches_train_metrics(tmp_path):
    out = tmp_path / "run"
    assert run("train", *TRAJ_ARGS, "--out", str(out)) == 0
    trained = json.loads((out / "metrics.json").read_text())
    ev = tmp_path / "ev"
    assert (
        run(
            "eval", *TRAJ_ARGS,
            "--set", "eval.checkpoint=" + str(out / "checkpoint.json"),
            "--out", str(ev),
        )
        == 0
    )
    evaluated = json.loads((ev / "metrics.json").read_text())
    for key in ("accuracy_train", "accuracy_val", "accuracy_test", "accuracy_test_reversed"):
        assert evaluated[key] == trained[key]


def test_train_simplex_task(tmp_path):
    out = tmp_path / "simplex"
    rc = run(
        "train",
        "--set", "task=simplex",
        "--set", "data.points=120",
        "--set", "data.holes=0",
        "--set", "data.seed=3",
        "--set", "model.variant=mlp",
        "--set", "model.layers=1",
        "--set", "model.features=4",
        "--set", "train.epochs=2",
        "--set", "train.batch=0",
        "--out", str(out),
    )
    assert rc == 0
    metrics = json.loads((out / "metrics.json").read_text())
    for key in ("auc_train", "auc_val", "auc_test"):
        assert 0.0 <= metrics[key] <= 1.0


# ---------------------------------------------------------------------------
# reports


def _example_complex_file(tmp_path, example_sc):
    path = tmp_path / "complex.json"
    cli._write_complex_json(path, example_sc, "0" * 64)
    return path


def test_spectra_reproduces_the_worked_spectrum(tmp_path, example_sc):
    path = _example_complex_file(tmp_path, example_sc)
    out = tmp_path / "spec"
    rc = run(
        "spectra",
        "--set", "data.kind=file",
        "--set", "data.path=" + str(path),
        "--set", "spectra.order=1",
        "--out", str(out),
    )
    assert rc == 0
    lines = (out / "spectra.csv").read_text().splitlines()
    assert lines[1] == "class,eigenvalue"
    rows = [line.split(",") for line in lines[2:]]
    basis = eigenbasis(example_sc, 1)
    assert len(rows) == 10
    assert [r[0] for r in rows] == list(basis.classes)
    assert np.allclose([float(r[1]) for r in rows], basis.values, atol=1e-15)


def test_spectra_response_columns(tmp_path, example_sc):
    path = _example_complex_file(tmp_path, example_sc)
    out = tmp_path / "spec"
    rc = run(
        "spectra",
        "--set", "data.kind=file",
        "--set", "data.path=" + str(path),
        "--set", "spectra.w_down=0.5,1.0,-0.25",
        "--set", "spectra.w_up=0.1,2.0",
        "--out", str(out),
    )
    assert rc == 0
    lines = (out / "spectra.csv").read_text().splitlines()
    assert lines[1] == "class,eigenvalue,response_gradient,response_curl"
    rows = [line.split(",") for line in lines[2:]]
    basis = eigenbasis(example_sc, 1)
    filt = ScFilter(1, np.array([0.5, 1.0, -0.25]), np.array([0.1, 2.0]))
    expected = filter_frequency_response(filt, basis)
    for row, label, want in zip(rows, basis.classes, expected):
        own = {"gradient": 2, "curl": 3, "harmonic": 2}[label]
        assert abs(float(row[own]) - want) < 1e-12
        if label == "harmonic":
            assert float(row[2]) == float(row[3])


def test_perturb_report(tmp_path):
    out = tmp_path / "pb"
    rc = run(
        "perturb",
        "--set", "data.points=60",
        "--set", "data.holes=0",
        "--set", "model.layers=1",
        "--set", "model.features=2",
        "--set", "perturb.eps=0,0.5",
        "--set", "perturb.seeds=2",
        "--out", str(out),
    )
    assert rc == 0
    lines = (out / "perturb.csv").read_text().splitlines()
    assert lines[1] == "epsilon,seed,order,empirical_distance,bound"
    rows = [line.split(",") for line in lines[2:]]
    assert len(rows) == 2 * 2 * 3  # eps x seeds x orders
    for eps, _, _, emp, bound in rows:
        assert np.isfinite(float(emp)) and np.isfinite(float(bound))
        if float(eps) == 0.0:
            assert float(emp) == 0.0 and float(bound) == 0.0
        else:
            assert float(bound) > 0.0


def test_equivariance_report(tmp_path):
    out = tmp_path / "eq"
    rc = run(
        "equivariance",
        "--set", "data.points=60",
        "--set", "data.holes=0",
        "--set", "equivariance.trials=2",
        "--out", str(out),
    )
    assert rc == 0
    report = json.loads((out / "equivariance.json").read_text())
    assert set(report["results"]) == set(
        ("sccnn", "snn", "psnn", "scnn", "bunch", "gnn", "mlp",
         "linear_gf", "linear_scf", "linear_cf_sc")
    )
    for deviations in report["results"].values():
        assert deviations["permutation"] < 1e-8
        assert deviations["orientation"] < 1e-8


# ---------------------------------------------------------------------------
# sweep


def test_sweep_grid_rows_and_workers(tmp_path):
    out = tmp_path / "sw"
    rc = run(
        "sweep", *TRAJ_ARGS,
        "--set", "model.variant=scnn",  # free tap orders, unlike the pinned psnn
        "--set", "train.epochs=1",
        "--set", "sweep.layers=1",
        "--set", "sweep.t=1,2",
        "--set", "sweep.features=4",
        "--set", "sweep.seeds=1",
        "--out", str(out),
        "--jobs", "2",
    )
    assert rc == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    header = lines[1].split(",")
    assert header[:4] == ["layers", "t", "features", "seed"]
    assert "accuracy_test" in header
    rows = [line.split(",") for line in lines[2:]]
    assert len(rows) == 2  # one per grid cell
    assert {r[1] for r in rows} == {"1", "2"}
    for t in ("1", "2"):
        sub = out / f"run_l1_t{t}_f4_s0"
        assert (sub / "metrics.json").exists() and (sub / "config.txt").exists()
