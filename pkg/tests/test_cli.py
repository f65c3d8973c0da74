import json
import math
from pathlib import Path

import numpy as np
import pytest

from gbmcouple import cli
from gbmcouple.runfile import RunFileError, load_run_file, parse_run_file

SPEC = {"x": 2.0, "y": 1.0, "a1": 0.0, "a2": 0.0, "sigma1": 1.0, "sigma2": 1.0}


def _write_run(tmp_path, obj, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _run(tmp_path, obj, threads=1, sub="out"):
    path = _write_run(tmp_path, obj)
    out = tmp_path / sub
    status = cli.main(["--run", path, "--out", str(out), "--threads", str(threads)])
    return status, out


# ------------------------------- validation -------------------------------- #


def test_run_file_validation_errors():
    with pytest.raises(RunFileError, match="experiment"):
        parse_run_file({"spec": SPEC, "experiment": "nope", "params": {}})
    with pytest.raises(RunFileError, match="unknown run-file keys"):
        parse_run_file({"spec": SPEC, "experiment": "derive", "params": {}, "seed": 3})
    with pytest.raises(RunFileError, match="unknown parameter"):
        parse_run_file({"spec": SPEC, "experiment": "derive", "params": {"TT": 1}})
    with pytest.raises(RunFileError, match="missing parameter"):
        parse_run_file({"spec": SPEC, "experiment": "hjb", "params": {"sign": "plus"}})
    with pytest.raises(RunFileError, match="invalid spec"):
        parse_run_file({"spec": {**SPEC, "junk": 1}, "experiment": "derive", "params": {}})
    with pytest.raises(RunFileError, match="not found"):
        load_run_file("/nonexistent/run.json")


def test_cli_exit_1_on_bad_input(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert cli.main(["--run", str(path), "--out", str(tmp_path / "o")]) == 1
    path2 = _write_run(tmp_path, {"spec": SPEC, "experiment": "derive", "params": {}}, "nodir.json")
    assert cli.main(["--run", path2]) == 1  # no output dir anywhere
    capsys.readouterr()


# ------------------------------- experiments -------------------------------- #


def test_derive_experiment(tmp_path):
    status, out = _run(tmp_path, {"spec": SPEC, "experiment": "derive", "params": {"T": 2.0}})
    assert status == 0
    doc = json.loads((out / "derived.json").read_text())
    assert doc["constants"]["mu"] == 0.0
    assert doc["constants"]["sigma_plus"] == 2.0
    assert doc["finite_horizon"]["plus"]["verdict"] == "optimal"
    manifest = json.loads((out / "manifest.json").read_text())
    assert "derived.json" in manifest["artifacts"]
    assert manifest["failures"] == []


def test_analytic_table_experiment(tmp_path):
    run = {
        "spec": SPEC,
        "experiment": "analytic-table",
        "params": {"z": [0.2, 0.5], "t": {"min": 0.5, "max": 1.0, "count": 2}, "grid": True},
    }
    status, out = _run(tmp_path, run)
    assert status == 0
    lines = (out / "analytic.csv").read_text().strip().splitlines()
    assert lines[0].startswith("z,t,phi_plus")
    assert len(lines) == 5  # header + 2x2 grid


def test_simulate_experiment_and_artifacts(tmp_path):
    run = {
        "spec": SPEC,
        "experiment": "simulate",
        "params": {
            "policy": {"variant": "mirror"},
            "n_paths": 20000,
            "dt": 0.01,
            "horizon": 1.0,
            "master_seed": 5,
            "survival_times": [0.5, 1.0],
            "laplace_qs": [2.0],
            "ergodic_grid": [0.25, 0.5, 1.0],
            "dump_hits": True,
        },
    }
    status, out = _run(tmp_path, run)
    assert status == 0
    hits = np.frombuffer((out / "hits.bin").read_bytes(), dtype="<f8")
    assert hits.size == 20000
    assert np.all(np.isinf(hits) | (hits >= 0))
    surv = (out / "survival.csv").read_text().splitlines()
    assert surv[0] == "T,survival,std_error,analytic"
    # survival fraction in the csv matches the binary dump
    frac = float(surv[2].split(",")[1])
    assert frac == np.mean(hits > 1.0 + 1e-8)


def test_simulate_rejects_unknown_policy(tmp_path):
    run = {
        "spec": SPEC,
        "experiment": "simulate",
        "params": {
            "policy": {"variant": "grid-feedback"},
            "n_paths": 10,
            "dt": 0.1,
            "horizon": 1.0,
            "master_seed": 5,
        },
    }
    status, _ = _run(tmp_path, run)
    assert status == 1


def test_hjb_experiment(tmp_path):
    spec = {**SPEC, "a2": 1.0}
    run = {"spec": spec, "experiment": "hjb", "params": {"sign": "plus", "T": 1.0, "n_z": 128, "n_t": 2048}}
    status, out = _run(tmp_path, run)
    assert status == 0
    gap = json.loads((out / "gap.json").read_text())
    assert gap["consistent"] is True and gap["gap"] > gap["error_estimate"]
    head = (out / "surface.csv").read_text().splitlines()[0]
    assert head == "z,t,F,c"


def test_sweep_verdict_flip_and_swap_invariance(tmp_path):
    specs = [{**SPEC, "a2": mu} for mu in (-1.0, -0.5, 0.0, 0.5, 1.0)]
    specs.append({**SPEC, "x": 1.0, "y": 2.0, "a1": 0.5})  # swapped start
    run = {
        "experiment": "sweep",
        "params": {"experiment": "derive", "specs": specs, "params": {"T": 2.0}},
    }
    status, out = _run(tmp_path, run)
    assert status == 0
    rows = (out / "sweep.csv").read_text().strip().splitlines()
    header = rows[0].split(",")
    i_mu = header.index("mu")
    i_vp = header.index("verdict_plus")
    verdicts = {}
    for line in rows[1:]:
        cells = line.split(",")
        verdicts[float(cells[i_mu])] = cells[i_vp]
    for mu in (-1.0, -0.5, 0.0):
        assert verdicts[mu] == "optimal"
    for mu in (0.5, 1.0):
        assert verdicts[mu] == "suboptimal"
    # swapped spec equals its unswapped twin constants
    swapped_row = rows[-1].split(",")
    assert swapped_row[header.index("swapped")] == "true"
    assert float(swapped_row[header.index("z0")]) == pytest.approx(math.log(2))


def test_sweep_invalid_row_rejected_up_front(tmp_path):
    run = {
        "experiment": "sweep",
        "params": {
            "experiment": "derive",
            "specs": [SPEC, {**SPEC, "sigma2": -1.0}],
            "params": {},
        },
    }
    status, _ = _run(tmp_path, run)
    assert status == 1


def test_exit_2_on_consistency_failure(tmp_path):
    # a tail-rate grid far below the asymptotic regime cannot reproduce the
    # theoretical decay rate; the experiment must flag that, not hide it
    spec = {**SPEC, "a2": 1.0}
    run = {
        "spec": spec,
        "experiment": "reproduce-efficiency",
        "params": {"n_paths": 20000, "master_seed": 3, "t_max": 2.0, "dt": 0.0125},
    }
    status, out = _run(tmp_path, run)
    assert status == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert any("mirror" in f for f in manifest["failures"])


def test_byte_identical_reruns_across_threads(tmp_path):
    run = {
        "spec": {**SPEC, "a2": 0.4},
        "experiment": "simulate",
        "params": {
            "policy": {"variant": "constant", "c": -0.2},
            "n_paths": 30000,
            "dt": 0.005,
            "horizon": 1.0,
            "master_seed": 77,
            "dump_hits": True,
        },
    }
    outs = []
    for i, threads in enumerate((1, 4)):
        status, out = _run(tmp_path, run, threads=threads, sub=f"o{i}")
        assert status == 0
        outs.append(out)
    for name in ("survival.csv", "hits.bin"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    m0 = json.loads((outs[0] / "manifest.json").read_text())
    m1 = json.loads((outs[1] / "manifest.json").read_text())
    assert m0["artifacts"] == m1["artifacts"]


def test_no_writes_outside_output_dir(tmp_path):
    before = set(p.relative_to(tmp_path) for p in tmp_path.rglob("*"))
    status, out = _run(tmp_path, {"spec": SPEC, "experiment": "derive", "params": {}}, sub="only_here")
    assert status == 0
    after = set(p.relative_to(tmp_path) for p in tmp_path.rglob("*"))
    new = {p for p in after - before if p != Path("run.json")}
    assert all(str(p).startswith("only_here") for p in new)
