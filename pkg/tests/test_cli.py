import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clelab.cli import COLUMNS, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main, read_configs
from clelab.config import ConfigError, RunConfig, loop_kappa, parse_config
from clelab.ensemble import LoopEnsemble
from clelab.lattice import kappa_to_c

from synthetic import PLANT_B, PLANT_DELTA, circle_ensemble, planted_mode_ensemble

TINY = """\
[model]
name = ising
[lattice]
Lx = 4
Ly = 4
[chains]
sweeps = 10
thermalization = 5
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# -- config ------------------------------------------------------------------

def test_minimal_config_defaults_and_round_trip():
    cfg = parse_config(TINY)
    assert cfg.lattice.Lx == 4 and cfg.chains.sweeps == 10
    assert cfg.estimator.k == 2 and cfg.chains.count == 1
    assert math.isclose(cfg.model.K, math.log(3) / 4)
    assert parse_config(cfg.to_text()) == cfg
    assert parse_config(RunConfig().to_text()) == RunConfig()


def test_misspelled_key_names_key_and_line():
    with pytest.raises(ConfigError, match=r"line 3: unknown key 'sweps'") as ei:
        parse_config("[chains]\ncount = 2\nsweps = 10\n")
    assert ei.value.line == 3


@pytest.mark.parametrize("text,line,what", [
    ("[lattice]\nLx = four\n", 2, "expects int"),
    ("[lattice]\n\nLy = 1\n", 3, "out of range"),
    ("[bogus]\nx = 1\n", 1, "unknown section"),
    ("Lx = 4\n", 1, "outside any"),
    ("[model]\nK = 0.2\nK = 0.3\n", 3, "already exists"),
    ("[estimator]\nladder = 0.1, 0.2\n", 2, "descending"),
    ("[estimator]\nshapes = circle(1, 2)\n", 2, "takes 3 arguments"),
])
def test_config_errors_carry_line(text, line, what):
    with pytest.raises(ConfigError, match=what) as ei:
        parse_config(text)
    assert ei.value.line == line


def test_kappa_c_consistency_gate():
    ok = parse_config("[model]\nkappa = 3\nc = 0.5\n")
    assert ok.kappa == 3 and ok.central_charge == 0.5
    with pytest.raises(ConfigError, match="inconsistent") as ei:
        parse_config("[model]\nkappa = 3\nc = 0.7\n")
    assert ei.value.line == 3


@settings(max_examples=50)
@given(st.floats(8 / 3, 4))
def test_kappa_c_gate_accepts_exact_pairs(kappa):
    c = kappa_to_c(kappa)
    cfg = parse_config(f"[model]\nkappa = {kappa!r}\nc = {c!r}\n")
    assert math.isclose(cfg.kappa, kappa)


def test_loop_kappa_dilute_branch():
    assert math.isclose(loop_kappa(1.0), 3.0)
    assert math.isclose(loop_kappa(2.0), 4.0)
    assert math.isclose(loop_kappa(math.sqrt(2)), 16 / 5)


def test_digest_ignores_output_paths():
    a = parse_config(TINY)
    assert a.digest() == a.with_overrides(out="elsewhere").digest()
    assert a.digest() != a.with_overrides(seed=5).digest()


# -- pipeline ----------------------------------------------------------------

def test_simulate_extract_tiny(tmp_path, capsys):
    cfg = _write(tmp_path, TINY)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert main(["extract", "--config", cfg, "--out", str(out)]) == EXIT_OK
    lines = (out / "ensemble.jsonl").read_text().splitlines()
    assert len(lines) == 11
    meta = json.loads(lines[0])
    assert meta["dims"] == [4, 4] and meta["provenance"]["config_sha256"]
    header, configs = read_configs(out / "configs.jsonl")
    assert len(configs) == 10 and header["chains"] == 1
    assert len(LoopEnsemble.read(out / "ensemble.jsonl")) == 10


def test_reruns_byte_identical_across_threads(tmp_path):
    cfg = _write(tmp_path, TINY + "count = 2\n")
    for name, threads in (("a", "1"), ("b", "2")):
        out = str(tmp_path / name)
        assert main(["simulate", "--config", cfg, "--out", out, "--threads", threads]) == 0
        assert main(["extract", "--config", cfg, "--out", out]) == 0
    for f in ("configs.jsonl", "ensemble.jsonl", "configs_observables.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_changes_output(tmp_path):
    cfg = _write(tmp_path, TINY.replace("sweeps = 10", "sweeps = 10\nstart = hot"))
    for name, seed in (("a", "1"), ("b", "2")):
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / name), "--seed", seed]) == 0
    assert (tmp_path / "a" / "configs.jsonl").read_bytes() != (tmp_path / "b" / "configs.jsonl").read_bytes()


def test_env_overrides(tmp_path, monkeypatch):
    cfg = _write(tmp_path, TINY)
    monkeypatch.setenv("CLELAB_CONFIG", cfg)
    monkeypatch.setenv("CLELAB_OUT", str(tmp_path / "envout"))
    monkeypatch.setenv("CLELAB_SEED", "7")
    assert main(["simulate"]) == EXIT_OK
    header = json.loads((tmp_path / "envout" / "configs.jsonl").read_text().splitlines()[0])
    assert header["provenance"]["seed"] == 7
    # flags beat the environment
    assert main(["simulate", "--seed", "3"]) == EXIT_OK
    header = json.loads((tmp_path / "envout" / "configs.jsonl").read_text().splitlines()[0])
    assert header["provenance"]["seed"] == 3
    monkeypatch.setenv("CLELAB_THREADS", "many")
    assert main(["simulate"]) == EXIT_USAGE


def test_loop_model_pipeline(tmp_path):
    cfg = _write(tmp_path, "[model]\nname = loop_model\nn = 1\n[lattice]\nLx = 6\nLy = 6\n"
                 "[chains]\nsweeps = 5\nthermalization = 2\n")
    out = str(tmp_path / "o")
    assert main(["simulate", "--config", cfg, "--out", out]) == 0
    assert main(["extract", "--config", cfg, "--out", out]) == 0
    assert len(LoopEnsemble.read(tmp_path / "o" / "ensemble.jsonl")) == 5


def test_usage_errors(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "missing.ini")]) == EXIT_USAGE
    assert main(["nonsense"]) == EXIT_USAGE
    bad = _write(tmp_path, "[chains]\nsweps = 3\n")
    assert main(["simulate", "--config", bad]) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err
    assert main(["extract", "--out", str(tmp_path / "empty")]) == EXIT_USAGE


def test_help_lists_defaults(capsys):
    assert main(["--help"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "[estimator]" in text and "ladder = 0.2, 0.14, 0.1, 0.07, 0.05" in text


# -- oracle ------------------------------------------------------------------

def test_oracle_ward3_canonical(capsys):
    assert main(["oracle", "ward", "3"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "c/((w1-w2)^2*(w1-w3)^2*(w2-w3)^2)"


def test_oracle_ward2_numeric(capsys):
    assert main(["oracle", "ward", "2", "--c", "0.5", "--points", "0, 0; 1, 0"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["(c/2)/(w1-w2)^4", "0.25 0"]


def test_oracle_algebra_commands(capsys):
    assert main(["oracle", "vev", "4", "-2", "-2"]) == 0
    assert capsys.readouterr().out.strip() == "3*c"
    assert main(["oracle", "gram", "4"]) == 0
    assert capsys.readouterr().out.splitlines()[1:] == ["[5*c, 3*c]", "[3*c, c^2/2 + 4*c]"]
    assert main(["oracle", "connection", "2", "-2"]) == 0
    assert "(c/2)" in capsys.readouterr().out
    assert main(["oracle", "relations"]) == 0
    assert main(["oracle", "descendant", "2", "4"]) == EXIT_USAGE
    assert main(["oracle", "ward", "2", "--points", "0,0"]) == EXIT_USAGE


# -- measure / compare -------------------------------------------------------

def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def test_measure_on_synthetic_ensemble(tmp_path):
    rng = np.random.default_rng(4)
    out = tmp_path / "o"
    out.mkdir()
    ladder = (0.2, 0.14, 0.1)
    meta = {"format": "clelab-loops/1", "lattice_spacing": 0.001}
    samples = circle_ensemble(300, rng) + planted_mode_ensemble(3000, rng, [0.5 + 0.5j], ladder)
    LoopEnsemble(samples, meta).write(out / "ensemble.jsonl")
    ref = circle_ensemble(300, rng) + planted_mode_ensemble(3000, rng, [0.5 + 0.5j], ladder)
    LoopEnsemble(ref, meta).write(tmp_path / "ref.jsonl")
    cfg = _write(tmp_path, "[estimator]\nshapes = circle(0.5, 0.5, 0.5)\ncenters = 0.5, 0.5\n"
                 f"ladder = 0.2, 0.14, 0.1\ndelta = {PLANT_DELTA}\nb = {PLANT_B}\n"
                 f"reference = {tmp_path / 'ref.jsonl'}\nn_blocks = 50\n")
    assert main(["measure", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "measurements.csv")
    assert list(rows[0]) == COLUMNS
    by = {}
    for r in rows:
        by.setdefault(r["observable"], []).append(r)
    assert len(by["E_ratio"]) == 1 and float(by["E_ratio"][0]["error"]) > 0
    assert len(by["T_mode_eps"]) == 3 and len(by["T_mode"]) == 1
    report = json.loads((out / "measurements.json").read_text())
    assert len(report["rows"]) == len(rows)
    # rotation-invariant planted ensemble: the gate passes against <T> = 0
    assert main(["compare", "--config", cfg, "--out", str(out)]) == EXIT_OK


def _fabricated(path, value, error):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
        w.writeheader()
        row = dict.fromkeys(COLUMNS, "")
        row.update(observable="TT_connected", w1_re=0, w1_im=0, w2_re=1, w2_im=0, k=2, m=1,
                   value_re=value.real, value_im=value.imag, error=error, n_samples=1000)
        w.writerow(row)
        row = dict.fromkeys(COLUMNS, "")
        row.update(observable="fractal_dimension", value_re=1.375 + 0.3 * error, value_im=0,
                   error=error, n_samples=1000)
        w.writerow(row)
        row = dict.fromkeys(COLUMNS, "")
        row.update(observable="E_ratio", shape="circle(0,0,1)", value_re=5, value_im=0,
                   error=0.001, n_samples=10)
        w.writerow(row)


def test_compare_gate(tmp_path, capsys):
    cfg = _write(tmp_path, "[model]\nname = ising\n")
    good = tmp_path / "good.csv"
    _fabricated(good, 0.25 + 0.01j, 0.01)
    assert main(["compare", "--config", cfg, "--out", str(tmp_path), str(good)]) == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["all_pass"] and len(report["results"]) == 2
    bad = tmp_path / "bad.csv"
    _fabricated(bad, 0.25 + 0.1, 0.01)
    assert main(["compare", "--config", cfg, "--out", str(tmp_path), str(bad)]) == EXIT_FAIL
    assert "FAIL TT_connected" in capsys.readouterr().out


def test_compare_without_oracle_rows_is_usage_error(tmp_path):
    p = tmp_path / "t.csv"
    with open(p, "w", newline="") as fh:
        w = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
        w.writeheader()
        row = dict.fromkeys(COLUMNS, "")
        row.update(observable="E_ratio", value_re=1, value_im=0, error=0.1, n_samples=3)
        w.writerow(row)
    assert main(["compare", "--out", str(tmp_path), str(p)]) == EXIT_USAGE


def test_fractal_command(tmp_path, capsys):
    cfg = _write(tmp_path, "[lattice]\nLx = 16\nLy = 16\n[chains]\nsweeps = 40\nthermalization = 20\n"
                 "[estimator]\nscales = 0.5, 0.35, 0.25, 0.18, 0.125\nseparations = 1, 2, 3, 4, 5\n"
                 "n_blocks = 10\n")
    out = str(tmp_path / "o")
    for cmd in ("simulate", "extract", "fractal"):
        assert main([cmd, "--config", cfg, "--out", out]) == EXIT_OK
    rows = {r["observable"]: r for r in _rows(tmp_path / "o" / "fractal.csv")}
    assert set(rows) == {"fractal_dimension", "spin_exponent"}
    for r in rows.values():
        assert math.isfinite(float(r["value_re"])) and float(r["error"]) > 0
    small = _write(tmp_path, "[lattice]\nLx = 16\nLy = 16\n[estimator]\nscales = 0.1, 0.01\n", "s.ini")
    assert main(["fractal", "--config", small, "--out", out]) == EXIT_USAGE
