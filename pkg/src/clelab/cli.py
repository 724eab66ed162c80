"""Command-line front end: simulate, extract, measure, fractal, oracle, compare.

Commands talk to each other only through files in the output directory.
Exit status: 0 when every gate passes, 1 when a statistical gate fails,
2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import base64
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, help_text, parse_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ENV_PREFIX = "CLELAB_"
CONFIGS_FORMAT = "clelab-configs/1"
COLUMNS = ["observable", "shape", "w1_re", "w1_im", "w2_re", "w2_im", "k", "m", "eps",
           "value_re", "value_im", "error", "n_samples"]


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def provenance(cfg: RunConfig, command: str) -> dict:
    return {"config_sha256": cfg.digest(), "seed": cfg.chains.seed,
            "code_version": __version__, "command": command}


def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.output.dir) / getattr(cfg.output, name)


# --------------------------------------------------------------------------
# simulate / extract

def _chain_specs(cfg: RunConfig):
    from .lattice import ModelParams
    from .sampler import ChainSpec

    m = cfg.model
    if m.name == "ising":
        params = ModelParams.ising(m.K, m.h)
    else:
        params = ModelParams.loop_gas(cfg.edge_activity, m.n)
    ch = cfg.chains
    return [ChainSpec(m.name, params, cfg.lattice.Lx, cfg.lattice.Ly, seed=ch.seed,
                      thermalization=ch.thermalization, sweeps=ch.sweeps, stride=ch.stride,
                      chain_id=i, algorithm=ch.algorithm, start=ch.start)
            for i in range(ch.count)]


def cmd_simulate(cfg: RunConfig, threads: int) -> int:
    from .sampler import run_chains

    specs = _chain_specs(cfg)
    streams = run_chains(specs, threads)
    path = _out(cfg, "configs")
    path.parent.mkdir(parents=True, exist_ok=True)
    spec0 = specs[0].to_dict()
    spec0.pop("chain_id")
    header = {"format": CONFIGS_FORMAT, "provenance": provenance(cfg, "simulate"),
              "spec": spec0, "chains": len(specs)}
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, st in enumerate(streams):
            for j, snap in enumerate(st.configs):
                bits = np.packbits(np.asarray(snap) > 0)
                fh.write(json.dumps({"chain": i, "sample": j,
                                     "bits": base64.b64encode(bits.tobytes()).decode()}) + "\n")
    obs_path = path.with_name(path.stem + "_observables.csv")
    names = sorted(streams[0].observables) if streams else []
    with open(obs_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        fh.write("# provenance: " + json.dumps(header["provenance"], sort_keys=True) + "\n")
        w.writerow(["chain", "sample", *names])
        for i, st in enumerate(streams):
            for j in range(len(st)):
                w.writerow([i, j, *(_fmt(st.observables[n][j]) for n in names)])
    n = sum(len(s.configs) for s in streams)
    print(f"simulate: {n} configurations from {len(specs)} chain(s) -> {path}")
    return EXIT_OK


def read_configs(path):
    """Header dict plus a list of SpinConfig / LoopModelConfig objects."""
    from .lattice import LoopModelConfig, SpinConfig, build_lattice

    lines = Path(path).read_text().splitlines()
    if not lines:
        raise UsageError(f"{path}: empty configuration file")
    header = json.loads(lines[0])
    if header.get("format") != CONFIGS_FORMAT:
        raise UsageError(f"{path}: not a configuration file")
    spec = header["spec"]
    lat = build_lattice(spec["Lx"], spec["Ly"])
    size = lat.n_faces if spec["model"] == "ising" else lat.n_edges
    out = []
    for line in lines[1:]:
        rec = json.loads(line)
        raw = np.frombuffer(base64.b64decode(rec["bits"]), dtype=np.uint8)
        bits = np.unpackbits(raw)[:size]
        if spec["model"] == "ising":
            out.append(SpinConfig(lat, np.where(bits > 0, 1, -1)))
        else:
            out.append(LoopModelConfig(lat, bits))
    return header, out


def cmd_extract(cfg: RunConfig) -> int:
    from .ensemble import LoopEnsemble, ensemble_metadata
    from .loops import extract_boundaries, extract_loops
    from .sampler import ChainSpec

    src = _out(cfg, "configs")
    header, configs = read_configs(src)
    spec = ChainSpec.from_dict({**header["spec"], "chain_id": 0})
    samples = [extract_boundaries(c) if spec.model == "ising" else extract_loops(c)
               for c in configs]
    lat = configs[0].lattice if configs else None
    if lat is None:
        from .lattice import build_lattice
        lat = build_lattice(spec.Lx, spec.Ly)
    meta = ensemble_metadata(spec, lat, chains=header["chains"],
                             provenance=provenance(cfg, "extract"),
                             source_provenance=header["provenance"])
    path = _out(cfg, "ensemble")
    LoopEnsemble(samples, meta).write(path)
    print(f"extract: {len(samples)} samples -> {path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# measure / fractal

def _row(observable, est=None, value=None, error=None, n=None, **params) -> dict:
    row = dict.fromkeys(COLUMNS, "")
    row["observable"] = observable
    for key, v in params.items():
        if key in ("w1", "w2"):
            if v is not None:
                row[f"{key}_re"], row[f"{key}_im"] = complex(v).real, complex(v).imag
        else:
            row[key] = v
    if est is not None:
        value, error, n = est.value, est.error, est.n_samples
    row["value_re"], row["value_im"] = complex(value).real, complex(value).imag
    row["error"], row["n_samples"] = error, n
    return row


def write_rows(path: Path, rows, prov: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("# provenance: " + json.dumps(prov, sort_keys=True) + "\n")
        w = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in COLUMNS})
    report = {"provenance": prov,
              "rows": [{k: r[k] for k in COLUMNS} for r in rows]}
    path.with_suffix(".json").write_text(json.dumps(report, sort_keys=True, indent=1,
                                                    default=_json_default) + "\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v).__name__)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for r in csv.DictReader(lines):
        missing = [c for c in COLUMNS if c not in r]
        if missing:
            raise UsageError(f"{path}: missing columns {missing}")
        rows.append(r)
    return rows


def cmd_measure(cfg: RunConfig) -> int:
    from .conformal import parse_shape
    from .ensemble import LoopEnsemble
    from .estimators import (UndefinedEstimate, estimate_E_ratio, estimate_T_mode,
                             estimate_two_point)

    ens = LoopEnsemble.read(_out(cfg, "ensemble"))
    est = cfg.estimator
    ref = LoopEnsemble.read(est.reference) if est.reference else ens
    common = dict(k=est.k, m=est.m, ladder=est.ladder, delta=est.delta, B=est.bins, b=est.b,
                  n_blocks=est.n_blocks)
    rows = []

    def attempt(label, fn):
        try:
            return fn()
        except UndefinedEstimate as e:
            print(f"measure: {label} undefined: {e}", file=sys.stderr)
            return None

    for s in est.shapes:
        r = attempt(f"E_ratio {s}", lambda: estimate_E_ratio(ens, ref, parse_shape(s), est.delta,
                                                               est.n_blocks))
        if r is not None:
            rows.append(_row("E_ratio", r, shape=s))
    for w in est.centers:
        res = attempt(f"T_mode at {w}", lambda: estimate_T_mode(ens, ref, w, **common))
        if res is None:
            continue
        for eps, v in zip(res.ladder, res.values):
            rows.append(_row("T_mode_eps", v, w1=w, k=est.k, m=est.m, eps=eps))
        rows.append(_row("T_mode", res.extrapolated, w1=w, k=est.k, m=est.m))
    if est.pair:
        w1, w2 = est.pair
        res = attempt("TT_connected", lambda: estimate_two_point(ens, ref, w1, w2, **common))
        if res is not None:
            for eps, v in zip(res.ladder, res.values):
                rows.append(_row("TT_connected_eps", v, w1=w1, w2=w2, k=est.k, m=est.m, eps=eps))
            rows.append(_row("TT_connected", res.extrapolated, w1=w1, w2=w2, k=est.k, m=est.m))
    path = _out(cfg, "measurements")
    write_rows(path, rows, provenance(cfg, "measure"))
    print(f"measure: {len(rows)} rows -> {path}")
    return EXIT_OK


def cmd_fractal(cfg: RunConfig) -> int:
    from .ensemble import LoopEnsemble
    from .estimators import UndefinedEstimate, largest_loop_dimension, spin_exponent

    est = cfg.estimator
    ens = LoopEnsemble.read(_out(cfg, "ensemble"))
    spacing = ens.lattice_spacing or 0.0
    if any(not spacing < s < 1 for s in est.scales):
        raise UsageError(f"box sizes must lie in ({spacing}, 1)")
    rows = []
    try:
        rows.append(_row("fractal_dimension", largest_loop_dimension(ens.samples, est.scales,
                                                                     est.n_blocks)))
    except UndefinedEstimate as e:
        print(f"fractal: dimension undefined: {e}", file=sys.stderr)
    if cfg.model.name == "ising":
        _, configs = read_configs(_out(cfg, "configs"))
        try:
            rows.append(_row("spin_exponent", spin_exponent(configs, est.separations,
                                                            est.n_blocks)))
        except UndefinedEstimate as e:
            print(f"fractal: spin exponent undefined: {e}", file=sys.stderr)
    path = _out(cfg, "fractal")
    write_rows(path, rows, provenance(cfg, "fractal"))
    for r in rows:
        print(f"fractal: {r['observable']} = {float(r['value_re']):.6g} +- {float(r['error']):.2g}")
    return EXIT_OK


# --------------------------------------------------------------------------
# compare

def oracle_value(cfg: RunConfig, row: dict) -> complex | None:
    """Exact prediction for an estimator row, or None when there is none."""
    from .estimators import cft_two_point

    obs = row["observable"]
    if obs == "T_mode":
        return 0j
    if obs == "TT_connected":
        w1 = complex(float(row["w1_re"]), float(row["w1_im"]))
        w2 = complex(float(row["w2_re"]), float(row["w2_im"]))
        return cft_two_point(w1, w2, cfg.central_charge)
    if obs == "fractal_dimension":
        return complex(1 + cfg.kappa / 8)
    if obs == "spin_exponent" and cfg.model.name == "ising":
        return complex(0.25)
    return None


def cmd_compare(cfg: RunConfig, inputs) -> int:
    if not inputs:
        inputs = [p for p in (_out(cfg, "measurements"), _out(cfg, "fractal")) if p.exists()]
    if not inputs:
        raise UsageError("no estimator tables to compare")
    tol = cfg.estimator.tolerance_sigma
    results = []
    for path in inputs:
        for row in read_rows(path):
            ref = oracle_value(cfg, row)
            if ref is None:
                continue
            val = complex(float(row["value_re"]), float(row["value_im"] or 0))
            err = float(row["error"]) if row["error"] else 0.0
            dev = abs(val - ref)
            sigma = dev / err if err > 0 else (0.0 if dev <= 1e-12 else math.inf)
            ok = sigma <= tol
            results.append({"source": str(path), "observable": row["observable"],
                            "value": [val.real, val.imag], "oracle": [ref.real, ref.imag],
                            "error": err, "sigma": sigma if math.isfinite(sigma) else None,
                            "pass": ok})
            tag = "PASS" if ok else "FAIL"
            print(f"{tag} {row['observable']}: value={val.real:.6g}{val.imag:+.3g}i "
                  f"oracle={ref.real:.6g}{ref.imag:+.3g}i deviation={sigma:.2f} sigma (gate {tol})")
    if not results:
        raise UsageError("no rows with an oracle prediction")
    report = {"provenance": provenance(cfg, "compare"), "tolerance_sigma": tol,
              "results": results, "all_pass": all(r["pass"] for r in results)}
    out = _out(cfg, "report")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    return EXIT_OK if report["all_pass"] else EXIT_FAIL


# --------------------------------------------------------------------------
# oracle

def _points(text: str) -> list[complex]:
    from .config import _complex

    return [_complex(p) for p in text.split(";") if p.strip()]


def cmd_oracle(cfg: RunConfig, kind: str | None, args: list[str], c: float | None,
               points: str | None, unicode: bool) -> int:
    from . import virasoro as vir

    kind = kind or "ward"
    ints = []
    for a in args:
        try:
            ints.append(int(a))
        except ValueError:
            raise UsageError(f"oracle arguments must be integers, got {a!r}") from None
    if kind == "ward":
        n = ints[0] if ints else cfg.oracle.n
        if not 1 <= n <= 5:
            raise UsageError("ward takes 1 <= n <= 5")
        corr = vir.ward_npoint(n)
        print(corr.canonical(unicode=unicode))
        pts = _points(points) if points else list(cfg.oracle.points)
        if pts:
            if len(pts) != n:
                raise UsageError(f"need {n} points, got {len(pts)}")
            cv = cfg.central_charge if c is None else c
            v = corr.evaluate(cv, pts)
            print("%.17g %.17g" % (v.real, v.imag))
    elif kind == "vev":
        print(vir.vev(ints).format())
    elif kind == "gram":
        if len(ints) != 1:
            raise UsageError("gram takes one level")
        basis, mat = vir.gram_matrix(ints[0])
        print("basis: " + ", ".join(" ".join(f"L{-k}" for k in p) or "1" for p in basis))
        for row in mat:
            print("[" + ", ".join(x.format() for x in row) + "]")
    elif kind == "descendant":
        if len(ints) != 2:
            raise UsageError("descendant takes k and m")
        print(vir.descendant_state(*ints))
    elif kind == "relations":
        rep = vir.relation_checks(ints[0] if ints else 6)
        for k, v in rep.derivative_constants.items():
            print(f"L-1 T[{k},1] = {v} * T[{k + 1},1]   (mode algebra expects {rep.derivative_expected[k]})")
        print(f"T[2,2] - T[4,1] = L-2 L-2 1: {rep.finite_part_holds}")
        if not rep.finite_part_holds:
            return EXIT_FAIL
    elif kind == "connection":
        if len(ints) != 2:
            raise UsageError("connection takes n and m")
        d = vir.connection_rep_check(*ints)
        field = " + ".join(f"{v} D[h{k}]" for k, v in sorted(d.field_modes.items())) or "0"
        print(f"[D[h{d.n}], D[h{d.m}]] = {field} + ({d.central.format()})")
        if not d.ok:
            return EXIT_FAIL
    else:
        raise UsageError(f"unknown oracle kind {kind!r}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry points

def run_pipeline(cfg: RunConfig, command: str, threads: int = 1, **opts) -> int:
    if command == "simulate":
        return cmd_simulate(cfg, threads)
    if command == "extract":
        return cmd_extract(cfg)
    if command == "measure":
        return cmd_measure(cfg)
    if command == "fractal":
        return cmd_fractal(cfg)
    if command == "compare":
        return cmd_compare(cfg, opts.get("inputs"))
    if command == "oracle":
        return cmd_oracle(cfg, opts.get("kind"), opts.get("args") or [], opts.get("c"),
                          opts.get("points"), opts.get("unicode", False))
    raise UsageError(f"unknown command {command!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"run configuration file (env {ENV_PREFIX}CONFIG)")
    common.add_argument("--threads", type=int, help=f"parallel chains (env {ENV_PREFIX}THREADS)")
    common.add_argument("--seed", type=int, help=f"override [chains] seed (env {ENV_PREFIX}SEED)")
    common.add_argument("--out", help=f"override [output] dir (env {ENV_PREFIX}OUT)")
    p = argparse.ArgumentParser(
        prog="clelab",
        description="Critical loop ensembles on the honeycomb lattice and their CFT oracle.",
        epilog="configuration keys and defaults:\n" + help_text()
        + f"\n\nflags beat {ENV_PREFIX}* environment variables, which beat the config file."
        "\nexit status: 0 all gates pass, 1 a statistical gate failed, 2 usage or config error.",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"clelab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run Markov chains, write configurations")
    sub.add_parser("extract", parents=[common], help="configurations -> loop ensemble")
    sub.add_parser("measure", parents=[common], help="shape estimators -> CSV/JSON")
    sub.add_parser("fractal", parents=[common], help="fractal dimension and spin exponent")
    cp = sub.add_parser("compare", parents=[common], help="gate estimator tables against oracles")
    cp.add_argument("inputs", nargs="*", help="estimator CSV files (default: those in --out)")
    op = sub.add_parser("oracle", parents=[common], help="exact CFT quantities")
    op.add_argument("kind", nargs="?", default=None,
                    choices=["ward", "vev", "gram", "descendant", "relations", "connection"])
    op.add_argument("args", nargs="*", help="integers: n | modes | level | k m | n m")
    op.add_argument("--c", type=float, help="central charge for numeric evaluation")
    op.add_argument("--points", help="evaluation points 're, im; ...'")
    op.add_argument("--unicode", action="store_true", help="subscripted variable names")
    return p


def _env(name: str, cast=str):
    v = os.environ.get(ENV_PREFIX + name)
    if v is None or v == "":
        return None
    try:
        return cast(v)
    except ValueError:
        raise UsageError(f"{ENV_PREFIX}{name}={v!r} is not a valid {cast.__name__}") from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        config_path = ns.config or _env("CONFIG")
        seed = ns.seed if ns.seed is not None else _env("SEED", int)
        out = ns.out or _env("OUT")
        threads = ns.threads if ns.threads is not None else (_env("THREADS", int) or 1)
        if threads < 1:
            raise UsageError("threads must be >= 1")
        cfg = parse_config(Path(config_path).read_text()) if config_path else RunConfig()
        cfg = cfg.with_overrides(seed=seed, out=out)
        opts = {}
        if ns.command == "compare":
            opts["inputs"] = [Path(p) for p in ns.inputs]
        if ns.command == "oracle":
            opts.update(kind=ns.kind, args=ns.args, c=ns.c, points=ns.points, unicode=ns.unicode)
        return run_pipeline(cfg, ns.command, threads, **opts)
    except (UsageError, ConfigError, FileNotFoundError, ValueError, NotImplementedError) as e:
        print(f"clelab: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
