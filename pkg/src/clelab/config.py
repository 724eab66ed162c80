"""Run configuration: INI-style ``key = value`` text with section headers.

Parsing uses :mod:`configparser`; a small line index maps every key back to
its line so that unknown keys, bad types and out-of-range values are reported
with a line number.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .conformal import parse_shape
from .lattice import c_to_kappa_dilute, critical_x, kappa_to_c


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


# value kinds -----------------------------------------------------------------

def _complex(text: str) -> complex:
    t = text.strip().replace(" ", "")
    if "," in t:
        re_, im = t.split(",")
        return complex(float(re_), float(im))
    return complex(t.replace("i", "j"))


def _split(text: str, sep: str) -> list[str]:
    return [p.strip() for p in text.split(sep) if p.strip()]


_KINDS = {
    "int": (int, str),
    "float": (float, lambda v: repr(float(v))),
    "str": (str, str),
    "floats": (lambda t: tuple(float(p) for p in _split(t, ",")),
               lambda v: ", ".join(repr(float(x)) for x in v)),
    "ints": (lambda t: tuple(int(p) for p in _split(t, ",")),
             lambda v: ", ".join(str(int(x)) for x in v)),
    "points": (lambda t: tuple(_complex(p) for p in _split(t, ";")),
               lambda v: "; ".join(f"{x.real!r}, {x.imag!r}" for x in v)),
    "shapes": (lambda t: tuple(_split(t, ";")), lambda v: "; ".join(v)),
}


def opt(kind: str, default, help: str, check=None):
    return field(default=default, metadata={"kind": kind, "help": help, "check": check})


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


@dataclass(frozen=True)
class ModelSection:
    name: str = opt("str", "ising", "ising or loop_model",
                    lambda v: v in ("ising", "loop_model"))
    K: float = opt("float", math.log(3) / 4, "Ising coupling (critical ln3/4)", _positive)
    h: float = opt("float", 0.0, "Ising field")
    n: float = opt("float", 1.0, "loop weight", lambda v: 0 < v <= 2)
    x: float | None = opt("float", None, "edge activity (default: critical for n)",
                          lambda v: 0 < v < 1)
    kappa: float | None = opt("float", None, "optional CLE kappa, cross-checked against c",
                              lambda v: 8 / 3 <= v <= 8)
    c: float | None = opt("float", None, "optional central charge", lambda v: -2 <= v <= 1)


@dataclass(frozen=True)
class LatticeSection:
    Lx: int = opt("int", 32, "faces along the first axis", lambda v: v >= 2)
    Ly: int = opt("int", 32, "faces along the second axis", lambda v: v >= 2)


@dataclass(frozen=True)
class ChainSection:
    count: int = opt("int", 1, "independent chains", _positive)
    seed: int = opt("int", 0, "base seed (chain i uses stream i)", _nonneg)
    sweeps: int = opt("int", 100, "production sweeps per chain", _nonneg)
    stride: int = opt("int", 1, "sweeps between samples", _positive)
    thermalization: int | None = opt("int", None, "burn-in sweeps (default 10*max(L))", _nonneg)
    algorithm: str | None = opt("str", None, "metropolis, wolff or face_flip",
                                lambda v: v in ("metropolis", "wolff", "face_flip"))
    start: str = opt("str", "cold", "cold or hot", lambda v: v in ("cold", "hot"))


@dataclass(frozen=True)
class EstimatorSection:
    shapes: tuple = opt("shapes", (), "shape probes for E ratios, ';'-separated")
    centers: tuple = opt("points", (), "T-mode probe centers 're, im; ...'")
    pair: tuple = opt("points", (), "two centers for the connected two-point")
    k: int = opt("int", 2, "crest number", lambda v: v >= 2)
    m: int = opt("int", 1, "mode order", lambda v: 1 <= v <= 3)
    ladder: tuple = opt("floats", (0.2, 0.14, 0.1, 0.07, 0.05), "descending probe scales")
    delta: float = opt("float", 0.1, "relative annulus thickness", lambda v: 0 < v <= 1)
    bins: int | None = opt("int", None, "orientation bins (default 64 for k=2, 32k otherwise)",
                           _positive)
    b: float = opt("float", 2.0, "hypotrochoid shape parameter", _positive)
    n_blocks: int = opt("int", 100, "jackknife blocks", lambda v: v >= 2)
    reference: str | None = opt("str", None, "reference ensemble path (default: same ensemble)")
    scales: tuple = opt("floats", (0.09375, 0.0625, 0.0442, 0.03125, 0.0221, 0.015625),
                        "box sizes for the fractal fit, unit-window coordinates "
                        "(default spans 24 to 4 spacings at L=256)")
    separations: tuple = opt("ints", (2, 3, 4, 6, 8, 12, 16), "spin separations in faces")
    tolerance_sigma: float = opt("float", 3.0, "compare gate in standard errors", _positive)


@dataclass(frozen=True)
class OutputSection:
    dir: str = opt("str", "out", "output directory")
    configs: str = opt("str", "configs.jsonl", "sampled configurations")
    ensemble: str = opt("str", "ensemble.jsonl", "loop ensemble")
    measurements: str = opt("str", "measurements.csv", "estimator table")
    fractal: str = opt("str", "fractal.csv", "fractal and spin exponent table")
    report: str = opt("str", "report.json", "compare report")


@dataclass(frozen=True)
class OracleSection:
    n: int = opt("int", 2, "number of stress-tensor insertions", lambda v: 1 <= v <= 5)
    points: tuple = opt("points", (), "evaluation points 're, im; ...'")


SECTIONS = {
    "model": ModelSection,
    "lattice": LatticeSection,
    "chains": ChainSection,
    "estimator": EstimatorSection,
    "output": OutputSection,
    "oracle": OracleSection,
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    lattice: LatticeSection = field(default_factory=LatticeSection)
    chains: ChainSection = field(default_factory=ChainSection)
    estimator: EstimatorSection = field(default_factory=EstimatorSection)
    output: OutputSection = field(default_factory=OutputSection)
    oracle: OracleSection = field(default_factory=OracleSection)

    # derived ---------------------------------------------------------------
    @property
    def central_charge(self) -> float:
        m = self.model
        if m.c is not None:
            return m.c
        if m.kappa is not None:
            return kappa_to_c(m.kappa)
        if m.name == "ising":
            return 0.5
        return kappa_to_c(loop_kappa(m.n))

    @property
    def kappa(self) -> float:
        m = self.model
        if m.kappa is not None:
            return m.kappa
        if m.c is not None:
            return c_to_kappa_dilute(m.c)
        return 3.0 if m.name == "ising" else loop_kappa(m.n)

    @property
    def edge_activity(self) -> float:
        return self.model.x if self.model.x is not None else critical_x(self.model.n)

    def with_overrides(self, seed=None, out=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, chains=replace(cfg.chains, seed=int(seed)))
        if out is not None:
            cfg = replace(cfg, output=replace(cfg.output, dir=str(out)))
        return cfg

    # serialization ---------------------------------------------------------
    def to_text(self, skip=()) -> str:
        lines = []
        for name in SECTIONS:
            if name in skip:
                continue
            sec = getattr(self, name)
            lines.append(f"[{name}]")
            for f in fields(sec):
                v = getattr(sec, f.name)
                if v is None:
                    continue
                lines.append(f"{f.name} = {_KINDS[f.metadata['kind']][1](v)}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        """Hash of everything that determines artifact content (output paths excluded)."""
        return hashlib.sha256(self.to_text(skip=("output",)).encode()).hexdigest()


def loop_kappa(n: float) -> float:
    """Dilute-branch kappa with ``n = -2 cos(4 pi / kappa)``."""
    if not 0 < n <= 2:
        raise ValueError(f"n must lie in (0, 2], got {n}")
    return 4 * math.pi / (2 * math.pi - math.acos(-n / 2))


_KEY_RE = re.compile(r"^\s*([^=:\s\[][^=:]*?)\s*[=:]")
_SEC_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _line_index(text: str) -> dict:
    """``(section, key) -> line`` and ``(section, None) -> header line``."""
    out = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        if line.lstrip().startswith(("#", ";")):
            continue
        m = _SEC_RE.match(line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), no)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip()), no)
    return out


def parse_config(text: str) -> RunConfig:
    """Validate INI text into a :class:`RunConfig`; missing keys take defaults."""
    cp = configparser.ConfigParser(default_section="\0", interpolation=None,
                                   inline_comment_prefixes=("#",), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("key outside any [section]", e.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as e:
        raise ConfigError(e.message.split(": ", 1)[-1], e.lineno) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError("malformed line", line) from None
    where = _line_index(text)
    built = {}
    for sec_name in cp.sections():
        if sec_name not in SECTIONS:
            raise ConfigError(f"unknown section [{sec_name}]", where.get((sec_name, None)))
        cls = SECTIONS[sec_name]
        spec = {f.name: f for f in fields(cls)}
        values: dict[str, Any] = {}
        for key, raw in cp.items(sec_name):
            line = where.get((sec_name, key))
            if key not in spec:
                raise ConfigError(f"unknown key '{key}' in [{sec_name}]", line)
            f = spec[key]
            kind = f.metadata["kind"]
            try:
                val = _KINDS[kind][0](raw)
            except (ValueError, TypeError):
                raise ConfigError(f"'{key}' expects {kind}, got {raw!r}", line) from None
            check = f.metadata.get("check")
            if check is not None and not check(val):
                raise ConfigError(f"'{key}' = {raw!r} is out of range ({f.metadata['help']})",
                                  line)
            values[key] = val
        built[sec_name] = cls(**values)
    cfg = RunConfig(**built)
    _validate(cfg, where)
    return cfg


def _validate(cfg: RunConfig, where: dict) -> None:
    m = cfg.model
    if m.kappa is not None and m.c is not None:
        implied = kappa_to_c(m.kappa)
        if not math.isclose(implied, m.c, rel_tol=0, abs_tol=1e-9):
            raise ConfigError(
                f"kappa = {m.kappa} gives c = {implied:.12g}, inconsistent with c = {m.c}",
                where.get(("model", "c")))
    if m.c is not None and m.kappa is None and not 0 <= m.c <= 1:
        raise ConfigError("c outside [0, 1] needs an explicit kappa", where.get(("model", "c")))
    est = cfg.estimator
    if list(est.ladder) != sorted(est.ladder, reverse=True) or len(set(est.ladder)) != len(est.ladder):
        raise ConfigError("ladder must be strictly descending", where.get(("estimator", "ladder")))
    if list(est.scales) != sorted(est.scales, reverse=True):
        raise ConfigError("scales must be descending", where.get(("estimator", "scales")))
    if est.pair and len(est.pair) != 2:
        raise ConfigError("pair needs exactly two points", where.get(("estimator", "pair")))
    for s in est.shapes:
        try:
            parse_shape(s)
        except ValueError as e:
            raise ConfigError(str(e), where.get(("estimator", "shapes"))) from None


def help_text() -> str:
    """Every key with its default, for ``--help``."""
    out = []
    for name, cls in SECTIONS.items():
        out.append(f"[{name}]")
        for f in fields(cls):
            d = f.default
            dv = "(derived)" if d is None else _KINDS[f.metadata["kind"]][1](d) if d != () else "(none)"
            out.append(f"  {f.name} = {dv}    {f.metadata['help']}")
    return "\n".join(out)
