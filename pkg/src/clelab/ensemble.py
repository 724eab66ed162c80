"""Loop ensembles and their JSON-lines file format.

Line one is a metadata object; every later line is one sample
``{"id": int, "loops": [[[x, y], ...], ...], "homology": [[a, b], ...]}``.
Coordinates are printed with 17 significant digits, which round-trips
IEEE doubles exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .loops import Loop, LoopSet

FORMAT_VERSION = "clelab-loops/1"


def _fmt(v: float) -> str:
    return "%.17g" % v


def _loops_json(ls: LoopSet) -> str:
    parts = []
    for lp in ls.loops:
        pts = ",".join(f"[{_fmt(x)},{_fmt(y)}]" for x, y in lp.vertices)
        parts.append(f"[{pts}]")
    return "[" + ",".join(parts) + "]"


@dataclass
class LoopEnsemble:
    samples: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def period(self) -> tuple[float, float] | None:
        p = self.metadata.get("period")
        return tuple(p) if p is not None else None

    @property
    def lattice_spacing(self) -> float | None:
        return self.metadata.get("lattice_spacing")

    def write(self, path) -> None:
        meta = dict(self.metadata)
        meta.setdefault("format", FORMAT_VERSION)
        with open(path, "w") as fh:
            fh.write(json.dumps(meta, sort_keys=True) + "\n")
            for i, ls in enumerate(self.samples):
                hom = json.dumps([list(h) for h in ls.homology])
                fh.write(f'{{"id": {i}, "loops": {_loops_json(ls)}, "homology": {hom}}}\n')

    @classmethod
    def read(cls, path) -> "LoopEnsemble":
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise ValueError(f"{path}: empty ensemble file")
        meta = json.loads(lines[0])
        if meta.get("format") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format {meta.get('format')!r}")
        period = tuple(meta["period"]) if meta.get("period") is not None else None
        samples = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            rec = json.loads(line)
            if len(rec["loops"]) != len(rec["homology"]):
                raise ValueError(f"{path}:{lineno}: loops and homology lengths differ")
            loops = [Loop(np.array(v, dtype=float).reshape(-1, 2), tuple(h))
                     for v, h in zip(rec["loops"], rec["homology"])]
            samples.append(LoopSet(loops, period))
        return cls(samples, meta)


def ensemble_metadata(spec, lattice, **extra) -> dict:
    """Metadata header for an ensemble produced by a sampler chain."""
    from .rng import GENERATOR_NAME

    meta = {
        "format": FORMAT_VERSION,
        "model": spec.model,
        "params": {k: float(v) for k, v in spec.to_dict()["params"].items()},
        "dims": [spec.Lx, spec.Ly],
        "seed": int(spec.seed),
        "chain_id": int(spec.chain_id),
        "generator": GENERATOR_NAME,
        "period": list(lattice.period),
        "lattice_spacing": float(lattice.spacing),
    }
    meta.update(extra)
    return meta
