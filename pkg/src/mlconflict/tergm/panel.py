"""Yearly outcome networks with aligned covariates, and model term specifications."""
from __future__ import annotations

import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from mlconflict import DataError

DEMOCRACY_THRESHOLD = 7.0
ALTKSTAR_LAMBDA = 2.0

STRUCTURAL = ("edges", "altkstar", "twostar", "fourcycle", "gwesp")
STATIC = ("memory", "edgecov", "joint", "ratio", "bridge")


@dataclass(frozen=True)
class YearData:
    """One year's vertices, outcome network and covariates (NaN marks a missing cell)."""

    vertices: tuple[str, ...]
    outcome: np.ndarray
    dyadic: Mapping[str, np.ndarray] = field(default_factory=dict)
    nodal: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.vertices)
        y = np.asarray(self.outcome)
        if y.shape != (n, n):
            raise DataError(f"outcome shape {y.shape} does not match {n} vertices")
        if not np.array_equal(y, y.T) or np.any(np.diag(y)) or not np.isin(y, (0, 1)).all():
            raise DataError("outcome must be binary, symmetric, zero-diagonal")
        y = y.astype(np.int8)
        y.setflags(write=False)
        dyadic = {}
        for name, m in self.dyadic.items():
            m = np.asarray(m, dtype=float)
            if m.shape != (n, n):
                raise DataError(f"dyadic covariate {name!r} has shape {m.shape}, expected {(n, n)}")
            dyadic[name] = m
        nodal = {}
        for name, x in self.nodal.items():
            x = np.asarray(x, dtype=float)
            if x.shape != (n,):
                raise DataError(f"nodal covariate {name!r} has shape {x.shape}, expected {(n,)}")
            nodal[name] = x
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "dyadic", dyadic)
        object.__setattr__(self, "nodal", nodal)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def with_covariates(self, dyadic=None, nodal=None) -> "YearData":
        return YearData(
            self.vertices,
            self.outcome,
            {**self.dyadic, **(dyadic or {})},
            {**self.nodal, **(nodal or {})},
        )

    def restrict(self, keep: Iterable[str]) -> "YearData":
        keep = set(keep)
        idx = [i for i, v in enumerate(self.vertices) if v in keep]
        sub = np.ix_(idx, idx)
        return YearData(
            tuple(self.vertices[i] for i in idx),
            self.outcome[sub],
            {k: m[sub] for k, m in self.dyadic.items()},
            {k: x[idx] for k, x in self.nodal.items()},
        )


@dataclass(frozen=True)
class PanelSeries:
    data: Mapping[int, YearData]

    def __post_init__(self):
        object.__setattr__(self, "data", dict(sorted(self.data.items())))

    @property
    def years(self) -> list[int]:
        return list(self.data)

    def __getitem__(self, year: int) -> YearData:
        return self.data[year]

    def __contains__(self, year: int) -> bool:
        return year in self.data

    def prev(self, year: int) -> np.ndarray | None:
        """Previous year's outcome on this year's vertex order; entities new this year get no ties."""
        if year - 1 not in self.data:
            return None
        cur, old = self.data[year], self.data[year - 1]
        idx = {v: i for i, v in enumerate(old.vertices)}
        pos = np.array([idx.get(v, -1) for v in cur.vertices])
        ok = pos >= 0
        out = np.zeros((cur.n, cur.n), dtype=np.int8)
        sel = np.flatnonzero(ok)
        out[np.ix_(sel, sel)] = old.outcome[np.ix_(pos[ok], pos[ok])]
        return out

    def replace(self, data: Mapping[int, YearData]) -> "PanelSeries":
        return PanelSeries({**self.data, **data})

    def restrict(self, keep: Mapping[int, Iterable[str]]) -> "PanelSeries":
        return PanelSeries({y: (d.restrict(keep[y]) if y in keep else d) for y, d in self.data.items()})


@dataclass(frozen=True)
class Term:
    kind: str
    name: str | None = None
    param: float | None = None

    def __post_init__(self):
        if self.kind not in STRUCTURAL + STATIC:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if self.kind in ("edgecov", "joint", "ratio", "bridge") and not self.name:
            raise ValueError(f"term {self.kind} needs a covariate name")

    @property
    def label(self) -> str:
        if self.kind == "gwesp":
            return f"gwesp({self.decay:g})"
        if self.kind == "joint":
            return f"joint({self.name})"
        if self.kind == "altkstar" and self.param is not None and self.lam != ALTKSTAR_LAMBDA:
            return f"altkstar({self.lam:g})"
        if self.name:
            return f"{self.kind}({self.name})"
        return self.kind

    @property
    def decay(self) -> float:
        return 0.0 if self.param is None else float(self.param)

    @property
    def threshold(self) -> float:
        return DEMOCRACY_THRESHOLD if self.param is None else float(self.param)

    @property
    def lam(self) -> float:
        return ALTKSTAR_LAMBDA if self.param is None else float(self.param)

    @property
    def structural(self) -> bool:
        return self.kind in STRUCTURAL and self.kind != "edges"

    @classmethod
    def parse(cls, text: str) -> "Term":
        """Parse ``kind``, ``kind(name)``, ``kind(number)`` or ``kind(name, number)``."""
        m = re.fullmatch(r"\s*([a-z]+)\s*(?:\(([^)]*)\))?\s*", text)
        if not m:
            raise ValueError(f"cannot parse term {text!r}")
        kind, args = m.group(1), m.group(2)
        name = param = None
        if args:
            parts = [a.strip() for a in args.split(",") if a.strip()]
            for part in parts:
                try:
                    param = float(part)
                except ValueError:
                    name = part
        return cls(kind, name, param)


@dataclass(frozen=True)
class ModelSpec:
    terms: tuple[Term, ...]

    def __post_init__(self):
        terms = tuple(Term.parse(t) if isinstance(t, str) else t for t in self.terms)
        if not terms or terms[0].kind != "edges":
            raise ValueError("the edges term must come first")
        labels = [t.label for t in terms]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate model terms")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, *terms: str | Term) -> "ModelSpec":
        return cls(tuple(terms))

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.terms]

    @property
    def has_memory(self) -> bool:
        return any(t.kind == "memory" for t in self.terms)

    def __len__(self):
        return len(self.terms)

    def check(self, yd: YearData) -> None:
        for t in self.terms:
            if t.kind == "edgecov" and t.name not in yd.dyadic:
                raise DataError(f"missing dyadic covariate {t.name!r}")
            if t.kind in ("joint", "ratio", "bridge") and t.name not in yd.nodal:
                raise DataError(f"missing nodal covariate {t.name!r}")

    def to_strings(self) -> list[str]:
        out = []
        for t in self.terms:
            args = [a for a in (t.name, None if t.param is None else f"{t.param:g}") if a]
            out.append(f"{t.kind}({', '.join(args)})" if args else t.kind)
        return out


def usable_years(panel: PanelSeries, spec: ModelSpec, years: Sequence[int] | None = None) -> list[int]:
    """Requested years present in the panel; memory models also need the preceding year."""
    years = panel.years if years is None else [y for y in years if y in panel]
    if spec.has_memory:
        years = [y for y in years if y - 1 in panel]
    return years
