"""Dataset manifest: where each source lives, the analysis span, and pipeline settings.

Schema (YAML, paths relative to the manifest file)::

    format_version: 1
    span: [1970, 1990]
    sources:
      treaty_events: events.csv          # entity_a,entity_b,year,layer
      category_map: {7SCIEN: science}    # optional treaty category -> layer
      ideal_points: ideal.csv            # entity,year,ideal_point
      speeches: speeches/                # <ENTITY>_<SESSION>_<YEAR>.txt
      conflict: conflict.csv             # entity_a,entity_b,year,hostility_level
      system_members: members.csv        # optional entity,year
      nodal: {democracy: polity.csv}     # entity,year,value
      dyadic:                            # entity_a,entity_b,year,value
        trade: {path: trade.csv, symmetrize: max}
    settings: {}                         # overrides of pipeline defaults
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from mlconflict import DataError
from mlconflict import dataio

FORMAT_VERSION = 1
DEFAULT_SPAN = (1970, 1990)
REQUIRED = ("treaty_events", "ideal_points", "speeches", "conflict")


@dataclass(frozen=True)
class DyadicSource:
    path: str
    symmetrize: str = "max"


@dataclass(frozen=True)
class DatasetManifest:
    base_dir: Path
    treaty_events: str
    ideal_points: str
    speeches: str
    conflict: str
    span: tuple[int, int] = DEFAULT_SPAN
    format_version: int = FORMAT_VERSION
    nodal: dict[str, str] = field(default_factory=dict)
    dyadic: dict[str, DyadicSource] = field(default_factory=dict)
    category_map: dict[str, str] = field(default_factory=dict)
    system_members: str | None = None
    settings: dict = field(default_factory=dict)

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def years(self) -> list[int]:
        return list(range(self.span[0], self.span[1] + 1))

    def to_dict(self) -> dict:
        sources = {
            "treaty_events": self.treaty_events,
            "ideal_points": self.ideal_points,
            "speeches": self.speeches,
            "conflict": self.conflict,
        }
        if self.category_map:
            sources["category_map"] = dict(self.category_map)
        if self.system_members:
            sources["system_members"] = self.system_members
        if self.nodal:
            sources["nodal"] = dict(self.nodal)
        if self.dyadic:
            sources["dyadic"] = {k: {"path": v.path, "symmetrize": v.symmetrize} for k, v in self.dyadic.items()}
        return {
            "format_version": self.format_version,
            "span": list(self.span),
            "sources": sources,
            "settings": dict(self.settings),
        }

    def source_paths(self) -> list[Path]:
        paths = [self.resolve(p) for p in (self.treaty_events, self.ideal_points, self.conflict)]
        paths += [self.resolve(p) for p in self.nodal.values()]
        paths += [self.resolve(d.path) for d in self.dyadic.values()]
        if self.system_members:
            paths.append(self.resolve(self.system_members))
        paths += [p for *_, p in dataio.speech_files(self.resolve(self.speeches))]
        return paths


def write_manifest(m: DatasetManifest, path) -> None:
    Path(path).write_text(yaml.safe_dump(m.to_dict(), sort_keys=True), encoding="utf-8")


def _coverage(kind: str, path: Path) -> tuple[int, int] | None:
    if kind == "speeches":
        years = [y for _, _, y, _ in dataio.speech_files(path)]
    else:
        header = {"treaty_events": dataio.EVENT_HEADER, "ideal_points": dataio.IDEAL_HEADER,
                  "conflict": dataio.CONFLICT_HEADER, "nodal": dataio.NODAL_HEADER,
                  "dyadic": dataio.DYADIC_HEADER, "system_members": dataio.MEMBER_HEADER}[kind]
        years = [int(r["year"]) for _, r in dataio.read_rows(path, header) if str(r["year"]).strip().lstrip("-").isdigit()]
    return (min(years), max(years)) if years else None


def load_manifest(path, check_coverage: bool = True) -> DatasetManifest:
    """Parse and validate a manifest, reporting every problem at once."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest {path} does not exist")
    try:
        raw = yaml.safe_load(dataio.read_text(path)) or {}
    except yaml.YAMLError as exc:
        raise DataError(f"{path}: {exc}") from None
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise DataError(f"{path}: manifest must be a mapping")
    version = raw.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        errors.append(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    span = raw.get("span", list(DEFAULT_SPAN))
    try:
        span = (int(span[0]), int(span[1]))
        if span[0] > span[1]:
            errors.append(f"span start {span[0]} is after span end {span[1]}")
    except (TypeError, ValueError, IndexError):
        errors.append(f"span must be [first_year, last_year], got {span!r}")
        span = DEFAULT_SPAN
    sources = raw.get("sources") or {}
    for key in REQUIRED:
        if key not in sources:
            errors.append(f"missing key sources.{key}")
    dyadic = {}
    for name, spec in (sources.get("dyadic") or {}).items():
        if isinstance(spec, str):
            spec = {"path": spec}
        if not isinstance(spec, dict) or "path" not in spec:
            errors.append(f"sources.dyadic.{name} needs a path")
            continue
        sym = spec.get("symmetrize", "max")
        if sym not in ("max", "min"):
            errors.append(f"sources.dyadic.{name}.symmetrize must be max or min, got {sym!r}")
        dyadic[name] = DyadicSource(str(spec["path"]), sym)
    m = DatasetManifest(
        base_dir=path.parent.resolve(),
        treaty_events=str(sources.get("treaty_events", "")),
        ideal_points=str(sources.get("ideal_points", "")),
        speeches=str(sources.get("speeches", "")),
        conflict=str(sources.get("conflict", "")),
        span=span,
        format_version=version,
        nodal={k: str(v) for k, v in (sources.get("nodal") or {}).items()},
        dyadic=dyadic,
        category_map={str(k): str(v) for k, v in (sources.get("category_map") or {}).items()},
        system_members=sources.get("system_members"),
        settings=dict(raw.get("settings") or {}),
    )
    checks = [(k, k, getattr(m, k)) for k in REQUIRED if getattr(m, k)]
    checks += [(f"nodal.{k}", "nodal", v) for k, v in m.nodal.items()]
    checks += [(f"dyadic.{k}", "dyadic", v.path) for k, v in m.dyadic.items()]
    if m.system_members:
        checks.append(("system_members", "system_members", m.system_members))
    for label, kind, rel in checks:
        p = m.resolve(rel)
        if kind == "speeches":
            if not p.is_dir():
                errors.append(f"sources.{label}: directory {p} is not readable")
                continue
        elif not p.is_file():
            errors.append(f"sources.{label}: file {p} is not readable")
            continue
        if not check_coverage:
            continue
        try:
            cov = _coverage(kind, p)
        except DataError as exc:
            errors.append(f"sources.{label}: {exc}")
            continue
        if cov is None:
            errors.append(f"sources.{label}: no data rows in {p}")
            continue
        if kind == "treaty_events":
            # sparse events: windows may start before the span and years may lack events
            bad = cov[0] > span[1]
        else:
            bad = cov[0] > span[0] or cov[1] < span[1]
        if bad:
            errors.append(
                f"span {span[0]}-{span[1]} is outside the coverage {cov[0]}-{cov[1]} of sources.{label}"
            )
    if errors:
        raise DataError(f"{path}: invalid manifest:\n  - " + "\n  - ".join(errors))
    return m
