"""Staged, resumable end-to-end pipeline.

Each stage writes into its own directory under the run directory and records
the content hash of every file it wrote, plus a fingerprint of everything it
read (upstream output hashes, source file hashes and its slice of the run
configuration), in ``state.json``. A stage is skipped when its fingerprint and
outputs are unchanged; running a stage whose upstream is missing or stale is
refused unless forced. Every invocation appends line-delimited JSON records to
``run.log.jsonl``.
"""
from __future__ import annotations

import hashlib
import json
import logging
import shutil
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from mlconflict import DataError, NumericalError, dataio
from mlconflict.affinity import ideal_similarity_matrix, mutual_knn
from mlconflict.docdist import BowVector, CostOracle, speech_similarity_matrix
from mlconflict.extraction import ExtractionConfig, extract, polarity_metrics
from mlconflict.graphs import WINDOW_LENGTH, CommunitySet, Community, MultilayerGraph, align_layers, build_window_layer
from mlconflict.manifest import DatasetManifest
from mlconflict.text.corpus import count_cooccurrence, preprocess
from mlconflict.text.glove import read_embeddings, train_embeddings, write_embeddings
from mlconflict.tergm import ModelSpec, PanelSeries, YearData, bootstrap_ci, gof, predict_aucpr
from mlconflict.tergm.bootstrap import TergmFit, interpret
from mlconflict.tergm.covariates import community_covariates

log = logging.getLogger(__name__)

STAGES = ("build-graphs", "embed", "distances", "detect", "derive-covariates", "fit", "gof", "predict", "report")
UPSTREAM = {
    "build-graphs": (),
    "embed": (),
    "distances": ("embed",),
    "detect": ("build-graphs", "distances"),
    "derive-covariates": ("detect",),
    "fit": ("derive-covariates",),
    "gof": ("fit",),
    "predict": ("derive-covariates",),
    "report": ("detect", "fit", "gof", "predict"),
}
STAGE_DIRS = {s: s.replace("-", "_") for s in STAGES}

BASELINE_TERMS = (
    "edges",
    "altkstar",
    "fourcycle",
    "gwesp(0)",
    "joint(democracy, 7)",
    "edgecov(contiguity)",
    "ratio(capability)",
    "edgecov(trade)",
    "edgecov(sec_igo)",
    "edgecov(econ_igo)",
    "memory",
)


def _without(terms, drop):
    return [t for t in terms if t != drop]


DEFAULT_MODELS = {
    "model1": {"terms": list(BASELINE_TERMS), "communities": "none", "restrict": False},
    "model2": {"terms": list(BASELINE_TERMS) + ["edgecov(weak_tie)"], "communities": "weak", "restrict": False},
    "model3": {"terms": list(BASELINE_TERMS) + ["edgecov(strong_tie)"], "communities": "strong", "restrict": False},
    "model4": {
        "terms": _without(BASELINE_TERMS, "edgecov(contiguity)") + ["edgecov(strong_tie)"],
        "communities": "strong",
        "restrict": False,
    },
    "model5": {
        "terms": list(BASELINE_TERMS) + ["edgecov(weak_joint)", "bridge(weak_bridge)"],
        "communities": "weak",
        "restrict": True,
    },
    "model6": {
        "terms": list(BASELINE_TERMS) + ["edgecov(strong_joint)", "bridge(strong_bridge)"],
        "communities": "strong",
        "restrict": True,
    },
}


class StageError(Exception):
    """A stage cannot run because an upstream stage is missing or stale."""

    def __init__(self, stage: str, reason: str):
        super().__init__(f"upstream stage {stage!r} is {reason}; run it first or pass --force")
        self.stage = stage
        self.reason = reason


@dataclass(frozen=True)
class RunConfig:
    years: tuple[int, int]
    seed: int = 0
    threads: int = 1
    window_length: int = WINDOW_LENGTH
    vertex_policy: str = "participants"
    knn_k: int = 5
    min_count: int = 5
    min_doc_frac: float = 0.05
    cooc_window: int = 5
    epochs: int = 25
    embedding_scope: str = "global"
    dims: tuple[int, ...] = (50, 100, 200)
    x_max: tuple[float, ...] = (15.0, 25.0)
    rwmd_mode: str = "symmetric-max"
    init_proportions: tuple[float, ...] = (0.20, 0.25, 0.30)
    extraction_seeds: int = 10
    max_iterations: int = 500
    overlap_threshold: float = 0.75
    min_size: int = 2
    reps: int = 2000
    gof_sims: int = 50
    gof_burnin: int | None = None
    gof_interval: int | None = None
    predict_window: int = 5
    models: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_MODELS)))

    def __post_init__(self):
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "x_max", tuple(float(x) for x in self.x_max))
        object.__setattr__(self, "init_proportions", tuple(float(p) for p in self.init_proportions))
        if self.years[0] > self.years[1]:
            raise ValueError(f"empty year range {self.years}")
        if self.vertex_policy not in ("participants", "members"):
            raise ValueError("vertex_policy must be 'participants' or 'members'")
        if self.embedding_scope not in ("global", "per-year"):
            raise ValueError("embedding_scope must be 'global' or 'per-year'")
        if self.reps < 2:
            raise ValueError("reps must be >= 2")
        if not (self.dims and self.x_max and self.init_proportions):
            raise ValueError("the robustness grid needs at least one value per axis")
        for name, m in self.models.items():
            if m.get("communities", "none") not in ("none", "weak", "strong"):
                raise ValueError(f"model {name}: communities must be none, weak or strong")
            ModelSpec(tuple(m["terms"]))
        ExtractionConfig(self.init_proportions, self.extraction_seeds, self.max_iterations, self.overlap_threshold,
                         self.min_size)

    @classmethod
    def build(cls, span: tuple[int, int], *layers: Mapping) -> "RunConfig":
        """Defaults overridden by each mapping in turn; unknown keys are an error."""
        names = {f.name for f in fields(cls)}
        merged: dict = {"years": tuple(span)}
        for layer in layers:
            unknown = set(layer) - names
            if unknown:
                raise ValueError(f"unknown configuration keys {sorted(unknown)}")
            merged.update({k: v for k, v in layer.items() if v is not None})
        return cls(**merged)

    @property
    def year_list(self) -> list[int]:
        return list(range(self.years[0], self.years[1] + 1))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("threads")  # never changes results
        return json.loads(json.dumps(d))

    def digest(self, keys: Sequence[str] | None = None) -> str:
        d = self.to_dict()
        if keys is not None:
            d = {k: d[k] for k in keys}
        return _sha(json.dumps(d, sort_keys=True).encode())

    # robustness grid keys
    def embedding_keys(self) -> list[str]:
        return [f"d{d}_x{x:g}" for d in self.dims for x in self.x_max]

    def strong_keys(self) -> list[str]:
        return [f"strong_p{p:g}" for p in self.init_proportions]

    def weak_keys(self) -> list[str]:
        return [f"weak_{e}_p{p:g}" for e in self.embedding_keys() for p in self.init_proportions]

    def series_for(self, model: str) -> list[str | None]:
        kind = self.models[model].get("communities", "none")
        return {"none": [None], "strong": self.strong_keys(), "weak": self.weak_keys()}[kind]


def _proportion(key: str) -> float:
    return float(key.rsplit("_p", 1)[1])


STAGE_CONFIG = {
    "build-graphs": ("years", "window_length", "vertex_policy", "knn_k"),
    "embed": ("years", "min_count", "min_doc_frac", "cooc_window", "epochs", "embedding_scope", "dims", "x_max", "seed"),
    "distances": ("years", "rwmd_mode", "knn_k", "dims", "x_max", "embedding_scope"),
    "detect": ("years", "init_proportions", "extraction_seeds", "max_iterations", "overlap_threshold", "min_size", "seed"),
    "derive-covariates": ("years",),
    "fit": ("years", "reps", "seed", "models"),
    "gof": ("years", "gof_sims", "gof_burnin", "gof_interval", "seed", "models"),
    "predict": ("years", "predict_window", "models"),
    "report": ("years", "models"),
}


def _sources_for(stage: str, m: DatasetManifest) -> list[Path]:
    treaty = [m.resolve(m.treaty_events)]
    ideal = [m.resolve(m.ideal_points)]
    members = [m.resolve(m.system_members)] if m.system_members else []
    speeches = [p for *_, p in dataio.speech_files(m.resolve(m.speeches))]
    panel = (
        [m.resolve(m.conflict)]
        + [m.resolve(p) for p in m.nodal.values()]
        + [m.resolve(d.path) for d in m.dyadic.values()]
        + members
    )
    return {
        "build-graphs": treaty + ideal + members,
        "embed": speeches,
        "distances": [],
        "detect": members,
        "derive-covariates": panel + ideal + speeches,
        "fit": panel,
        "gof": panel,
        "predict": panel,
        "report": [],
    }[stage]


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Pipeline:
    """One run directory bound to a manifest and configuration."""

    def __init__(self, manifest: DatasetManifest, config: RunConfig, out_dir, force: bool = False):
        self.m = manifest
        self.cfg = config
        self.out = Path(out_dir)
        self.force = force
        self.out.mkdir(parents=True, exist_ok=True)
        self.state_path = self.out / "state.json"
        self.log_path = self.out / "run.log.jsonl"
        self.state = self._load_state()
        self._written: list[Path] = []
        self._source_hashes: dict[str, str] = {}

    # state and logging

    def _load_state(self) -> dict:
        if self.state_path.exists():
            try:
                return json.loads(self.state_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                log.warning("unreadable %s; starting from scratch", self.state_path)
        return {"stages": {}}

    def _save_state(self) -> None:
        self.state["config"] = self.cfg.to_dict()
        self.state["config_hash"] = self.cfg.digest()
        self.state_path.write_text(json.dumps(self.state, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    def _log(self, **record) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def _rel(self, path: Path) -> str:
        return Path(path).relative_to(self.out).as_posix()

    def _source_hash(self, path: Path) -> str:
        key = str(path)
        if key not in self._source_hashes:
            self._source_hashes[key] = file_hash(path)
        return self._source_hashes[key]

    def fingerprint(self, stage: str) -> str:
        stages = self.state["stages"]
        payload = {
            "config": self.cfg.digest(STAGE_CONFIG[stage]),
            "sources": {str(p): self._source_hash(p) for p in _sources_for(stage, self.m)},
            "upstream": {u: stages.get(u, {}).get("digest") for u in UPSTREAM[stage]},
        }
        return _sha(json.dumps(payload, sort_keys=True).encode())

    def dirty(self, stage: str) -> str | None:
        """Why ``stage`` would need to run, or None when its recorded outputs are current."""
        rec = self.state["stages"].get(stage)
        if rec is None:
            return "not run"
        for rel, h in rec["outputs"].items():
            p = self.out / rel
            if not p.exists():
                return f"missing its output {rel}"
            if file_hash(p) != h:
                return f"changed since it ran ({rel})"
        if rec.get("fingerprint") != self.fingerprint(stage):
            return "stale: its inputs changed"
        return None

    def ancestors(self, stage: str) -> list[str]:
        seen: set[str] = set()
        todo = list(UPSTREAM[stage])
        while todo:
            s = todo.pop()
            if s not in seen:
                seen.add(s)
                todo.extend(UPSTREAM[s])
        return [s for s in STAGES if s in seen]

    def check_upstream(self, stage: str) -> None:
        for u in self.ancestors(stage):
            reason = self.dirty(u)
            if reason:
                raise StageError(u, reason)

    # running

    def run(self, command: str) -> dict[str, str]:
        """Run one stage (or ``all``); returns stage -> 'ran' | 'cached'."""
        if command != "all" and command not in STAGES:
            raise ValueError(f"unknown stage {command!r}")
        t0 = time.perf_counter()
        self._log(event="start", command=command, seed=self.cfg.seed, config_hash=self.cfg.digest(),
                  years=list(self.cfg.years), threads=self.cfg.threads, force=self.force,
                  manifest=str(self.m.base_dir))
        status: dict[str, str] = {}
        try:
            if command == "all":
                for s in STAGES:
                    status[s] = self._run_stage(s)
            else:
                if not self.force:
                    self.check_upstream(command)
                status[command] = self._run_stage(command)
        except BaseException as exc:
            self._log(event="end", command=command, status="error", error=f"{type(exc).__name__}: {exc}",
                      seconds=round(time.perf_counter() - t0, 3))
            raise
        self._log(event="end", command=command, status="ok", stages=status,
                  seconds=round(time.perf_counter() - t0, 3))
        return status

    def _run_stage(self, stage: str) -> str:
        t0 = time.perf_counter()
        if not self.force and self.dirty(stage) is None:
            rec = self.state["stages"][stage]
            self._log(event="stage", stage=stage, status="cached", seconds=0.0, files=rec["outputs"])
            log.info("%s: cached", stage)
            return "cached"
        log.info("%s: running", stage)
        d = self.out / STAGE_DIRS[stage]
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)
        self._written = []
        getattr(self, "_stage_" + STAGE_DIRS[stage])(d)
        outputs = {self._rel(p): file_hash(p) for p in sorted(set(self._written))}
        self.state["stages"][stage] = {
            "outputs": outputs,
            "digest": _sha(json.dumps(outputs, sort_keys=True).encode()),
            "fingerprint": self.fingerprint(stage),
        }
        self._save_state()
        secs = round(time.perf_counter() - t0, 3)
        self._log(event="stage", stage=stage, status="ran", seconds=secs, seed=self.cfg.seed,
                  config_hash=self.cfg.digest(STAGE_CONFIG[stage]), files=outputs)
        log.info("%s: done in %.1fs", stage, secs)
        return "ran"

    def _emit(self, path, writer: Callable, *args) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        writer(path, *args)
        self._written.append(path)
        return path

    def _emit_json(self, path, payload) -> Path:
        def w(p, obj):
            Path(p).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")

        return self._emit(path, w, payload)

    # shared loaders

    def _members(self) -> dict[int, list[str]] | None:
        return dataio.read_members(self.m.resolve(self.m.system_members)) if self.m.system_members else None

    def _graphs(self, edges_path: Path, vertices_path: Path, layers: Sequence[str]) -> dict[int, MultilayerGraph]:
        edges = dataio.read_edges(edges_path)
        verts = dataio.read_members(vertices_path)
        out = {}
        for year in self.cfg.year_list:
            vs = verts.get(year, [])
            if len(vs) < 2:
                continue
            idx = {v: i for i, v in enumerate(vs)}
            mats = []
            for layer in layers:
                a = np.zeros((len(vs), len(vs)), dtype=np.int8)
                for u, v in edges.get(year, {}).get(layer, ()):
                    a[idx[u], idx[v]] = a[idx[v], idx[u]] = 1
                mats.append((layer, a))
            out[year] = MultilayerGraph(year, tuple(vs), tuple(mats))
        return out

    def base_panel(self) -> PanelSeries:
        """Conflict outcome with nodal and dyadic covariates over the configured years."""
        m = self.m
        rows = dataio.read_conflict_rows(m.resolve(m.conflict))
        members = self._members()
        nodal = {name: dataio.read_nodal(m.resolve(p)) for name, p in m.nodal.items()}
        dyadic = {name: (dataio.read_dyadic(m.resolve(s.path)), s.symmetrize) for name, s in m.dyadic.items()}
        data = {}
        for year in self.cfg.year_list:
            if members is not None:
                vs = members.get(year, [])
            else:
                seen = {a for a, b, y, _ in rows if y == year} | {b for a, b, y, _ in rows if y == year}
                for table in nodal.values():
                    seen |= set(table.get(year, {}))
                vs = sorted(seen)
            if len(vs) < 2:
                raise DataError(f"year {year}: fewer than 2 system members")
            _, adj = dataio.conflict_network(rows, year, vs)
            dy = {name: dataio.symmetrize_dyadic(t.get(year, {}), vs, how) for name, (t, how) in dyadic.items()}
            nd = {name: np.array([t.get(year, {}).get(v, np.nan) for v in vs]) for name, t in nodal.items()}
            data[year] = YearData(tuple(vs), adj, dy, nd)
        return PanelSeries(data)

    def model_panel(self, base: PanelSeries, model: str, series: str | None) -> PanelSeries:
        """Base panel plus the community covariates of ``series``, restricted when the model asks."""
        spec = self.models()[model]
        cov_dir = self.out / STAGE_DIRS["derive-covariates"]
        data = dict(base.data)
        if series is not None:
            kind = series.split("_", 1)[0]
            tie = dataio.read_dyadic(cov_dir / f"{series}_tie.csv")
            joint = dataio.read_dyadic(cov_dir / f"{series}_joint.csv")
            bridge = dataio.read_nodal(cov_dir / f"{series}_bridge.csv")
            for year, yd in base.data.items():
                vs = yd.vertices
                data[year] = yd.with_covariates(
                    dyadic={
                        f"{kind}_tie": dataio.symmetrize_dyadic(tie.get(year, {}), vs),
                        f"{kind}_joint": dataio.symmetrize_dyadic(joint.get(year, {}), vs),
                    },
                    nodal={f"{kind}_bridge": np.array([bridge.get(year, {}).get(v, 0.0) for v in vs])},
                )
        panel = PanelSeries(data)
        if spec["restrict"]:
            active = dataio.read_members(cov_dir / "active.csv")
            panel = panel.restrict({y: active.get(y, []) for y in panel.years})
        return panel

    def models(self) -> dict[str, dict]:
        return {
            name: {"spec": ModelSpec(tuple(m["terms"])), "restrict": bool(m.get("restrict", False)),
                   "communities": m.get("communities", "none")}
            for name, m in self.cfg.models.items()
        }

    @staticmethod
    def fit_key(model: str, series: str | None) -> str:
        return model if series is None else f"{model}__{series}"

    # stages

    def _stage_build_graphs(self, d: Path) -> None:
        cfg, m = self.cfg, self.m
        events = dataio.read_events(m.resolve(m.treaty_events), m.category_map or None)
        layers = sorted({e[3] for e in events})
        members = self._members()
        if cfg.vertex_policy == "members" and members is None:
            raise DataError("vertex_policy 'members' needs a system_members source")
        by_layer = {l: [(a, b, y) for a, b, y, layer in events if layer == l] for l in layers}
        edge_rows, vert_rows = [], []
        for year in cfg.year_list:
            fixed = members.get(year, []) if cfg.vertex_policy == "members" else None
            built = {l: build_window_layer(by_layer[l], year, cfg.window_length, fixed) for l in layers}
            if not any(len(vs) for vs, _ in built.values()):
                log.warning("year %d: no treaty events in the window", year)
                continue
            g = align_layers(built, year, "union")
            vert_rows += [(v, year) for v in g.vertices]
            for name, adj in g.layers:
                edge_rows += dataio.adjacency_edges(year, name, g.vertices, adj)
        self._emit(d / "strong_edges.csv", dataio.write_edges, edge_rows)
        self._emit(d / "strong_vertices.csv", dataio.write_csv, dataio.MEMBER_HEADER, vert_rows)

        ideal = dataio.read_ideal_points(m.resolve(m.ideal_points))
        edge_rows, vert_rows = [], []
        for year in cfg.year_list:
            if len(ideal.get(year, {})) < 2:
                log.warning("year %d: fewer than 2 ideal points; no vote layer", year)
                continue
            entities, _, sim = ideal_similarity_matrix(ideal, year)
            self._emit(d / "votes" / f"similarity_{year}.csv", dataio.write_matrix, entities, sim)
            vert_rows += [(v, year) for v in entities]
            if len(entities) <= cfg.knn_k:
                log.warning("year %d: %d voters, not enough for %d-NN", year, len(entities), cfg.knn_k)
                continue
            edge_rows += dataio.adjacency_edges(year, "votes", entities, mutual_knn(sim, cfg.knn_k, entities))
        self._emit(d / "vote_edges.csv", dataio.write_edges, edge_rows)
        self._emit(d / "vote_vertices.csv", dataio.write_csv, dataio.MEMBER_HEADER, vert_rows)
        self._emit_json(d / "meta.json", {"strong_layers": layers, "weak_layers": ["votes", "speeches"]})

    def _stage_embed(self, d: Path) -> None:
        cfg = self.cfg
        years = set(cfg.year_list)
        raw = [(doc, text) for doc, text in dataio.read_speeches(self.m.resolve(self.m.speeches)) if doc[1] in years]
        if not raw:
            raise DataError("no speeches inside the configured years")
        corpus = preprocess(raw, cfg.min_count, cfg.min_doc_frac)
        if corpus.empty_docs:
            log.warning("%d speeches are empty after trimming", len(corpus.empty_docs))
        self._emit_json(
            d / "corpus.json",
            {
                "vocabulary": list(corpus.vocabulary),
                "documents": [[e, y, " ".join(toks)] for (e, y), toks in corpus.documents],
                "empty": [[e, y] for e, y in corpus.empty_docs],
            },
        )
        scopes: list[tuple[str, list]] = [("", [toks for _, toks in corpus.documents])]
        if cfg.embedding_scope == "per-year":
            scopes = [(f"_{y}", [t for (_, yy), t in corpus.documents if yy == y]) for y in cfg.year_list]
        meta = {}
        for suffix, docs in scopes:
            if not any(docs):
                continue
            cooc = count_cooccurrence(docs, cfg.cooc_window, vocabulary=corpus.vocabulary)
            for dim in cfg.dims:
                for xm in cfg.x_max:
                    key = f"d{dim}_x{xm:g}{suffix}"
                    space = train_embeddings(cooc, dim, xm, cfg.epochs, cfg.seed)
                    self._emit(d / f"{key}.txt", lambda p, s: write_embeddings(s, p), space)
                    meta[key] = {"dimension": dim, "x_max": xm, "iterations": space.iterations,
                                 "final_loss": space.final_loss, "loss_trace": list(space.loss_trace)}
        self._emit_json(d / "meta.json", meta)

    def _corpus(self) -> tuple[list[str], list[tuple[tuple[str, int], tuple[str, ...]]]]:
        payload = json.loads(dataio.read_text(self.out / STAGE_DIRS["embed"] / "corpus.json"))
        docs = [((e, int(y)), tuple(t.split())) for e, y, t in payload["documents"]]
        return payload["vocabulary"], docs

    def _stage_distances(self, d: Path) -> None:
        cfg = self.cfg
        vocab, docs = self._corpus()
        vocab = set(vocab)
        emb_dir = self.out / STAGE_DIRS["embed"]
        for key in cfg.embedding_keys():
            edge_rows, vert_rows = [], []
            global_space = None if cfg.embedding_scope == "per-year" else read_embeddings(emb_dir / f"{key}.txt")
            for year in cfg.year_list:
                bows = sorted(
                    (BowVector.from_tokens(doc, toks, vocab) for doc, toks in docs if doc[1] == year and toks),
                    key=lambda b: b.doc_id,
                )
                bows = [b for b in bows if b.weights]
                if len(bows) < 2:
                    log.warning("year %d: fewer than 2 usable speeches; no speech layer", year)
                    continue
                space = global_space or read_embeddings(emb_dir / f"{key}_{year}.txt")
                entities = [b.doc_id[0] for b in bows]
                dist, sim = speech_similarity_matrix(bows, CostOracle(space), cfg.rwmd_mode)
                self._emit(d / key / f"distance_{year}.csv", dataio.write_matrix, entities, dist)
                self._emit(d / key / f"similarity_{year}.csv", dataio.write_matrix, entities, sim)
                vert_rows += [(v, year) for v in entities]
                if len(entities) > cfg.knn_k:
                    edge_rows += dataio.adjacency_edges(year, "speeches", entities,
                                                        mutual_knn(sim, cfg.knn_k, entities))
            self._emit(d / key / "speech_edges.csv", dataio.write_edges, edge_rows)
            self._emit(d / key / "speech_vertices.csv", dataio.write_csv, dataio.MEMBER_HEADER, vert_rows)

    def _system(self, year: int, g: MultilayerGraph, members) -> list[str]:
        if members is None:
            return list(g.vertices)
        return sorted(set(members.get(year, [])) | set(g.vertices))

    def _detect_series(self, d: Path, name: str, graphs: Mapping[int, MultilayerGraph], members) -> None:
        cfg = self.cfg
        ecfg = ExtractionConfig((_proportion(name),), cfg.extraction_seeds, cfg.max_iterations,
                                cfg.overlap_threshold, cfg.min_size)
        series, reports = {}, []
        for year in cfg.year_list:
            g = graphs.get(year)
            cs = extract(g, ecfg, cfg.seed) if g is not None else CommunitySet(year, ())
            series[year] = cs
            if g is not None:
                reports.append(polarity_metrics(cs, self._system(year, g, members)))
        self._emit(d / f"{name}.json", dataio.write_communities, series)
        self._emit(d / f"polarity_{name}.csv", dataio.write_polarity, reports)

    def _stage_detect(self, d: Path) -> None:
        cfg = self.cfg
        gdir = self.out / STAGE_DIRS["build-graphs"]
        meta = json.loads(dataio.read_text(gdir / "meta.json"))
        members = self._members()
        strong = self._graphs(gdir / "strong_edges.csv", gdir / "strong_vertices.csv", meta["strong_layers"])
        for name in cfg.strong_keys():
            self._detect_series(d, name, strong, members)
        votes = self._graphs(gdir / "vote_edges.csv", gdir / "vote_vertices.csv", ["votes"])
        ddir = self.out / STAGE_DIRS["distances"]
        for key in cfg.embedding_keys():
            speeches = self._graphs(ddir / key / "speech_edges.csv", ddir / key / "speech_vertices.csv", ["speeches"])
            weak = {}
            for year in cfg.year_list:
                parts = {}
                if year in votes:
                    parts["votes"] = (votes[year].vertices, votes[year].layer("votes"))
                if year in speeches:
                    parts["speeches"] = (speeches[year].vertices, speeches[year].layer("speeches"))
                if parts:
                    weak[year] = align_layers(parts, year, "union")
            for p in cfg.init_proportions:
                self._detect_series(d, f"weak_{key}_p{p:g}", weak, members)

    def _stage_derive_covariates(self, d: Path) -> None:
        cfg = self.cfg
        base = self.base_panel()
        ddir = self.out / STAGE_DIRS["detect"]
        for name in cfg.strong_keys() + cfg.weak_keys():
            series = dataio.read_communities(ddir / f"{name}.json")
            tie_t, joint_t, bridge_t = {}, {}, {}
            for year in base.years:
                vs = base[year].vertices
                cs = _restrict_communities(series.get(year, CommunitySet(year, ())), vs)
                tie, joint, bridge = community_covariates(cs, vs)
                tie_t[year] = dataio.matrix_to_dyadic(year, vs, tie)
                joint_t[year] = dataio.matrix_to_dyadic(year, vs, joint)
                bridge_t[year] = {v: float(b) for v, b in zip(vs, bridge)}
            self._emit(d / f"{name}_tie.csv", dataio.write_dyadic, tie_t)
            self._emit(d / f"{name}_joint.csv", dataio.write_dyadic, joint_t)
            self._emit(d / f"{name}_bridge.csv", dataio.write_nodal, bridge_t)
        # states that both voted and spoke, for the node-effect models
        ideal = dataio.read_ideal_points(self.m.resolve(self.m.ideal_points))
        spoke = {(e, y) for e, _, y, _ in dataio.speech_files(self.m.resolve(self.m.speeches))}
        rows = [(v, y) for y in base.years for v in base[y].vertices if v in ideal.get(y, {}) and (v, y) in spoke]
        self._emit(d / "active.csv", dataio.write_csv, dataio.MEMBER_HEADER, rows)

    def _stage_fit(self, d: Path) -> None:
        cfg = self.cfg
        base = self.base_panel()
        summary = {}
        for model, spec in self.models().items():
            tables = []
            for series in cfg.series_for(model):
                key = self.fit_key(model, series)
                panel = self.model_panel(base, model, series)
                try:
                    fit = bootstrap_ci(panel, spec["spec"], reps=cfg.reps, seed=cfg.seed,
                                       on_separation="flag", threads=cfg.threads)
                except (NumericalError, DataError) as exc:
                    log.warning("%s could not be fitted: %s", key, exc)
                    summary[key] = {"model": model, "series": series, "status": "failed", "error": str(exc)}
                    self._emit_json(d / f"{key}.json", summary[key])
                    continue
                payload = fit.to_dict()
                payload.update(status="ok", model=model, series=series)
                self._emit_json(d / f"{key}.json", payload)
                self._emit(d / f"{key}_coef.csv", _write_coef, fit.table())
                self._emit(d / f"{key}_replicates.csv", dataio.write_csv, fit.terms, fit.replicates.tolist())
                summary[key] = {"model": model, "series": series, "status": "ok",
                                "failed_replicates": fit.meta["failed_replicates"]}
                tables.append(fit.table())
            if tables:
                self._emit(d / f"mean_{model}.csv", _write_coef, mean_table(tables))
        self._emit_json(d / "summary.json", summary)

    def reference_fit(self, model: str) -> tuple[str | None, TergmFit] | None:
        """First successfully fitted grid setting of ``model``."""
        fdir = self.out / STAGE_DIRS["fit"]
        for series in self.cfg.series_for(model):
            p = fdir / f"{self.fit_key(model, series)}.json"
            if not p.exists():
                continue
            payload = json.loads(dataio.read_text(p))
            if payload.get("status") == "ok":
                return series, TergmFit.from_dict(payload)
        return None

    def _stage_gof(self, d: Path) -> None:
        cfg = self.cfg
        base = self.base_panel()
        for model, spec in self.models().items():
            ref = self.reference_fit(model)
            if ref is None:
                log.warning("%s: no fitted setting; GOF skipped", model)
                continue
            series, fit = ref
            panel = self.model_panel(base, model, series)
            report = gof(fit.coefficients, panel, spec["spec"], n_sims=cfg.gof_sims, seed=cfg.seed,
                         burnin=cfg.gof_burnin, interval=cfg.gof_interval)
            for stat, rows in report.items():
                self._emit(d / f"{model}_{stat}.csv", dataio.write_csv, dataio.GOF_HEADER,
                           ([r[h] for h in dataio.GOF_HEADER] for r in rows))

    def _stage_predict(self, d: Path) -> None:
        cfg = self.cfg
        base = self.base_panel()
        for model, spec in self.models().items():
            series = cfg.series_for(model)[0]
            panel = self.model_panel(base, model, series)
            # bridges are absent in some years, so their term cannot be scored out of sample
            terms = [t for t in spec["spec"].terms if t.kind != "bridge"]
            try:
                rows = predict_aucpr(panel, ModelSpec(tuple(terms)), cfg.predict_window)
            except ValueError as exc:
                log.warning("%s: prediction skipped: %s", model, exc)
                rows = []
            self._emit(d / f"{model}.csv", dataio.write_csv, dataio.PREDICT_HEADER,
                       ([r[h] for h in dataio.PREDICT_HEADER] for r in rows))

    def _stage_report(self, d: Path) -> None:
        from mlconflict import plotting

        cfg = self.cfg
        ddir, fdir = self.out / STAGE_DIRS["detect"], self.out / STAGE_DIRS["fit"]
        gdir, pdir = self.out / STAGE_DIRS["gof"], self.out / STAGE_DIRS["predict"]
        polarity = {}
        for kind, keys in (("strong", cfg.strong_keys()), ("weak", cfg.weak_keys())):
            per = [dataio.read_polarity(ddir / f"polarity_{k}.csv") for k in keys]
            rows = mean_polarity(per)
            self._emit(d / f"polarity_{kind}.csv", dataio.write_csv, dataio.POLARITY_HEADER,
                       ([r[h] for h in dataio.POLARITY_HEADER] for r in rows))
            polarity[kind] = rows
        self._emit(d / "fig_polarity.png", lambda p: plotting.plot_polarity(polarity, p))

        tables, aucs, interp = {}, {}, {}
        for model in cfg.models:
            mean_path = fdir / f"mean_{model}.csv"
            if mean_path.exists():
                tables[model] = read_coef(mean_path)
                self._emit(d / f"coef_{model}.csv", _write_coef, tables[model])
            gof_rows = {
                stat: [{k: float(v) for k, v in r.items()} for _, r in dataio.read_rows(gdir / f"{model}_{stat}.csv",
                                                                                     dataio.GOF_HEADER)]
                for stat in ("degree", "esp", "modularity")
                if (gdir / f"{model}_{stat}.csv").exists()
            }
            if gof_rows:
                self._emit(d / f"fig_gof_{model}.png", lambda p, r=gof_rows, t=model: plotting.plot_gof(r, p, t))
            pred = pdir / f"{model}.csv"
            if pred.exists():
                aucs[model] = [
                    {"test_year": int(r["test_year"]), "aucpr": float(r["aucpr"]), "baseline": float(r["baseline"])}
                    for _, r in dataio.read_rows(pred, dataio.PREDICT_HEADER)
                ]
        if tables:
            self._emit(d / "fig_coefficients.png", lambda p: plotting.plot_coefficients(tables, p))
            first = next(iter(tables.values()))
            coefs = {r["term"]: r["estimate"] for r in first}
            interp = {
                term: dict(zip(("probability", "odds_multiplier"), interpret(coefs, term)))
                for term in coefs
            }
        if aucs:
            self._emit(d / "fig_aucpr.png", lambda p: plotting.plot_aucpr(aucs, p))
            rows = [
                (model, r["test_year"], r["aucpr"], r["baseline"]) for model, rs in aucs.items() for r in rs
            ]
            self._emit(d / "aucpr.csv", dataio.write_csv, ("model",) + dataio.PREDICT_HEADER, rows)
        self._emit_json(d / "interpretation.json", interp)


def _restrict_communities(cs: CommunitySet, vertices: Sequence[str]) -> CommunitySet:
    """Drop members outside the panel's vertex set; communities left with < 2 members vanish."""
    keep = set(vertices)
    out = []
    for c in cs.communities:
        vs = c.vertices & keep
        if len(vs) >= 2:
            out.append(Community(frozenset(vs), c.layers, c.score))
    if len(out) < len(cs.communities) or any(len(c.vertices - keep) for c in cs.communities):
        log.info("year %d: community members outside the panel were dropped", cs.year)
    return CommunitySet(cs.year, tuple(out))


def _write_coef(path, table: Sequence[Mapping]) -> None:
    dataio.write_csv(path, dataio.COEF_HEADER, ([r[h] for h in dataio.COEF_HEADER] for r in table))


def read_coef(path) -> list[dict]:
    out = []
    for _, r in dataio.read_rows(path, dataio.COEF_HEADER):
        out.append(
            {
                "term": r["term"],
                "estimate": float(r["estimate"]),
                "ci_lo": float(r["ci_lo"]),
                "ci_hi": float(r["ci_hi"]),
                "significant": r["significant"] == "true",
            }
        )
    return out


def mean_table(tables: Sequence[Sequence[Mapping]]) -> list[dict]:
    """Average estimates and interval bounds over grid settings; significance from the averaged interval."""
    terms = [r["term"] for r in tables[0]]
    out = []
    for t in terms:
        rows = [r for tab in tables for r in tab if r["term"] == t]
        est = float(np.mean([r["estimate"] for r in rows]))
        lo = float(np.mean([r["ci_lo"] for r in rows]))
        hi = float(np.mean([r["ci_hi"] for r in rows]))
        out.append({"term": t, "estimate": est, "ci_lo": lo, "ci_hi": hi, "significant": bool(lo > 0 or hi < 0)})
    return out


def mean_polarity(per_setting: Sequence[Sequence[Mapping]]) -> list[dict]:
    years = sorted({r["year"] for rows in per_setting for r in rows})
    out = []
    for y in years:
        rows = [r for rs in per_setting for r in rs if r["year"] == y]
        out.append(
            {
                "year": y,
                "n_communities": float(np.mean([r["n_communities"] for r in rows])),
                "pct_assigned": float(np.mean([r["pct_assigned"] for r in rows])),
                "pct_bridges": float(np.mean([r["pct_bridges"] for r in rows])),
            }
        )
    return out


def load_grid(path) -> dict:
    """Read a YAML grid/config override file."""
    try:
        payload = yaml.safe_load(dataio.read_text(path)) or {}
    except yaml.YAMLError as exc:
        raise DataError(f"{path}: {exc}") from None
    if not isinstance(payload, dict):
        raise DataError(f"{path}: expected a mapping of configuration keys")
    return payload
