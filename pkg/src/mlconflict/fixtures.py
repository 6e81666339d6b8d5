"""Synthetic datasets with known ground truth, written in the pipeline's input formats.

Kinds
    planted-communities  treaty layers with dense vertex blocks in a subset of layers
    known-ergm-panel     full dataset whose conflict network follows a known
                         dyad-independent model (edges, covariates, memory)
    clustered-corpus     speeches whose words co-occur only within topic clusters

Every kind writes ``truth.json`` next to the data; the first two also write a
``manifest.yaml`` runnable by the CLI.
"""
from __future__ import annotations

import itertools
import json
import string
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.special import expit

from mlconflict import dataio
from mlconflict.graphs import WINDOW_LENGTH
from mlconflict.manifest import DatasetManifest, DyadicSource, write_manifest

TREATY_CATEGORIES = {
    "7SCIEN": "science",
    "9MILIT": "military",
    "3COMMO": "commodities",
    "8FISH": "fisheries",
    "6TELCO": "telecom",
}

_CONSONANTS = "bcdfgklmnprstvz"
_VOWELS = "aeiou"


def entity_codes(n: int) -> list[str]:
    """Deterministic three-letter identifiers AAA, AAB, ..."""
    return ["".join(t) for t in itertools.islice(itertools.product(string.ascii_uppercase, repeat=3), n)]


def pseudo_words(n: int, rng: np.random.Generator) -> list[str]:
    """Distinct consonant-vowel words that survive stemming unchanged in form class."""
    words: list[str] = []
    seen = set()
    while len(words) < n:
        syll = rng.integers(2, 4)
        w = "".join(rng.choice(list(_CONSONANTS)) + rng.choice(list(_VOWELS)) for _ in range(syll))
        w += rng.choice(list("kmnt"))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


@dataclass
class CorpusParams:
    n_clusters: int = 3
    words_per_cluster: int = 25
    common_words: int = 20
    doc_length: int = 120
    common_frac: float = 0.2


@dataclass
class PlantedParams:
    n_vertices: int = 60
    n_layers: int = 4
    block_sizes: tuple = (10,)
    dense_layers: tuple = ((0, 1),)
    p_in: float = 0.9
    p_noise: float = 0.05
    span: tuple = (1970, 1977)
    with_panel: bool = True


@dataclass
class PanelParams:
    n_vertices: int = 30
    span: tuple = (1970, 1990)
    edges: float = -3.0
    contiguity: float = 2.0
    memory: float = 1.0
    democracy: float = 0.0
    capability: float = 0.0
    trade: float = 0.0
    sec_igo: float = 0.0
    econ_igo: float = 0.0
    contiguity_radius: float = 0.25
    n_blocs: int = 3
    treaty_blocks: tuple = (8, 8)
    treaty_dense_layers: tuple = ((0, 1, 2), (2, 3, 4))
    p_in: float = 0.8
    p_noise: float = 0.05


def _params(cls, params: dict | None):
    params = dict(params or {})
    names = {f.name for f in fields(cls)}
    unknown = set(params) - names
    if unknown:
        raise ValueError(f"unknown fixture parameters {sorted(unknown)} for {cls.__name__}")
    p = cls(**params)
    for f in fields(cls):
        v = getattr(p, f.name)
        if isinstance(v, list):
            setattr(p, f.name, tuple(tuple(x) if isinstance(x, list) else x for x in v))
    return p


def _per_year_prob(p_window: float, window: int = WINDOW_LENGTH) -> float:
    """Yearly event probability giving window-level tie probability ``p_window``."""
    return 1.0 - (1.0 - p_window) ** (1.0 / window)


def _treaty_events(rng, entities, layers, blocks, dense, p_in, p_noise, span):
    """Events whose 10-year window adjacency has the planted block structure in every span year."""
    n = len(entities)
    q_noise = _per_year_prob(p_noise)
    q_in = _per_year_prob(p_in)
    iu = np.triu_indices(n, 1)
    events = []
    for year in range(span[0] - WINDOW_LENGTH + 1, span[1] + 1):
        for l, layer in enumerate(layers):
            q = np.full((n, n), q_noise)
            for members, dl in zip(blocks, dense):
                if l in dl:
                    q[np.ix_(members, members)] = q_in
            hit = rng.random(iu[0].size) < q[iu]
            for i, j in zip(iu[0][hit], iu[1][hit]):
                events.append((entities[i], entities[j], year, layer))
    return events


def _corpus(rng, p: CorpusParams):
    words = pseudo_words(p.n_clusters * p.words_per_cluster + p.common_words, rng)
    clusters = [words[c * p.words_per_cluster : (c + 1) * p.words_per_cluster] for c in range(p.n_clusters)]
    common = words[p.n_clusters * p.words_per_cluster :]
    return clusters, common


def _document(rng, cluster_words, common, p: CorpusParams) -> str:
    toks = []
    for _ in range(p.doc_length):
        pool = common if rng.random() < p.common_frac else cluster_words
        toks.append(pool[rng.integers(len(pool))])
    return " ".join(toks)


def _write_truth(out: Path, truth: dict) -> None:
    (out / "truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _panel_sources(rng, out: Path, entities, years, params: PanelParams, blocs):
    """Covariates, ideal points, speeches and a conflict panel from the known model."""
    n = len(entities)
    iu = np.triu_indices(n, 1)
    pos = rng.random((n, 2))
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    contig = (dist < params.contiguity_radius).astype(float)
    np.fill_diagonal(contig, 0.0)
    polity = rng.integers(-10, 11, n).astype(float)
    cap = rng.lognormal(-4.0, 1.0, n)
    sec = rng.poisson(2.0, (n, n)).astype(float)
    sec = np.triu(sec, 1) + np.triu(sec, 1).T
    econ = rng.poisson(5.0, (n, n)).astype(float)
    econ = np.triu(econ, 1) + np.triu(econ, 1).T

    nodal = {"democracy": {}, "capability": {}}
    dyadic = {"contiguity": {}, "trade": {}, "sec_igo": {}, "econ_igo": {}}
    ideal = {}
    centers = np.linspace(-1.5, 1.5, max(1, params.n_blocs))
    x = centers[blocs] + rng.normal(0, 0.2, n)
    cprob = CorpusParams(n_clusters=max(1, params.n_blocs))
    clusters, common = _corpus(rng, cprob)
    conflict_rows = []
    prev = np.zeros((n, n))
    coefs = {k: getattr(params, k) for k in ("edges", "contiguity", "memory", "democracy", "capability", "trade", "sec_igo", "econ_igo")}
    for year in years:
        polity = np.clip(polity + rng.integers(-1, 2, n), -10, 10)
        cap = cap * np.exp(rng.normal(0, 0.05, n))
        trade = rng.exponential(0.01, (n, n)) * (rng.random((n, n)) < 0.3)
        np.fill_diagonal(trade, 0.0)
        x = x + rng.normal(0, 0.05, n)
        ideal[year] = {e: float(v) for e, v in zip(entities, x)}
        nodal["democracy"][year] = {e: float(v) for e, v in zip(entities, polity)}
        nodal["capability"][year] = {e: float(v) for e, v in zip(entities, cap)}
        dyadic["contiguity"][year] = dataio.matrix_to_dyadic(year, entities, contig)
        dyadic["sec_igo"][year] = dataio.matrix_to_dyadic(year, entities, sec)
        dyadic["econ_igo"][year] = dataio.matrix_to_dyadic(year, entities, econ)
        dyadic["trade"][year] = {
            (entities[i], entities[j]): float(trade[i, j]) for i in range(n) for j in range(n) if trade[i, j] > 0
        }
        dem = (polity >= 7).astype(float)
        ratio = np.log10(np.maximum.outer(cap, cap) / np.minimum.outer(cap, cap))
        eta = (
            coefs["edges"]
            + coefs["contiguity"] * contig
            + coefs["memory"] * prev
            + coefs["democracy"] * np.outer(dem, dem)
            + coefs["capability"] * ratio
            + coefs["trade"] * np.maximum(trade, trade.T)
            + coefs["sec_igo"] * sec
            + coefs["econ_igo"] * econ
        )
        ties = rng.random(iu[0].size) < expit(eta[iu])
        net = np.zeros((n, n))
        net[iu[0][ties], iu[1][ties]] = 1
        net = net + net.T
        for i, j in zip(iu[0][ties], iu[1][ties]):
            conflict_rows.append((entities[i], entities[j], year, int(rng.choice([4, 5]))))
        # lower-level disputes never count as onset
        for i, j in zip(*np.nonzero(np.triu(rng.random((n, n)) < 0.01, 1))):
            if not net[i, j]:
                conflict_rows.append((entities[i], entities[j], year, int(rng.integers(1, 4))))
        prev = net
        for k, e in enumerate(entities):
            dataio.write_speech(out / "speeches", e, f"{year - 1945}", year, _document(rng, clusters[blocs[k]], common, cprob))

    dataio.write_ideal_points(out / "ideal_points.csv", ideal)
    dataio.write_conflict_rows(out / "conflict.csv", conflict_rows)
    for name, table in nodal.items():
        dataio.write_nodal(out / f"{name}.csv", table)
    for name, table in dyadic.items():
        dataio.write_dyadic(out / f"{name}.csv", table)
    dataio.write_csv(out / "members.csv", dataio.MEMBER_HEADER, ((e, y) for y in years for e in entities))
    return coefs, {"clusters": clusters, "common": common}


def _manifest(out: Path, span, category_map) -> Path:
    m = DatasetManifest(
        base_dir=out,
        treaty_events="treaty_events.csv",
        ideal_points="ideal_points.csv",
        speeches="speeches",
        conflict="conflict.csv",
        span=tuple(span),
        nodal={"democracy": "democracy.csv", "capability": "capability.csv"},
        dyadic={
            "contiguity": DyadicSource("contiguity.csv"),
            "trade": DyadicSource("trade.csv", "max"),
            "sec_igo": DyadicSource("sec_igo.csv"),
            "econ_igo": DyadicSource("econ_igo.csv"),
        },
        category_map=dict(category_map),
        system_members="members.csv",
    )
    path = out / "manifest.yaml"
    write_manifest(m, path)
    return path


def generate_fixture(kind: str, out_dir, params: dict | None = None, seed: int = 0) -> Path:
    """Write a synthetic dataset of the given kind; returns the output directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng([seed, {"planted-communities": 1, "known-ergm-panel": 2, "clustered-corpus": 3}.get(kind, 0)])
    if kind == "planted-communities":
        p = _params(PlantedParams, params)
        if len(p.dense_layers) != len(p.block_sizes):
            raise ValueError("dense_layers needs one layer tuple per block")
        entities = entity_codes(p.n_vertices)
        layers = list(TREATY_CATEGORIES.values())[: p.n_layers] if p.n_layers <= 5 else [f"layer{l}" for l in range(p.n_layers)]
        perm = rng.permutation(p.n_vertices)
        blocks, start = [], 0
        for size in p.block_sizes:
            blocks.append(np.sort(perm[start : start + size]))
            start += size
        events = _treaty_events(rng, entities, layers, blocks, p.dense_layers, p.p_in, p.p_noise, p.span)
        dataio.write_events(out / "treaty_events.csv", events)
        truth = {
            "kind": kind,
            "seed": seed,
            "params": asdict(p),
            "layers": layers,
            "blocks": [
                {"vertices": [entities[i] for i in b], "layers": [layers[l] for l in dl]}
                for b, dl in zip(blocks, p.dense_layers)
            ],
        }
        if p.with_panel:
            years = list(range(p.span[0], p.span[1] + 1))
            pp = PanelParams(n_vertices=p.n_vertices, span=p.span)
            blocs = rng.integers(0, pp.n_blocs, p.n_vertices)
            coefs, corpus = _panel_sources(rng, out, entities, years, pp, blocs)
            truth["coefficients"] = coefs
            _manifest(out, p.span, {})
        _write_truth(out, truth)
    elif kind == "known-ergm-panel":
        p = _params(PanelParams, params)
        entities = entity_codes(p.n_vertices)
        years = list(range(p.span[0], p.span[1] + 1))
        blocs = rng.integers(0, p.n_blocs, p.n_vertices)
        codes = list(TREATY_CATEGORIES)
        perm = rng.permutation(p.n_vertices)
        blocks, start = [], 0
        for size in p.treaty_blocks:
            blocks.append(np.sort(perm[start : start + size]))
            start += size
        events = _treaty_events(rng, entities, codes, blocks, p.treaty_dense_layers, p.p_in, p.p_noise, p.span)
        dataio.write_events(out / "treaty_events.csv", events)
        coefs, corpus = _panel_sources(rng, out, entities, years, p, blocs)
        _manifest(out, p.span, TREATY_CATEGORIES)
        _write_truth(
            out,
            {
                "kind": kind,
                "seed": seed,
                "params": asdict(p),
                "coefficients": coefs,
                "vote_blocs": {e: int(b) for e, b in zip(entities, blocs)},
                "blocks": [
                    {"vertices": [entities[i] for i in b], "layers": [TREATY_CATEGORIES[codes[l]] for l in dl]}
                    for b, dl in zip(blocks, p.treaty_dense_layers)
                ],
            },
        )
    elif kind == "clustered-corpus":
        params = dict(params or {})
        n_docs = int(params.pop("docs_per_cluster", 20))
        year = int(params.pop("year", 1970))
        p = _params(CorpusParams, params)
        clusters, common = _corpus(rng, p)
        doc_clusters = {}
        for c, words in enumerate(clusters):
            for d in range(n_docs):
                entity = f"D{c}{d:03d}"
                dataio.write_speech(out / "speeches", entity, "S1", year, _document(rng, words, common, p))
                doc_clusters[entity] = c
        _write_truth(
            out,
            {"kind": kind, "seed": seed, "params": asdict(p), "clusters": clusters, "common": common,
             "doc_clusters": doc_clusters},
        )
    else:
        raise ValueError(f"unknown fixture kind {kind!r}")
    return out
