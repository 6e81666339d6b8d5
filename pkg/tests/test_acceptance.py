"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""
import itertools
import json
import math
import time

import numpy as np
import pytest
import yaml

from conftest import ACCEPTANCE_LINES, random_graph
from mlconflict import cli, dataio
from mlconflict.affinity import mutual_knn
from mlconflict.docdist import BowVector, CostOracle, rwmd, wmd_exact
from mlconflict.extraction import ExtractionConfig, extract
from mlconflict.fixtures import generate_fixture
from mlconflict.graphs import MultilayerGraph, build_window_layer
from mlconflict.pipeline import BASELINE_TERMS
from mlconflict.tergm.bootstrap import bootstrap_ci, interpret
from mlconflict.tergm.mple import fit_mple
from mlconflict.tergm.panel import ModelSpec, PanelSeries, YearData
from mlconflict.tergm.simulate import simulate
from mlconflict.tergm.terms import change_statistics_all, compute_statistics
from mlconflict.text.corpus import count_cooccurrence
from mlconflict.text.glove import EmbeddingSpace, entry_loss_and_grad, train_embeddings
from panels import symmetric


def record(number, ok, detail, started):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail}; {time.perf_counter() - started:.1f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_logit_arithmetic():
    t0 = time.perf_counter()
    p, _ = interpret({"edges": -7.76}, "edges")
    _, odds = interpret({"edges": -7.76, "edgecov(contiguity)": 3.78}, "edgecov(contiguity)")
    ok = 0.00040 <= p <= 0.00045 and abs(odds - 43.82) <= 0.01
    record(1, ok, f"baseline probability {p:.6f}, contiguity odds multiplier {odds:.3f}", t0)


def test_criterion_02_gwesp_identity():
    t0 = time.perf_counter()
    spec = ModelSpec.of("edges", "gwesp(0)")
    checked = bad = 0
    for n in range(1, 7):
        pairs = list(itertools.combinations(range(n), 2))
        for mask in range(2 ** len(pairs)):
            A = np.zeros((n, n), dtype=np.int64)
            for b, (i, j) in enumerate(pairs):
                if (mask >> b) & 1:
                    A[i, j] = A[j, i] = 1
            want = sum(1 for i, j in pairs if A[i, j] and (A[i] & A[j]).any())
            bad += compute_statistics(A, None, None, spec)[1] != want
            checked += 1
    record(2, bad == 0, f"{checked} graphs on up to 6 vertices, {bad} mismatches", t0)


def _table1_panel(rng, n=10):
    cov = {}
    for name in ("contiguity", "trade", "sec_igo", "econ_igo", "weak_tie", "weak_joint"):
        cov[name] = symmetric(rng, n, lambda s: rng.random(s) * (name != "contiguity") + (rng.random(s) < 0.3) * (name == "contiguity"))
    nodal = {
        "democracy": rng.integers(-10, 11, n).astype(float),
        "capability": rng.lognormal(-4, 1, n),
        "weak_bridge": rng.integers(0, 2, n).astype(float),
    }
    return YearData(tuple(map(str, range(n))), random_graph(rng, n, rng.uniform(0.1, 0.6)), cov, nodal)


def test_criterion_03_change_statistic_oracle():
    t0 = time.perf_counter()
    spec = ModelSpec.of(*BASELINE_TERMS, "edgecov(weak_tie)", "edgecov(weak_joint)", "bridge(weak_bridge)", "twostar")
    integer = [k for k, t in enumerate(spec.terms) if t.kind in ("edges", "twostar", "fourcycle", "memory", "joint", "bridge") or t.label == "gwesp(0)"]
    rng = np.random.default_rng(3)
    worst, bad_int, dyads = 0.0, 0, 0
    for _ in range(100):
        yd = _table1_panel(rng)
        prev = random_graph(rng, 10, 0.3)
        X, pairs = change_statistics_all(yd.outcome, yd, prev, spec)
        for row, (i, j) in zip(X, pairs):
            on, off = yd.outcome.copy(), yd.outcome.copy()
            on[i, j] = on[j, i] = 1
            off[i, j] = off[j, i] = 0
            want = compute_statistics(on, yd, prev, spec) - compute_statistics(off, yd, prev, spec)
            bad_int += int(np.any(row[integer] != want[integer]))
            worst = max(worst, float(np.max(np.abs(row - want))))
            dyads += 1
    ok = bad_int == 0 and worst <= 1e-9
    record(3, ok, f"{len(spec)} terms x {dyads} dyads, integer mismatches {bad_int}, max abs error {worst:.1e}", t0)


def test_criterion_04_mple_recovery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    n = 60
    names = tuple(map(str, range(n)))
    panel = PanelSeries({2000 + k: YearData(names, random_graph(rng, n, 0.2)) for k in range(50)})
    edges = fit_mple(panel, ModelSpec.of("edges")).coef[0]
    ok_edges = abs(edges - math.log(0.25)) <= 0.05

    truth = np.array([-2.5, 1.0, -0.8])
    spec = ModelSpec.of("edges", "edgecov(x1)", "edgecov(x2)")
    hits = 0
    for trial in range(20):
        data = {}
        for year in range(2000, 2010):
            x1 = symmetric(rng, 40, lambda s: (rng.random(s) < 0.4).astype(float))
            x2 = symmetric(rng, 40, lambda s: rng.normal(size=s))
            eta = truth[0] + truth[1] * x1 + truth[2] * x2
            y = symmetric(rng, 40, lambda s: (rng.random(s) < 1 / (1 + np.exp(-eta))).astype(int))
            data[year] = YearData(tuple(map(str, range(40))), y, {"x1": x1, "x2": x2})
        fit = bootstrap_ci(PanelSeries(data), spec, reps=200, seed=trial)
        se = np.nanstd(fit.replicates, axis=0, ddof=1)
        hits += bool(np.all(np.abs(fit.coefficients - truth) <= 3 * se))
    record(4, ok_edges and hits >= 18, f"pooled edges {edges:.4f} vs -1.3863; covariate model within 3 SE in {hits}/20", t0)


def test_criterion_05_exact_sampler():
    t0 = time.perf_counter()
    n = 5
    spec = ModelSpec.of("edges", "gwesp(0)")
    coef = np.array([-0.6, 0.5])
    pairs = list(itertools.combinations(range(n), 2))
    logw = np.empty(2 ** len(pairs))
    for mask in range(logw.size):
        A = np.zeros((n, n), dtype=np.int64)
        for b, (i, j) in enumerate(pairs):
            if (mask >> b) & 1:
                A[i, j] = A[j, i] = 1
        logw[mask] = coef @ compute_statistics(A, None, None, spec)
    p = np.exp(logw - logw.max())
    p /= p.sum()
    yd = YearData(tuple("abcde"), np.zeros((n, n), dtype=int))
    draws = simulate(coef, yd, None, spec, n_sims=300_000, interval=len(pairs), burnin=1000, seed=5)
    bits = np.array([1 << b for b in range(len(pairs))])
    iu = np.array(pairs).T
    codes = np.array([d[iu[0], iu[1]] for d in draws]) @ bits
    freq = np.bincount(codes, minlength=p.size) / len(draws)
    tv = 0.5 * np.abs(freq - p).sum()
    record(5, tv < 0.05, f"total variation {tv:.4f} over {p.size} states from {len(draws)} draws", t0)


def test_criterion_06_rwmd_lower_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst, zero_ok = -np.inf, True
    for _ in range(500):
        v = int(rng.integers(2, 7))
        space = EmbeddingSpace(tuple(f"w{i}" for i in range(v)), rng.normal(size=(v, 4)))
        costs = CostOracle(space)
        docs = []
        for _ in range(2):
            k = int(rng.integers(1, v + 1))
            toks = rng.choice(space.vocabulary, size=k, replace=False)
            docs.append(BowVector("d", dict(zip(toks, rng.dirichlet(np.ones(k))))))
        a, b = docs
        worst = max(worst, rwmd(a, b, costs) - wmd_exact(a, b, costs))
        zero_ok &= rwmd(a, a, costs) == 0.0
    ok = worst <= 1e-9 and zero_ok
    record(6, ok, f"max(RWMD - WMD) = {worst:.2e} over 500 instances, identical documents zero: {zero_ok}", t0)


def test_criterion_07_glove_gradient_and_geometry():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    d, h, worst = 8, 1e-6, 0.0
    for _ in range(100):
        theta = rng.normal(size=2 * d + 2)
        x = rng.uniform(0.1, 40.0)

        def f(t):
            return entry_loss_and_grad(t[:d], t[d : 2 * d], t[2 * d], t[2 * d + 1], x, 15.0)

        _, grads = f(theta)
        analytic = np.concatenate([grads[0], grads[1], [grads[2], grads[3]]])
        numeric = np.array([(f(theta + h * e)[0] - f(theta - h * e)[0]) / (2 * h) for e in np.eye(theta.size)])
        worst = max(worst, np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), 1e-12))
    c1, c2 = [f"alpha{i}" for i in range(8)], [f"beta{i}" for i in range(8)]
    docs = [list(rng.choice(c1 if k % 2 == 0 else c2, size=60)) for k in range(40)]
    space = train_embeddings(count_cooccurrence(docs, 5), dimension=10, x_max=15, epochs=50, seed=0)
    nv, idx = space.normalized(), space.index
    within = np.mean([nv[idx[a]] @ nv[idx[b]] for g in (c1, c2) for a, b in itertools.combinations(g, 2)])
    cross = np.mean([nv[idx[a]] @ nv[idx[b]] for a in c1 for b in c2])
    ok = worst < 1e-4 and within > cross
    record(7, ok, f"max gradient rel. error {worst:.1e}; cosine within {within:.3f} vs cross {cross:.3f}", t0)


def test_criterion_08_mutual_knn_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    names = [f"C{i:02d}" for i in range(30)]
    bad = 0
    for trial in range(100):
        m = rng.random((30, 30))
        if trial % 2:
            m = np.round(m * 4) / 4  # many ties
        m = np.triu(m, 1)
        m = m + m.T
        top = []
        for i in range(30):
            cands = sorted((j for j in range(30) if j != i and m[i, j] > 0), key=lambda j: (-m[i, j], names[j]))
            top.append(set(cands[:5]))
        want = np.array([[int(j in top[i] and i in top[j]) for j in range(30)] for i in range(30)])
        bad += not np.array_equal(mutual_knn(m, 5, names), want)
    record(8, bad == 0, f"{bad} mismatches over 100 matrices", t0)


def test_criterion_09_planted_recovery(tmp_path):
    t0 = time.perf_counter()
    props = (0.20, 0.25, 0.30)
    hits = dict.fromkeys(props, 0)
    params = {"n_vertices": 60, "n_layers": 4, "block_sizes": [10], "dense_layers": [[0, 1]],
              "p_noise": 0.05, "span": [1970, 1970], "with_panel": False}
    for seed in range(50):
        out = generate_fixture("planted-communities", tmp_path / str(seed), params, seed=seed)
        truth = json.loads((out / "truth.json").read_text())
        events = dataio.read_events(out / "treaty_events.csv")
        ents = sorted({e for a, b, *_ in events for e in (a, b)})
        layers = tuple(
            (layer, build_window_layer([(a, b, y) for a, b, y, l in events if l == layer], 1970, vertices=ents)[1])
            for layer in truth["layers"]
        )
        g = MultilayerGraph(1970, tuple(ents), layers)
        block, block_layers = set(truth["blocks"][0]["vertices"]), set(truth["blocks"][0]["layers"])
        for prop in props:
            cs = extract(g, ExtractionConfig((prop,)), seed=seed)
            hits[prop] += any(
                len(c.vertices & block) / len(c.vertices | block) >= 0.9 and set(c.layers) == block_layers
                for c in cs.communities
            )
    ok = all(h >= 48 for h in hits.values())
    record(9, ok, "recovered in " + ", ".join(f"{h}/50 at {p:.2f}" for p, h in hits.items()), t0)


def test_criterion_10_pipeline_reporting(tmp_path):
    t0 = time.perf_counter()
    data = generate_fixture("known-ergm-panel", tmp_path / "data", seed=10)
    grid = tmp_path / "grid.yaml"
    grid.write_text(yaml.safe_dump({"dims": [50], "x_max": [15], "init_proportions": [0.2, 0.25, 0.3]}), encoding="utf-8")
    out = tmp_path / "run"
    code = cli.main(["all", str(data / "manifest.yaml"), "--out", str(out), "--grid", str(grid),
                     "--reps", "200", "--gof-sims", "50"])
    report = out / "report"
    problems = []
    if code != 0:
        problems.append(f"exit {code}")
    for name in ("polarity_strong.csv", "polarity_weak.csv"):
        rows = dataio.read_polarity(report / name) if (report / name).exists() else []
        if [r["year"] for r in rows] != list(range(1970, 1991)):
            problems.append(f"{name} years")
    coef_files = sorted(report.glob("coef_model*.csv"))
    for p in coef_files:
        rows = dataio.read_rows(p, dataio.COEF_HEADER)
        if not rows or rows[0][1]["term"] != "edges":
            problems.append(p.name)
    fits = sorted((out / "fit").glob("*.json"))
    reps = {json.loads(p.read_text()).get("meta", {}).get("reps") for p in fits if p.name != "summary.json"}
    if reps != {200}:
        problems.append(f"bootstrap reps {reps}")
    state = json.loads((out / "state.json").read_text())
    if state["config"]["gof_sims"] != 50:
        problems.append("gof sims")
    for stat in ("degree", "esp", "modularity"):
        if not list((out / "gof").glob(f"*_{stat}.csv")):
            problems.append(f"gof {stat}")
    rows = [r for _, r in dataio.read_rows(report / "aucpr.csv", dataio.PREDICT_HEADER)]
    by_model = {}
    for r in rows:
        by_model.setdefault(r.get("model", "all"), []).append((float(r["aucpr"]), float(r["baseline"])))
    worst = min(np.mean([a for a, _ in v]) - np.mean([b for _, b in v]) for v in by_model.values()) if by_model else -1
    if worst <= 0:
        problems.append("AUC-PR not above baseline")
    detail = f"{len(coef_files)} coefficient tables, min mean AUC-PR margin over baseline {worst:.3f}"
    record(10, not problems, detail + (f"; problems: {problems}" if problems else ""), t0)
