"""Static figures for the report stage, written next to the CSVs they are drawn from."""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps PNG output byte-stable across runs
_PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_polarity(series: Mapping[str, Sequence[Mapping]], path) -> Path:
    """Community counts and assigned/bridge shares per year, one line per series."""
    fig, (ax_n, ax_p) = plt.subplots(1, 2, figsize=(10, 3.5))
    for name, rows in series.items():
        years = [r["year"] for r in rows]
        ax_n.plot(years, [r["n_communities"] for r in rows], marker="o", ms=3, label=name)
        line, = ax_p.plot(years, [100 * r["pct_assigned"] for r in rows], label=f"{name} assigned")
        ax_p.plot(years, [100 * r["pct_bridges"] for r in rows], ls="--", color=line.get_color(),
                  label=f"{name} bridges")
    ax_n.set(xlabel="year", ylabel="communities")
    ax_p.set(xlabel="year", ylabel="% of states")
    ax_n.legend(fontsize=7)
    ax_p.legend(fontsize=7)
    return _save(fig, path)


def plot_coefficients(tables: Mapping[str, Sequence[Mapping]], path) -> Path:
    """Point estimates with interval bars, one panel column per model."""
    names = list(tables)
    terms: list[str] = []
    for rows in tables.values():
        terms += [r["term"] for r in rows if r["term"] not in terms]
    fig, axes = plt.subplots(1, len(names), figsize=(2.6 * len(names) + 1, 0.35 * len(terms) + 1.5),
                             sharey=True, squeeze=False)
    for ax, name in zip(axes[0], names):
        by_term = {r["term"]: r for r in tables[name]}
        for k, t in enumerate(terms):
            r = by_term.get(t)
            if r is None:
                continue
            color = "black" if r["significant"] else "grey"
            ax.plot([r["ci_lo"], r["ci_hi"]], [k, k], color=color, lw=1.5)
            ax.plot(r["estimate"], k, "o", color=color, ms=4)
        ax.axvline(0, color="red", lw=0.6)
        ax.set_title(name, fontsize=9)
    axes[0][0].set_yticks(range(len(terms)), terms, fontsize=7)
    axes[0][0].invert_yaxis()
    return _save(fig, path)


def plot_gof(report: Mapping[str, Sequence[Mapping]], path, title: str = "") -> Path:
    """Observed statistics against pooled simulation envelopes (medians over years)."""
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    for ax, stat in zip(axes[:2], ("degree", "esp")):
        rows = report.get(stat, [])
        bins = sorted({r["bin"] for r in rows})
        agg = {b: [r for r in rows if r["bin"] == b] for b in bins}

        def mean(b, key):
            return sum(r[key] for r in agg[b]) / len(agg[b])

        ax.fill_between(bins, [mean(b, "min") for b in bins], [mean(b, "max") for b in bins], color="0.85")
        ax.fill_between(bins, [mean(b, "q25") for b in bins], [mean(b, "q75") for b in bins], color="0.65")
        ax.plot(bins, [mean(b, "median") for b in bins], color="0.3", lw=1)
        ax.plot(bins, [mean(b, "observed") for b in bins], color="black", lw=2)
        ax.set(xlabel=stat, ylabel="log(count + 1)")
    rows = report.get("modularity", [])
    years = [r["year"] for r in rows]
    ax = axes[2]
    ax.fill_between(years, [r["min"] for r in rows], [r["max"] for r in rows], color="0.85")
    ax.fill_between(years, [r["q25"] for r in rows], [r["q75"] for r in rows], color="0.65")
    ax.plot(years, [r["observed"] for r in rows], color="black", lw=2)
    ax.set(xlabel="year", ylabel="modularity")
    if title:
        fig.suptitle(title, fontsize=10)
    return _save(fig, path)


def plot_aucpr(results: Mapping[str, Sequence[Mapping]], path) -> Path:
    """Per-model test-year AUC-PR next to the positive-rate baseline."""
    names = list(results)
    fig, ax = plt.subplots(figsize=(1.3 * len(names) + 2, 3.5))
    data = [[r["aucpr"] for r in results[n]] or [float("nan")] for n in names]
    base = [r["baseline"] for n in names for r in results[n]]
    ax.boxplot(data)
    ax.set_xticks(range(1, len(names) + 1), names)
    if base:
        ax.axhline(sum(base) / len(base), color="red", ls="--", lw=1, label="random")
        ax.legend(fontsize=8)
    ax.set_ylabel("AUC-PR")
    return _save(fig, path)
