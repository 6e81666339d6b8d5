"""Weighted least-squares log-bilinear embeddings trained on co-occurrence counts."""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from mlconflict import DataError, NumericalError
from mlconflict.text.corpus import CooccurrenceMatrix

log = logging.getLogger(__name__)

ALPHA = 0.75
LEARNING_RATE = 0.05


def weight(x, x_max: float, alpha: float = ALPHA):
    """f(x) = (min(x, x_max) / x_max) ** alpha."""
    return np.minimum(np.asarray(x, dtype=float) / x_max, 1.0) ** alpha


def entry_loss_and_grad(u, v, bu, bv, x, x_max, alpha=ALPHA):
    """Loss 0.5 f(x) (u.v + bu + bv - log x)^2 and its gradient wrt (u, v, bu, bv)."""
    fx = float(weight(x, x_max, alpha))
    err = float(np.dot(u, v) + bu + bv - np.log(x))
    loss = 0.5 * fx * err * err
    g = fx * err
    return loss, (g * np.asarray(v), g * np.asarray(u), g, g)


@dataclass
class GloveParams:
    """The full trainable parameter collection (vectors and biases, main and context)."""

    main: np.ndarray
    context: np.ndarray
    bias_main: np.ndarray
    bias_context: np.ndarray


@dataclass(frozen=True)
class EmbeddingSpace:
    vocabulary: tuple[str, ...]
    vectors: np.ndarray
    x_max: float = 0.0
    iterations: int = 0
    final_loss: float = float("nan")
    loss_trace: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.vectors.shape[0] != len(self.vocabulary):
            raise DataError("one vector per vocabulary token required")
        if not np.all(np.isfinite(self.vectors)):
            raise NumericalError("non-finite embedding entries")

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.vocabulary)}

    def vector(self, token: str) -> np.ndarray:
        try:
            return self.vectors[self.index[token]]
        except KeyError:
            raise KeyError(f"unknown token {token!r}") from None

    def normalized(self) -> np.ndarray:
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return self.vectors / norms


def train_embeddings(
    cooc: CooccurrenceMatrix,
    dimension: int = 50,
    x_max: float = 15.0,
    epochs: int = 25,
    seed: int = 0,
    *,
    alpha: float = ALPHA,
    learning_rate: float = LEARNING_RATE,
    use_bias: bool = True,
    batch_size: int = 64,
    return_params: bool = False,
):
    """Fit main and context vectors by AdaGrad over the nonzero co-occurrence entries.

    The returned space holds the average of main and context vectors. Entries
    are visited in a seeded random order each epoch in mini-batches; with
    ``batch_size=1`` this is plain per-entry stochastic descent.
    """
    rows, cols, vals = cooc.entries()
    if vals.size == 0:
        raise DataError("co-occurrence matrix is empty")
    n = len(cooc.vocabulary)
    rng = np.random.default_rng(seed)
    scale = 0.5 / dimension
    W = rng.uniform(-scale, scale, (n, dimension))
    C = rng.uniform(-scale, scale, (n, dimension))
    bw = np.zeros(n) if not use_bias else rng.uniform(-scale, scale, n)
    bc = np.zeros(n) if not use_bias else rng.uniform(-scale, scale, n)
    gW = np.ones((n, dimension))
    gC = np.ones((n, dimension))
    gbw = np.ones(n)
    gbc = np.ones(n)
    fx_all = weight(vals, x_max, alpha)
    logx_all = np.log(vals)
    trace = []
    for epoch in range(epochs):
        order = rng.permutation(vals.size)
        total = 0.0
        for start in range(0, order.size, batch_size):
            sel = order[start : start + batch_size]
            i, j = rows[sel], cols[sel]
            wi, cj = W[i], C[j]
            err = np.einsum("ij,ij->i", wi, cj) + bw[i] + bc[j] - logx_all[sel]
            g = fx_all[sel] * err
            total += 0.5 * float(np.dot(g, err))
            grad_w = g[:, None] * cj
            grad_c = g[:, None] * wi
            np.add.at(W, i, -learning_rate * grad_w / np.sqrt(gW[i]))
            np.add.at(C, j, -learning_rate * grad_c / np.sqrt(gC[j]))
            np.add.at(gW, i, grad_w**2)
            np.add.at(gC, j, grad_c**2)
            if use_bias:
                np.add.at(bw, i, -learning_rate * g / np.sqrt(gbw[i]))
                np.add.at(bc, j, -learning_rate * g / np.sqrt(gbc[j]))
                np.add.at(gbw, i, g**2)
                np.add.at(gbc, j, g**2)
        if not np.isfinite(total):
            raise NumericalError(f"non-finite loss at epoch {epoch + 1}; lower the learning rate or x_max")
        trace.append(total)
        log.debug("epoch %d loss %.6f", epoch + 1, total)
    space = EmbeddingSpace(
        vocabulary=cooc.vocabulary,
        vectors=(W + C) / 2.0,
        x_max=x_max,
        iterations=epochs,
        final_loss=trace[-1] if trace else float("nan"),
        loss_trace=tuple(trace),
    )
    if return_params:
        return space, GloveParams(W, C, bw, bc)
    return space


def objective(cooc: CooccurrenceMatrix, params: GloveParams, x_max: float, alpha: float = ALPHA) -> float:
    """Total weighted least-squares objective at the given parameters."""
    rows, cols, vals = cooc.entries()
    err = (
        np.einsum("ij,ij->i", params.main[rows], params.context[cols])
        + params.bias_main[rows]
        + params.bias_context[cols]
        - np.log(vals)
    )
    return 0.5 * float(np.sum(weight(vals, x_max, alpha) * err**2))


def _rank(space: EmbeddingSpace, target: np.ndarray, exclude: set[str], k: int) -> list[tuple[str, float]]:
    norm = np.linalg.norm(target)
    if norm == 0:
        raise ValueError("query vector has zero norm")
    sims = space.normalized() @ (target / norm)
    items = [(t, float(s)) for t, s in zip(space.vocabulary, sims) if t not in exclude]
    items.sort(key=lambda ts: (-ts[1], ts[0]))
    return items[:k]


def nearest_neighbors(space: EmbeddingSpace, token: str, k: int = 10) -> list[tuple[str, float]]:
    """Top-k tokens by cosine similarity, excluding the query; ties broken lexicographically."""
    if k >= len(space.vocabulary):
        raise ValueError("k must be smaller than the vocabulary size")
    return _rank(space, space.vector(token), {token}, k)


def analogy(
    space: EmbeddingSpace, positive: Sequence[str], negative: Sequence[str] = (), k: int = 10
) -> list[tuple[str, float]]:
    """Tokens closest by cosine to sum(positive) - sum(negative)."""
    if not positive and not negative:
        raise ValueError("analogy needs at least one positive or negative token")
    target = np.zeros(space.dimension)
    for t in positive:
        target += space.vector(t)
    for t in negative:
        target -= space.vector(t)
    return _rank(space, target, set(positive) | set(negative), k)


def write_embeddings(space: EmbeddingSpace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok, vec in zip(space.vocabulary, space.vectors):
            fh.write(tok + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def read_embeddings(path) -> EmbeddingSpace:
    from mlconflict.dataio import read_text

    vocab, vecs = [], []
    for lineno, line in enumerate(read_text(path).splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        try:
            vecs.append([float(x) for x in parts[1:]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        vocab.append(parts[0])
    if len({len(v) for v in vecs}) > 1:
        raise DataError(f"{path}: ragged embedding dimensions")
    return EmbeddingSpace(tuple(vocab), np.array(vecs, dtype=float))
