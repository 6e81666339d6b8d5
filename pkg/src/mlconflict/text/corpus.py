"""Speech corpus trimming and harmonic-weighted co-occurrence counts."""
from __future__ import annotations

import logging
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from mlconflict import DataError
from mlconflict.text.porter import stem

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z]+")

DocId = tuple[str, int]


@dataclass(frozen=True)
class TokenizedCorpus:
    documents: tuple[tuple[DocId, tuple[str, ...]], ...]
    vocabulary: tuple[str, ...]
    term_freq: tuple[int, ...]
    doc_freq: tuple[int, ...]
    empty_docs: tuple[DocId, ...] = field(default=())

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.vocabulary)}

    def __len__(self):
        return len(self.documents)

    def docs_for_year(self, year: int) -> list[tuple[DocId, tuple[str, ...]]]:
        return [(d, toks) for d, toks in self.documents if d[1] == year]


def tokenize(text: str) -> list[str]:
    return [stem(t) for t in _TOKEN_RE.findall(text.lower())]


def preprocess(
    raw_docs: Iterable[tuple[DocId, str]] | TokenizedCorpus,
    min_count: int = 5,
    min_doc_frac: float = 0.05,
) -> TokenizedCorpus:
    """Lowercase, stem and trim rare tokens.

    A token survives if it occurs at least ``min_count`` times overall and in
    at least ``min_doc_frac`` of all documents. Passing an existing
    :class:`TokenizedCorpus` re-applies only the trimming, so repeated calls
    are idempotent.
    """
    if not 0 <= min_doc_frac <= 1:
        raise ValueError("min_doc_frac must lie in [0, 1]")
    if isinstance(raw_docs, TokenizedCorpus):
        docs = [(d, list(toks)) for d, toks in raw_docs.documents]
    else:
        docs = [(tuple(d), tokenize(text)) for d, text in raw_docs]
    if not docs:
        raise DataError("empty corpus")
    tf: Counter[str] = Counter()
    df: Counter[str] = Counter()
    for _, toks in docs:
        tf.update(toks)
        df.update(set(toks))
    min_df = min_doc_frac * len(docs)
    keep = {t for t in tf if tf[t] >= min_count and df[t] >= min_df}
    vocab = tuple(sorted(keep))
    trimmed = []
    empty = []
    for d, toks in docs:
        kept = tuple(t for t in toks if t in keep)
        if not kept:
            empty.append(d)
        trimmed.append((d, kept))
    if empty:
        log.warning("%d documents are empty after trimming", len(empty))
    return TokenizedCorpus(
        documents=tuple(trimmed),
        vocabulary=vocab,
        term_freq=tuple(tf[t] for t in vocab),
        doc_freq=tuple(df[t] for t in vocab),
        empty_docs=tuple(empty),
    )


@dataclass(frozen=True)
class CooccurrenceMatrix:
    vocabulary: tuple[str, ...]
    matrix: sparse.csr_matrix  # symmetric, strictly positive stored entries

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def get(self, a: str, b: str) -> float:
        idx = {t: i for i, t in enumerate(self.vocabulary)}
        return float(self.matrix[idx[a], idx[b]])

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]


def count_cooccurrence(
    corpus: TokenizedCorpus | Sequence[Sequence[str]],
    window: int = 5,
    vocabulary: Sequence[str] | None = None,
) -> CooccurrenceMatrix:
    """Harmonic co-occurrence: each pair at offset k <= window adds 1/k, both directions."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if isinstance(corpus, TokenizedCorpus):
        docs = [toks for _, toks in corpus.documents]
        vocabulary = corpus.vocabulary
    else:
        docs = [list(toks) for toks in corpus]
        if vocabulary is None:
            vocabulary = sorted({t for toks in docs for t in toks})
    index = {t: i for i, t in enumerate(vocabulary)}
    rows, cols, vals = [], [], []
    for toks in docs:
        ids = np.array([index[t] for t in toks if t in index], dtype=np.int64)
        for off in range(1, min(window, len(ids) - 1) + 1):
            a, b = ids[:-off], ids[off:]
            w = np.full(a.size, 1.0 / off)
            rows += [a, b]
            cols += [b, a]
            vals += [w, w]
    n = len(vocabulary)
    if rows:
        m = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()
    else:
        m = sparse.csr_matrix((n, n))
    m.sum_duplicates()
    m.eliminate_zeros()
    return CooccurrenceMatrix(tuple(vocabulary), m)
