"""Speech preprocessing, co-occurrence counting and embedding training."""
from mlconflict.text.corpus import CooccurrenceMatrix, TokenizedCorpus, count_cooccurrence, preprocess, tokenize
from mlconflict.text.glove import EmbeddingSpace, analogy, nearest_neighbors, train_embeddings

__all__ = [
    "CooccurrenceMatrix",
    "EmbeddingSpace",
    "TokenizedCorpus",
    "analogy",
    "count_cooccurrence",
    "nearest_neighbors",
    "preprocess",
    "tokenize",
    "train_embeddings",
]
