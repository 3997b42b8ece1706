"""Unsupervised token representations: bag-of-words and skip-gram embeddings.

The vocabulary reserves index 0 for padding and index 1 for out-of-vocabulary
tokens. Embeddings are trained with skip-gram and negative sampling by plain
stochastic gradient descent; training is single-threaded and bit-reproducible
for a fixed seed. Sentence boundaries are function boundaries: context
windows never cross functions.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lexer import TokenSequence

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1


@dataclass
class Vocabulary:
    token_to_index: dict[str, int]
    counts: np.ndarray  # occurrence count per index; pad is 0, unk holds the dropped mass
    min_count: int

    @property
    def size(self) -> int:
        return len(self.token_to_index)

    @property
    def tokens(self) -> list[str]:
        return list(self.token_to_index)

    def index_of(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_INDEX)

    def encode(self, seq: TokenSequence) -> np.ndarray:
        return np.array([self.index_of(t.text) for t in seq.tokens], dtype=np.int64)


def build_vocabulary(corpus: Sequence[TokenSequence], min_count: int = 2) -> Vocabulary:
    """Count tokens over the corpus and keep those with count >= min_count.

    Retained tokens are ordered by descending count with lexicographic
    tie-break, after the reserved padding and unknown symbols.
    """
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")

    raw = Counter(t.text for seq in corpus for t in seq.tokens)
    kept = sorted(
        (t for t, c in raw.items() if c >= min_count), key=lambda t: (-raw[t], t)
    )
    dropped_mass = sum(c for t, c in raw.items() if c < min_count)

    token_to_index = {PAD_TOKEN: PAD_INDEX, UNK_TOKEN: UNK_INDEX}
    counts = [0, dropped_mass]
    for t in kept:
        token_to_index[t] = len(token_to_index)
        counts.append(raw[t])
    return Vocabulary(token_to_index, np.array(counts, dtype=np.int64), min_count)


def bag_of_words(seq: TokenSequence, vocab: Vocabulary) -> np.ndarray:
    """Token counts over the vocabulary; out-of-vocabulary tokens count at
    the unknown index, so the vector always sums to len(seq.tokens)."""
    counts = np.zeros(vocab.size, dtype=np.int64)
    for t in seq.tokens:
        counts[vocab.index_of(t.text)] += 1
    return counts


def bow_matrix(seqs: Sequence[TokenSequence], vocab: Vocabulary) -> np.ndarray:
    return np.stack([bag_of_words(s, vocab) for s in seqs]).astype(np.float64)


# --- skip-gram with negative sampling --------------------------------------

@dataclass(frozen=True)
class EmbeddingConfig:
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    seed: int = 0

    def validate(self) -> None:
        if self.dim <= 0:
            raise ValueError(f"embedding dim must be positive, got {self.dim}")
        if self.window <= 0:
            raise ValueError(f"window must be positive, got {self.window}")
        if self.negatives < 0 or self.epochs < 1:
            raise ValueError("negatives must be >= 0 and epochs >= 1")


@dataclass
class EmbeddingMatrix:
    vectors: np.ndarray  # V x d
    tokens: list[str]  # index -> canonical token text
    meta: EmbeddingConfig | None = None
    _index: dict[str, int] | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index_of(self, token: str) -> int | None:
        if self._index is None:
            self._index = {t: i for i, t in enumerate(self.tokens)}
        return self._index.get(token)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sgns_pair_loss(
    in_vecs: np.ndarray,
    out_vecs: np.ndarray,
    center: int,
    context: int,
    negatives: Sequence[int],
) -> float:
    """Negative-sampling loss for one (center, context) pair:
    -log s(u_ctx . v_c) - sum_k log s(-u_k . v_c)."""
    v = in_vecs[center]
    loss = -np.log(_sigmoid(out_vecs[context] @ v))
    for k in negatives:
        loss -= np.log(_sigmoid(-(out_vecs[k] @ v)))
    return float(loss)


def sgns_pair_grads(
    in_vecs: np.ndarray,
    out_vecs: np.ndarray,
    center: int,
    context: int,
    negatives: Sequence[int],
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Analytic gradients of :func:`sgns_pair_loss` with respect to the
    center input vector and each touching output vector."""
    v = in_vecs[center]
    g_context = _sigmoid(out_vecs[context] @ v) - 1.0
    grad_in = g_context * out_vecs[context]
    grad_out: dict[int, np.ndarray] = {context: g_context * v.copy()}
    for k in negatives:
        g_k = _sigmoid(out_vecs[k] @ v)
        grad_in = grad_in + g_k * out_vecs[k]
        if k in grad_out:
            grad_out[k] = grad_out[k] + g_k * v
        else:
            grad_out[k] = g_k * v.copy()
    return grad_in, grad_out


def noise_distribution(vocab: Vocabulary) -> np.ndarray:
    """Unigram^(3/4) negative-sampling distribution; padding never drawn."""
    weights = vocab.counts.astype(np.float64) ** 0.75
    weights[PAD_INDEX] = 0.0
    total = weights.sum()
    if total == 0.0:
        raise ValueError("vocabulary has no counted tokens to sample negatives from")
    return weights / total


class NegativeSampler:
    """Deterministic inverse-CDF sampler over the noise distribution."""

    def __init__(self, vocab: Vocabulary, rng: np.random.Generator):
        self._cdf = np.cumsum(noise_distribution(vocab))
        self._rng = rng

    def draw(self, k: int) -> np.ndarray:
        u = self._rng.random(k)
        # side='right' skips zero-probability prefixes (the padding index);
        # the clip guards against cdf[-1] rounding just below 1.
        return np.minimum(
            np.searchsorted(self._cdf, u, side="right"), len(self._cdf) - 1
        )


def train_embedding(
    corpus: Sequence[TokenSequence], vocab: Vocabulary, cfg: EmbeddingConfig = EmbeddingConfig()
) -> EmbeddingMatrix:
    """Train skip-gram embeddings with negative sampling over the corpus.

    One sentence per function; the learning rate decays linearly over all
    (center, context) pairs down to ``min_learning_rate``. Negatives equal
    to the context token are skipped, as usual.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    V, d, w = vocab.size, cfg.dim, cfg.window

    in_vecs = (rng.random((V, d)) - 0.5) / d
    out_vecs = np.zeros((V, d), dtype=np.float64)
    sampler = NegativeSampler(vocab, rng)

    sentences = [vocab.encode(seq) for seq in corpus]
    pairs_per_epoch = 0
    for sent in sentences:
        L = len(sent)
        for i in range(L):
            pairs_per_epoch += min(L - 1, i + w) - max(0, i - w)
    total = max(1, pairs_per_epoch * cfg.epochs)

    t = 0
    for _epoch in range(cfg.epochs):
        for sent in sentences:
            L = len(sent)
            for i in range(L):
                center = sent[i]
                for j in range(max(0, i - w), min(L, i + w + 1)):
                    if j == i:
                        continue
                    context = sent[j]
                    lr = max(
                        cfg.min_learning_rate,
                        cfg.learning_rate * (1.0 - t / total),
                    )
                    t += 1
                    negs = sampler.draw(cfg.negatives)
                    negs = negs[negs != context]
                    grad_in, grad_out = sgns_pair_grads(
                        in_vecs, out_vecs, center, context, negs
                    )
                    in_vecs[center] -= lr * grad_in
                    for k, g in grad_out.items():
                        out_vecs[k] -= lr * g

    return EmbeddingMatrix(vectors=in_vecs, tokens=vocab.tokens, meta=cfg)


def nearest_neighbors(
    matrix: EmbeddingMatrix, token: str, k: int
) -> list[tuple[str, float]]:
    """Top-k tokens by cosine similarity to ``token`` (query excluded);
    ties broken by vocabulary index."""
    idx = matrix.index_of(token)
    if idx is None:
        raise KeyError(f"token not in embedding vocabulary: {token!r}")
    if k <= 0:
        return []
    norms = np.linalg.norm(matrix.vectors, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    normed = matrix.vectors / safe[:, None]
    sims = normed @ normed[idx]
    sims[norms == 0.0] = 0.0
    order = sorted(
        (i for i in range(len(sims)) if i != idx), key=lambda i: (-sims[i], i)
    )
    return [(matrix.tokens[i], float(sims[i])) for i in order[:k]]


# --- persistence ------------------------------------------------------------

_MAGIC = b"TKEM"
_VERSION = 1


def save_embedding(matrix: EmbeddingMatrix, path: str, config_hash: str = "") -> None:
    """Versioned binary layout: magic, version, config-hash string, V, d,
    length-prefixed vocabulary entries, then row-major little-endian float32."""
    V, d = matrix.vectors.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        blob = config_hash.encode("utf-8")
        fh.write(struct.pack("<H", len(blob)) + blob)
        fh.write(struct.pack("<II", V, d))
        for token in matrix.tokens:
            raw = token.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)) + raw)
        fh.write(matrix.vectors.astype("<f4").tobytes(order="C"))


def load_embedding(path: str) -> tuple[EmbeddingMatrix, str]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not an embedding file (bad magic)")
    off = 4
    (version,) = struct.unpack_from("<I", data, off)
    off += 4
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported embedding file version {version}")
    (hlen,) = struct.unpack_from("<H", data, off)
    off += 2
    config_hash = data[off : off + hlen].decode("utf-8")
    off += hlen
    V, d = struct.unpack_from("<II", data, off)
    off += 8
    tokens = []
    for _ in range(V):
        (tlen,) = struct.unpack_from("<H", data, off)
        off += 2
        tokens.append(data[off : off + tlen].decode("utf-8"))
        off += tlen
    vectors = np.frombuffer(data, dtype="<f4", count=V * d, offset=off)
    matrix = EmbeddingMatrix(
        vectors=vectors.reshape(V, d).astype(np.float64), tokens=tokens
    )
    return matrix, config_hash


def write_vocab_tsv(vocab: Vocabulary, path: str, header: str | None = None) -> None:
    """Tab-separated export: token, count, index."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(f"# min_count={vocab.min_count}\n")
        for token, index in vocab.token_to_index.items():
            fh.write(f"{token}\t{int(vocab.counts[index])}\t{index}\n")


def read_vocab_tsv(path: str) -> Vocabulary:
    token_to_index: dict[str, int] = {}
    counts: list[int] = []
    min_count = 1
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# min_count="):
                min_count = int(line.split("=", 1)[1])
                continue
            if line.startswith("#") or not line.strip():
                continue
            token, count, index = line.rstrip("\n").split("\t")
            assert int(index) == len(counts), "vocabulary rows must be in index order"
            token_to_index[token] = int(index)
            counts.append(int(count))
    return Vocabulary(token_to_index, np.array(counts, dtype=np.int64), min_count=min_count)
