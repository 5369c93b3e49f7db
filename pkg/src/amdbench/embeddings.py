"""Token embeddings (skip-gram with negative sampling) and k-means clustering.

Both are trained single-threaded with an explicit RNG so results are
bit-reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class EmbeddingTable:
    vocabulary: tuple[str, ...]
    vectors: np.ndarray  # |V| x d
    loss_history: tuple[float, ...] = ()

    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.vocabulary)}

    def vector(self, token: str) -> np.ndarray | None:
        idx = self.index().get(token)
        return None if idx is None else self.vectors[idx]


@dataclass(frozen=True)
class Clustering:
    centers: np.ndarray  # k x d
    assignment: dict[str, int]  # token -> cluster id

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def _sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30, 30)))


def train_skipgram(
    sequences: Sequence[Sequence[str]],
    dim: int = 10,
    window: int = 2,
    negative_samples: int = 5,
    epochs: int = 5,
    learning_rate: float = 0.025,
    seed: int = 0,
) -> EmbeddingTable:
    """Skip-gram with negative sampling over token *sequences*.

    The learning rate decays linearly to 10% of its initial value; the
    negative-sampling table uses the standard unigram^0.75 distribution.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    sents = [list(s) for s in sequences if len(s) >= 1]
    if not sents:
        raise ValueError("empty corpus")

    counts: dict[str, int] = {}
    for s in sents:
        for t in s:
            counts[t] = counts.get(t, 0) + 1
    vocab = tuple(sorted(counts))
    tok2id = {t: i for i, t in enumerate(vocab)}
    n_vocab = len(vocab)

    rng = np.random.default_rng(seed)
    w_in = (rng.random((n_vocab, dim)) - 0.5) / dim
    w_out = np.zeros((n_vocab, dim))

    freq = np.array([counts[t] for t in vocab], dtype=float) ** 0.75
    neg_probs = freq / freq.sum()

    pairs: list[tuple[int, int]] = []
    for s in sents:
        ids = [tok2id[t] for t in s]
        for i, center in enumerate(ids):
            lo = max(0, i - window)
            hi = min(len(ids), i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    pairs.append((center, ids[j]))
    if not pairs:
        # single-token sentences only: train each token against itself so the
        # table still gets finite, seeded vectors
        pairs = [(tok2id[s[0]], tok2id[s[0]]) for s in sents]
    pair_arr = np.array(pairs, dtype=np.int64)

    total_steps = epochs * len(pair_arr)
    step = 0
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(pair_arr))
        epoch_loss = 0.0
        for idx in order:
            center, context = pair_arr[idx]
            lr = learning_rate * max(0.1, 1.0 - step / max(1, total_steps))
            step += 1
            negs = rng.choice(n_vocab, size=negative_samples, p=neg_probs)
            v = w_in[center]
            # positive pair
            tgt_ids = np.concatenate(([context], negs))
            tgt_lbl = np.zeros(len(tgt_ids))
            tgt_lbl[0] = 1.0
            u = w_out[tgt_ids]
            scores = _sigmoid(u @ v)
            epoch_loss += -float(
                np.log(np.clip(scores[0], 1e-12, None))
                + np.sum(np.log(np.clip(1.0 - scores[1:], 1e-12, None)))
            )
            grad = scores - tgt_lbl  # d loss / d (u @ v)
            dv = grad @ u
            w_out[tgt_ids] -= lr * np.outer(grad, v)
            w_in[center] -= lr * dv
        losses.append(epoch_loss / len(pair_arr))
    if not np.all(np.isfinite(w_in)):
        raise RuntimeError("skip-gram training produced non-finite vectors")
    return EmbeddingTable(vocabulary=vocab, vectors=w_in, loss_history=tuple(losses))


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray  # k x d
    labels: np.ndarray  # (n,)
    inertia_history: tuple[float, ...]


def kmeans(
    points: np.ndarray, k: int, max_iter: int = 100, seed: int = 0
) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding, deterministic under *seed*.

    k is clamped to the number of points; empty clusters are re-seeded with
    the point farthest from its assigned center.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if n == 0:
        raise ValueError("empty input")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, n)
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    dist2 = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = dist2.sum()
        if total <= 0:
            centers[c] = points[int(rng.integers(n))]
        else:
            probs = dist2 / total
            centers[c] = points[int(rng.choice(n, p=probs))]
        dist2 = np.minimum(dist2, np.sum((points - centers[c]) ** 2, axis=1))

    labels = np.zeros(n, dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        if history and inertia > history[-1] + 1e-9:
            raise AssertionError("k-means inertia increased")
        converged = bool(history) and abs(history[-1] - inertia) < 1e-12
        history.append(inertia)
        new_centers = centers.copy()
        for c in range(k):
            mask = labels == c
            if mask.any():
                new_centers[c] = points[mask].mean(axis=0)
            else:
                worst = int(np.argmax(d2[np.arange(n), labels]))
                new_centers[c] = points[worst]
        if converged and np.allclose(new_centers, centers):
            break
        centers = new_centers
    # final assignment against the final centers
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    if history and inertia > history[-1] + 1e-9:
        raise AssertionError("k-means inertia increased")
    history.append(inertia)
    return KMeansResult(centers=centers, labels=labels, inertia_history=tuple(history))


def cluster_embeddings(
    table: EmbeddingTable, k: int, max_iter: int = 100, seed: int = 0
) -> Clustering:
    """Cluster an embedding table's rows; assignment maps token -> cluster id."""
    result = kmeans(table.vectors, k=k, max_iter=max_iter, seed=seed)
    assignment = {tok: int(result.labels[i]) for i, tok in enumerate(table.vocabulary)}
    return Clustering(centers=result.centers, assignment=assignment)
