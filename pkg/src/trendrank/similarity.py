"""Three-part sample similarity: DTW trend shape, change-rate Gaussian, metadata cosine."""

from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import ItemMetadata, PopularitySeries, Sample

RATE_CAP = 100.0
DEFAULT_EMBED_DIM = 256

_TOKEN_RE = re.compile(r"[0-9a-z]+")


@dataclass(frozen=True)
class SimilarityWeights:
    """Fusion weights for trend/latest/metadata similarity plus the Gaussian width."""

    alpha: float = 0.4
    beta: float = 0.2
    gamma: float = 0.4
    sigma: float = 1.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("similarity weights must be nonnegative")
        if self.alpha + self.beta + self.gamma <= 0:
            raise ValueError("at least one similarity weight must be positive")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def dtw_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Minimum accumulated |x - y| alignment cost between two sequences.

    Classic O(len(a) * len(b)) dynamic program over the cumulative cost matrix:
    each cell adds the local cost to the cheapest of its left, lower, and
    diagonal predecessors, with the first row/column reachable only along the
    boundary. Sequences may differ in length; both must be non-empty.
    """
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("dtw_distance requires non-empty sequences")
    prev = [0.0] * m
    for j in range(m):
        cost = abs(a[0] - b[j])
        prev[j] = cost + (prev[j - 1] if j > 0 else 0.0)
    for i in range(1, n):
        cur = [0.0] * m
        cur[0] = abs(a[i] - b[0]) + prev[0]
        for j in range(1, m):
            cur[j] = abs(a[i] - b[j]) + min(prev[j], cur[j - 1], prev[j - 1])
        prev = cur
    return float(prev[m - 1])


def _max_normalize(values: Sequence[float]) -> list[float]:
    peak = max(values)
    if peak <= 0:
        return [0.0 for _ in values]
    return [v / peak for v in values]


def sim_trend(a: Sequence[float], b: Sequence[float], normalize: bool = False) -> float:
    """Trend similarity 1/(1 + DTW); empty histories: both empty -> 1, one empty -> 0."""
    if len(a) == 0 and len(b) == 0:
        return 1.0
    if len(a) == 0 or len(b) == 0:
        return 0.0
    if normalize:
        a, b = _max_normalize(a), _max_normalize(b)
    return 1.0 / (1.0 + dtw_distance(a, b))


def rate_from_counts(prev: float, cur: float) -> float:
    """Relative popularity delta (cur - prev)/prev, total over zero denominators.

    prev=0 with cur=0 gives 0; prev=0 with cur>0 treats the denominator as 1.
    The result is clamped to [-1, RATE_CAP] so cold-start jumps stay comparable.
    """
    if prev == 0:
        rate = 0.0 if cur == 0 else float(cur)
    else:
        rate = (cur - prev) / prev
    return max(-1.0, min(RATE_CAP, rate))


def change_rate(series: PopularitySeries, at_window: int) -> float:
    """Change rate of a series at a window, reading zeros outside the observed range."""
    if at_window < 1:
        raise ValueError(f"at_window must be >= 1, got {at_window}")
    return rate_from_counts(series.value_at(at_window - 1), series.value_at(at_window))


def sample_change_rate(sample: Sample) -> float:
    """Change rate of a sample at its target window.

    Uses the label as the target-window count when present (training-time
    mining); without a label, falls back to the momentum across the last two
    history entries.
    """
    h = sample.history
    if sample.label is not None:
        prev = h[-1] if h else 0
        return rate_from_counts(prev, sample.label)
    if not h:
        return 0.0
    prev = h[-2] if len(h) >= 2 else 0
    return rate_from_counts(prev, h[-1])


def sim_latest(r1: float, r2: float, sigma: float = 1.0) -> float:
    """Gaussian similarity exp(-(r1-r2)^2 / 2 sigma^2) between two change rates."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    diff = r1 - r2
    return float(np.exp(-(diff * diff) / (2.0 * sigma * sigma)))


def _token_bucket_sign(token: str, dim: int) -> tuple[int, float]:
    # blake2b keeps the hash stable across runs and platforms (no PYTHONHASHSEED).
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    h = int.from_bytes(digest, "big")
    sign = 1.0 if h & 1 == 0 else -1.0
    return (h >> 1) % dim, sign


def embed_text(text: str, dim: int = DEFAULT_EMBED_DIM) -> np.ndarray:
    """Deterministic signed feature-hashing embedding, L2-normalized (zero if no tokens)."""
    if dim < 8:
        raise ValueError(f"embedding dimension must be >= 8, got {dim}")
    vec = np.zeros(dim)
    for token in _TOKEN_RE.findall(text.lower()):
        bucket, sign = _token_bucket_sign(token, dim)
        vec[bucket] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def embed_metadata(meta: ItemMetadata, dim: int = DEFAULT_EMBED_DIM) -> np.ndarray:
    return embed_text(meta.description_text, dim)


def sim_meta(e1: np.ndarray, e2: np.ndarray) -> float:
    """Cosine similarity clamped into [0, 1]; zero vectors compare as 0.

    Negative cosines map to 0 so the weighted fusion stays a convex
    combination; the upper clamp absorbs float rounding past 1.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if e1.shape != e2.shape:
        raise ValueError(f"embedding dimensions differ: {e1.shape} vs {e2.shape}")
    n1 = np.linalg.norm(e1)
    n2 = np.linalg.norm(e2)
    if n1 == 0 or n2 == 0:
        return 0.0
    return min(1.0, max(0.0, float(np.dot(e1, e2) / (n1 * n2))))


def sim_total(
    s1: Sample,
    s2: Sample,
    weights: SimilarityWeights,
    embeddings: dict[str, np.ndarray],
    normalize_trend: bool = False,
) -> float:
    """Weighted fusion alpha*trend + beta*latest + gamma*meta of the three components."""
    trend = sim_trend(s1.history, s2.history, normalize=normalize_trend)
    latest = sim_latest(sample_change_rate(s1), sample_change_rate(s2), weights.sigma)
    try:
        meta = sim_meta(embeddings[s1.item_id], embeddings[s2.item_id])
    except KeyError as exc:
        raise ValueError(f"no metadata embedding for item {exc.args[0]!r}") from None
    return weights.alpha * trend + weights.beta * latest + weights.gamma * meta


def sim_components(
    s1: Sample,
    s2: Sample,
    weights: SimilarityWeights,
    embeddings: dict[str, np.ndarray],
    normalize_trend: bool = False,
) -> tuple[float, float, float, float]:
    """(trend, latest, meta, total) for one pair; used by the pairwise dump."""
    trend = sim_trend(s1.history, s2.history, normalize=normalize_trend)
    latest = sim_latest(sample_change_rate(s1), sample_change_rate(s2), weights.sigma)
    meta = sim_meta(embeddings[s1.item_id], embeddings[s2.item_id])
    total = weights.alpha * trend + weights.beta * latest + weights.gamma * meta
    return trend, latest, meta, total


def build_metadata_embeddings(
    metadata: dict[str, ItemMetadata], dim: int = DEFAULT_EMBED_DIM
) -> dict[str, np.ndarray]:
    return {item_id: embed_metadata(meta, dim) for item_id, meta in metadata.items()}


def load_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    """Load precomputed {item_id, vector} JSONL embeddings, enforcing a uniform dimension."""
    out: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            vec = np.asarray(obj["vector"], dtype=float)
            if vec.ndim != 1:
                raise ValueError(f"{path}:{lineno}: vector must be a flat array")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValueError(
                    f"{path}:{lineno}: vector dimension {vec.size} differs from {dim}"
                )
            out[obj["item_id"]] = vec
    return out


SIMILARITY_TSV_HEADER = "sample_id_a\tsample_id_b\tsim_trend\tsim_latest\tsim_meta\tsim_total"


def write_similarity_tsv(
    samples: list[Sample],
    weights: SimilarityWeights,
    embeddings: dict[str, np.ndarray],
    path: str | Path,
    normalize_trend: bool = False,
    threads: int = 1,
) -> None:
    """Dump the upper-triangle pairwise similarities of a pool as TSV."""
    ordered = sorted(samples, key=lambda s: s.sample_id)

    def row_block(i: int) -> list[str]:
        a = ordered[i]
        lines = []
        for b in ordered[i + 1 :]:
            trend, latest, meta, total = sim_components(
                a, b, weights, embeddings, normalize_trend
            )
            lines.append(
                f"{a.sample_id}\t{b.sample_id}\t{trend:.10g}\t{latest:.10g}"
                f"\t{meta:.10g}\t{total:.10g}"
            )
        return lines

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(row_block, range(len(ordered))))
    else:
        blocks = [row_block(i) for i in range(len(ordered))]

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SIMILARITY_TSV_HEADER + "\n")
        for block in blocks:
            for line in block:
                fh.write(line + "\n")
