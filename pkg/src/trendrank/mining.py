"""Contrastive triplet mining over a candidate pool ranked by total similarity."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import Sample
from .similarity import SimilarityWeights, sim_total

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Triplet:
    anchor: str
    positives: tuple[str, ...]
    negatives: tuple[str, ...]


@dataclass
class CandidatePool:
    samples: list[Sample]
    pool_mode: str = "batch"
    batch_size: int = 8

    def __post_init__(self):
        if self.pool_mode not in ("batch", "global"):
            raise ValueError(f"pool_mode must be 'batch' or 'global', got {self.pool_mode!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def similarity_matrix(
    pool: list[Sample],
    weights: SimilarityWeights,
    embeddings: dict[str, np.ndarray],
    normalize_trend: bool = False,
) -> np.ndarray:
    """Symmetric pairwise sim_total matrix with ones on the diagonal by convention."""
    if not pool:
        raise ValueError("similarity_matrix requires a non-empty pool")
    n = len(pool)
    m = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            s = sim_total(pool[i], pool[j], weights, embeddings, normalize_trend)
            m[i, j] = s
            m[j, i] = s
    return m


def _rank_candidates(
    anchor: Sample,
    candidates: list[Sample],
    weights: SimilarityWeights,
    embeddings: dict[str, np.ndarray],
    normalize_trend: bool,
) -> list[str]:
    # Descending similarity, ties broken by ascending sample_id for a canonical order.
    scored = [
        (-sim_total(anchor, c, weights, embeddings, normalize_trend), c.sample_id)
        for c in candidates
    ]
    scored.sort()
    return [sid for _, sid in scored]


def mine_triplets(
    pool: CandidatePool,
    weights: SimilarityWeights,
    embeddings: dict[str, np.ndarray],
    n_pos: int = 2,
    seed: int = 0,
    global_negatives: int = 6,
    normalize_trend: bool = False,
) -> list[Triplet]:
    """One triplet per anchor: top-n_pos candidates as positives, the rest as negatives.

    Batch mode shuffles the (id-sorted) pool with a seeded RNG, partitions it
    into groups of batch_size, and mines within each group; a trailing group
    too small to mine is merged into the previous one. Global mode ranks every
    other sample and uniformly samples `global_negatives` negatives.
    """
    if n_pos < 1:
        raise ValueError(f"n_pos must be >= 1, got {n_pos}")
    ordered = sorted(pool.samples, key=lambda s: s.sample_id)
    rng = random.Random(seed)

    if pool.pool_mode == "global":
        triplets = []
        for anchor in ordered:
            candidates = [s for s in ordered if s.sample_id != anchor.sample_id]
            if len(candidates) < n_pos:
                logger.warning(
                    "skipping anchor %s: pool has only %d candidate(s), need %d",
                    anchor.sample_id,
                    len(candidates),
                    n_pos,
                )
                continue
            ranked = _rank_candidates(anchor, candidates, weights, embeddings, normalize_trend)
            positives = tuple(ranked[:n_pos])
            rest = ranked[n_pos:]
            k = min(global_negatives, len(rest))
            negatives = tuple(rng.sample(rest, k)) if k else ()
            triplets.append(Triplet(anchor.sample_id, positives, negatives))
        return triplets

    rng.shuffle(ordered)
    groups = [ordered[i : i + pool.batch_size] for i in range(0, len(ordered), pool.batch_size)]
    if len(groups) > 1 and len(groups[-1]) < n_pos + 1:
        tail = groups.pop()
        groups[-1] = groups[-1] + tail

    triplets = []
    for group in groups:
        if len(group) < n_pos + 1:
            logger.warning(
                "skipping group of %d sample(s): need at least %d for %d positive(s)",
                len(group),
                n_pos + 1,
                n_pos,
            )
            continue
        for anchor in group:
            candidates = [s for s in group if s.sample_id != anchor.sample_id]
            ranked = _rank_candidates(anchor, candidates, weights, embeddings, normalize_trend)
            triplets.append(
                Triplet(anchor.sample_id, tuple(ranked[:n_pos]), tuple(ranked[n_pos:]))
            )
    triplets.sort(key=lambda t: t.anchor)
    return triplets


def write_triplets(triplets: list[Triplet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(
                json.dumps(
                    {
                        "anchor": t.anchor,
                        "positives": list(t.positives),
                        "negatives": list(t.negatives),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_triplets(path: str | Path) -> list[Triplet]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                Triplet(obj["anchor"], tuple(obj["positives"]), tuple(obj["negatives"]))
            )
    return out
