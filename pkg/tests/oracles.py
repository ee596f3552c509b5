"""Independent reference implementations used to cross-check the main code paths.

Everything here is deliberately written without reusing the library's
algorithms: DTW by explicit path enumeration, mining by sort-and-split,
metrics by plain loops, gradients by central finite differences.
"""

from __future__ import annotations

import math

import numpy as np

from trendrank.contrastive import ProjectionHead, info_nce, project
from trendrank.similarity import SimilarityWeights, sim_total


def dtw_brute_force(a, b) -> float:
    """Minimum path cost over every monotone alignment from (0,0) to (n-1,m-1)."""
    n, m = len(a), len(b)
    best = [math.inf]

    def walk(i: int, j: int, acc: float) -> None:
        acc += abs(a[i] - b[j])
        if acc >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = acc
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


def mine_sort_split(samples, weights: SimilarityWeights, embeddings, n_pos: int):
    """Per anchor: sort every other sample by (sim desc, id asc), split at n_pos."""
    result = []
    for anchor in sorted(samples, key=lambda s: s.sample_id):
        others = [s for s in samples if s is not anchor]
        ranked = sorted(
            others,
            key=lambda s: (-sim_total(anchor, s, weights, embeddings), s.sample_id),
        )
        ids = [s.sample_id for s in ranked]
        result.append((anchor.sample_id, tuple(ids[:n_pos]), tuple(ids[n_pos:])))
    return result


def hr_brute_force(ranked: list[str], user_truth: dict[str, set[str]], k: int) -> float:
    values = []
    for _, items in sorted(user_truth.items()):
        if not items:
            continue
        hit = 0.0
        for position in range(min(k, len(ranked))):
            if ranked[position] in items:
                hit = 1.0
        values.append(hit)
    return sum(values) / len(values)


def ndcg_brute_force(ranked: list[str], user_truth: dict[str, set[str]], k: int) -> float:
    values = []
    for _, items in sorted(user_truth.items()):
        if not items:
            continue
        gain = 0.0
        for position in range(min(k, len(ranked))):
            if ranked[position] in items:
                gain += 1.0 / math.log2(position + 2)
        ideal = 0.0
        for position in range(min(k, len(items))):
            ideal += 1.0 / math.log2(position + 2)
        values.append(gain / ideal)
    return sum(values) / len(values)


def jaccard_brute_force(ranked: list[str], item_truth: dict[str, int], k: int) -> float:
    predicted = set(ranked[:k])
    by_count = sorted(item_truth, key=lambda item: (-item_truth[item], item))
    actual = set(by_count[:k])
    union = predicted | actual
    if not union:
        return 0.0
    return len(predicted & actual) / len(union)


def loss_through_public_ops(head: ProjectionHead, raws: np.ndarray, n_pos: int, tau: float) -> float:
    """InfoNCE composed from the single-vector public ops (eval mode), for FD checks."""
    projected = [project(head, row, mode="eval") for row in raws]
    return info_nce(projected[0], projected[1 : 1 + n_pos], projected[1 + n_pos :], tau)


def finite_difference_head_grads(
    head: ProjectionHead, raws: np.ndarray, n_pos: int, tau: float, step: float = 1e-4
):
    """Central finite differences of the public-op loss for every head parameter."""
    grads = {}
    for name in ("w1", "b1", "w2"):
        arr = getattr(head, name)
        grad = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            original = arr[idx]
            arr[idx] = original + step
            loss_plus = loss_through_public_ops(head, raws, n_pos, tau)
            arr[idx] = original - step
            loss_minus = loss_through_public_ops(head, raws, n_pos, tau)
            arr[idx] = original
            grad[idx] = (loss_plus - loss_minus) / (2.0 * step)
        grads[name] = grad
    return grads


def max_relative_error(analytic: dict, numeric: dict) -> float:
    worst = 0.0
    for name in analytic:
        a = analytic[name]
        f = numeric[name]
        rel = np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
        worst = max(worst, float(rel.max()))
    return worst
