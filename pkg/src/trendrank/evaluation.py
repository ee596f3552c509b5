"""HR@K / NDCG@K against per-user truth and Jaccard@K against the true top-K items."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path


@dataclass
class EvalRun:
    """One global ranked list plus the test-window ground truth it is judged against."""

    ranked_list: list[str]
    user_truth: dict[str, set[str]]
    item_truth: dict[str, int]
    k_values: tuple[int, ...] = (5, 10)

    def __post_init__(self):
        if len(set(self.ranked_list)) != len(self.ranked_list):
            raise ValueError("ranked_list contains duplicate items")
        if any(k < 1 for k in self.k_values):
            raise ValueError(f"k_values must be positive, got {self.k_values}")

    def evaluable_users(self) -> list[str]:
        return [u for u, items in self.user_truth.items() if items]


@dataclass
class MetricsReport:
    hr: dict[int, float]
    ndcg: dict[int, float]
    jaccard: dict[int, float]
    users: int
    items: int

    def as_dict(self) -> dict:
        return {
            "hr": {str(k): v for k, v in sorted(self.hr.items())},
            "ndcg": {str(k): v for k, v in sorted(self.ndcg.items())},
            "jaccard": {str(k): v for k, v in sorted(self.jaccard.items())},
            "users": self.users,
            "items": self.items,
        }


def hit_rate_at_k(run: EvalRun, k: int) -> float:
    """Fraction of users whose truth set intersects the global top-k."""
    users = run.evaluable_users()
    if not users:
        raise ValueError("no users with non-empty truth to evaluate")
    top = set(run.ranked_list[:k])
    hits = sum(1 for u in users if run.user_truth[u] & top)
    return hits / len(users)


def ndcg_at_k(run: EvalRun, k: int) -> float:
    """Binary-relevance NDCG of the single global list, averaged over users."""
    users = run.evaluable_users()
    if not users:
        raise ValueError("no users with non-empty truth to evaluate")
    total = 0.0
    for u in users:
        truth = run.user_truth[u]
        dcg = sum(
            1.0 / math.log2(rank + 1)
            for rank, item in enumerate(run.ranked_list[:k], 1)
            if item in truth
        )
        ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(k, len(truth)) + 1))
        total += dcg / ideal
    return total / len(users)


def true_top_k(item_truth: dict[str, int], k: int) -> set[str]:
    ordered = sorted(item_truth.items(), key=lambda kv: (-kv[1], kv[0]))
    return {item for item, _ in ordered[:k]}


def jaccard_at_k(run: EvalRun, k: int) -> float:
    """|A n B| / |A u B| between the predicted and ground-truth top-k item sets.

    Reported as a similarity: identical sets give 1, disjoint sets 0.
    """
    if len(run.item_truth) < k:
        raise ValueError(
            f"need at least {k} items with truth counts, have {len(run.item_truth)}"
        )
    predicted = set(run.ranked_list[:k])
    truth = true_top_k(run.item_truth, k)
    union = predicted | truth
    if not union:
        return 0.0
    return len(predicted & truth) / len(union)


def evaluate(run: EvalRun, restrict_users: set[str] | None = None) -> MetricsReport:
    """All metrics at every configured K; optionally restricted to a user subset."""
    if restrict_users is not None:
        run = EvalRun(
            ranked_list=run.ranked_list,
            user_truth={u: t for u, t in run.user_truth.items() if u in restrict_users},
            item_truth=run.item_truth,
            k_values=run.k_values,
        )
    hr = {k: hit_rate_at_k(run, k) for k in run.k_values}
    ndcg = {k: ndcg_at_k(run, k) for k in run.k_values}
    jaccard = {k: jaccard_at_k(run, k) for k in run.k_values}
    return MetricsReport(
        hr=hr,
        ndcg=ndcg,
        jaccard=jaccard,
        users=len(run.evaluable_users()),
        items=len(run.ranked_list),
    )


def write_report_json(report: MetricsReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_tsv(report: MetricsReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("metric\tk\tvalue\n")
        for name, values in (("hr", report.hr), ("ndcg", report.ndcg), ("jaccard", report.jaccard)):
            for k in sorted(values):
                fh.write(f"{name}\t{k}\t{values[k]:.10g}\n")
        fh.write(f"users\t-\t{report.users}\n")
        fh.write(f"items\t-\t{report.items}\n")
