"""Pluggable popularity scorers, templated three-section explanations, and ranking."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ingest import Sample
from .similarity import DEFAULT_EMBED_DIM, _token_bucket_sign, embed_text

SCORER_KINDS = ("last_value", "moving_average", "linear_trend")
LINEAR_TREND_POINTS = 6
NO_HISTORY_PHRASE = "no historical popularity data"

PREDICTION_SCORE_KEY = "predict_popularity_score"
PREDICTION_EXPLANATION_KEY = "explanation_of_score"

_DISPLAY_TOKEN_RE = re.compile(r"[0-9A-Za-z]+")


@dataclass(frozen=True)
class ScorerSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise ValueError(f"unknown scorer kind {self.kind!r}; expected one of {SCORER_KINDS}")
        if self.kind == "moving_average":
            w = self.params.get("window", 3)
            if not isinstance(w, int) or w < 1:
                raise ValueError(f"moving_average window must be a positive integer, got {w!r}")


@dataclass
class ExplanationRecord:
    trend_section: str
    feature_section: str
    integration_section: str

    def as_text(self) -> str:
        return (
            f"[Trend]: {self.trend_section} "
            f"[Feature]: {self.feature_section} "
            f"[Integration]: {self.integration_section}"
        )


@dataclass
class Prediction:
    sample_id: str
    item_id: str
    predicted_score: float
    explanation: ExplanationRecord | None = None
    rank: int = 0


def score(spec: ScorerSpec, sample: Sample) -> float:
    """Predict the target-window popularity from history alone; always >= 0."""
    h = sample.history
    if spec.kind == "last_value":
        value = float(h[-1]) if h else 0.0
    elif spec.kind == "moving_average":
        if not h:
            value = 0.0
        else:
            w = spec.params.get("window", 3)
            tail = h[-min(w, len(h)) :]
            value = float(np.mean(tail))
    else:  # linear_trend
        if not h:
            value = 0.0
        elif len(h) == 1:
            value = float(h[0])
        else:
            tail = np.asarray(h[-min(LINEAR_TREND_POINTS, len(h)) :], dtype=float)
            x = np.arange(tail.size)
            slope, intercept = np.polyfit(x, tail, 1)
            value = float(slope * tail.size + intercept)
    return max(0.0, value)


def top_feature_tokens(text: str, dim: int = DEFAULT_EMBED_DIM, k: int = 2) -> list[str]:
    """The k tokens carrying the most weight in the hashed metadata embedding.

    Returns original-case tokens so they match the description verbatim;
    weight is the magnitude of the token's bucket in the final embedding.
    """
    vec = embed_text(text, dim)
    seen: dict[str, str] = {}
    for token in _DISPLAY_TOKEN_RE.findall(text):
        seen.setdefault(token.lower(), token)
    scored = []
    for lower, display in seen.items():
        bucket, _ = _token_bucket_sign(lower, dim)
        # Weight ties are common (unit hash contributions): prefer longer,
        # more descriptive tokens before falling back to lexicographic order.
        scored.append((-abs(float(vec[bucket])), -len(lower), lower, display))
    scored.sort()
    return [display for _, _, _, display in scored[:k]]


def explain(sample: Sample, predicted: float, embed_dim: int = DEFAULT_EMBED_DIM) -> ExplanationRecord:
    """Template the mandated trend / feature / integration rationale for one sample."""
    h = sample.history
    if not h:
        trend = (
            f"There is {NO_HISTORY_PHRASE} before window {sample.target_window}, "
            "so trends over time cannot be assessed."
        )
    else:
        peak_idx = max(range(len(h)), key=lambda i: h[i])
        peak_window = sample.first_window + peak_idx
        trend = (
            f"The most recent popularity is {h[-1]} in window {sample.target_window - 1}; "
            f"the mean over {len(h)} observed window(s) is {np.mean(h):.2f}, "
            f"with a peak of {h[peak_idx]} in window {peak_window}."
        )

    tokens = top_feature_tokens(sample.metadata.description_text, embed_dim, 2)
    if len(tokens) >= 2:
        feature = (
            f'Standout descriptors are "{tokens[0]}" and "{tokens[1]}", '
            "which anchor the item's appeal."
        )
    elif len(tokens) == 1:
        feature = f'The only standout descriptor is "{tokens[0]}".'
    else:
        feature = "The item carries no descriptive metadata to draw on."

    dominant = "the metadata features" if len(h) < 2 else "the popularity trend"
    integration = (
        f"Combining both signals, the predicted popularity score is {predicted:.2f}; "
        f"{dominant} dominated this estimate given {len(h)} window(s) of history."
    )
    return ExplanationRecord(trend, feature, integration)


def rank_window(predictions: list[Prediction], n: int) -> list[Prediction]:
    """Top-n by descending score with item_id tie-break; ranks assigned 1..n."""
    seen = set()
    for p in predictions:
        if p.item_id in seen:
            raise ValueError(f"duplicate item {p.item_id!r} in one ranking window")
        seen.add(p.item_id)
    ordered = sorted(predictions, key=lambda p: (-p.predicted_score, p.item_id))
    return [replace(p, rank=i) for i, p in enumerate(ordered[:n], 1)]


# ---------------------------------------------------------------------------
# file interfaces

def prediction_row(sample: Sample, predicted: float, explanation: ExplanationRecord) -> dict:
    return {
        "sample_id": sample.sample_id,
        PREDICTION_SCORE_KEY: float(predicted),
        PREDICTION_EXPLANATION_KEY: explanation.as_text(),
    }


def write_predictions(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_scores(scores: dict[str, float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample_id in sorted(scores):
            fh.write(json.dumps({"sample_id": sample_id, "score": scores[sample_id]}) + "\n")


def load_scores(path: str | Path, expected_ids: list[str]) -> dict[str, float]:
    """Load an external {sample_id, score} JSONL file, requiring full coverage."""
    loaded: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            loaded[obj["sample_id"]] = float(obj["score"])
    missing = sorted(set(expected_ids) - set(loaded))
    if missing:
        raise ValueError(
            f"score file {path} is missing {len(missing)} sample id(s), e.g. {missing[:3]}"
        )
    return {sid: loaded[sid] for sid in expected_ids}


RANKED_TSV_HEADER = "rank\titem_id\tscore"


def write_ranked_tsv(ranked: list[Prediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(RANKED_TSV_HEADER + "\n")
        for p in ranked:
            fh.write(f"{p.rank}\t{p.item_id}\t{p.predicted_score:.10g}\n")


def read_ranked_tsv(path: str | Path) -> list[tuple[int, str, float]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != RANKED_TSV_HEADER:
            raise ValueError(f"{path} does not look like a ranked-list TSV")
        for line in fh:
            rank, item_id, value = line.rstrip("\n").split("\t")
            rows.append((int(rank), item_id, float(value)))
    return rows
