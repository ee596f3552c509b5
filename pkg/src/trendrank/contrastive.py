"""Projection head, InfoNCE / cross-entropy objectives, and a verifiable head trainer."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from itertools import chain
from pathlib import Path

import numpy as np

from .ingest import Sample
from .mining import Triplet
from .similarity import rate_from_counts

LAYER_NORM_EPS = 1e-5
CE_EPS = 1e-12
DEFAULT_HIDDEN_DIM = 256
DEFAULT_OUTPUT_DIM = 128
TREND_FEATURE_DIM = 8


@dataclass
class ProjectionHead:
    """Two-layer map raw -> rectifier -> dropout -> linear -> layer norm.

    w1 is (d_hid, d_in), w2 is (d_out, d_hid); the layer norm carries no
    learned affine parameters.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2 or self.b1.ndim != 1:
            raise ValueError("head parameters must be 2-d weights and a 1-d bias")
        if self.w1.shape[0] != self.b1.shape[0] or self.w2.shape[1] != self.w1.shape[0]:
            raise ValueError(
                f"inconsistent head dimensions: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}"
            )
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        for name, arr in (("w1", self.w1), ("b1", self.b1), ("w2", self.w2)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"head parameter {name} contains non-finite entries")

    @property
    def d_in(self) -> int:
        return self.w1.shape[1]

    @property
    def d_hid(self) -> int:
        return self.w1.shape[0]

    @property
    def d_out(self) -> int:
        return self.w2.shape[0]

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.dropout_rate)


def init_head(
    d_in: int,
    d_hid: int = DEFAULT_HIDDEN_DIM,
    d_out: int = DEFAULT_OUTPUT_DIM,
    dropout_rate: float = 0.1,
    seed: int = 0,
) -> ProjectionHead:
    """Seeded Gaussian init scaled for the rectifier; zero bias."""
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_hid, d_in))
    w2 = rng.normal(0.0, np.sqrt(1.0 / d_hid), size=(d_out, d_hid))
    return ProjectionHead(w1=w1, b1=np.zeros(d_hid), w2=w2, dropout_rate=dropout_rate)


def dropout_mask(d: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    if rate <= 0.0:
        return np.ones(d)
    keep = rng.random(d) >= rate
    return keep.astype(float) / (1.0 - rate)


def _layer_norm_rows(z: np.ndarray) -> tuple[np.ndarray, tuple]:
    mu = z.mean(axis=1, keepdims=True)
    centered = z - mu
    std = np.sqrt((centered * centered).mean(axis=1, keepdims=True))
    denom = std + LAYER_NORM_EPS
    return centered / denom, (centered, std, denom)


def _layer_norm_backward(grad_out: np.ndarray, cache: tuple) -> np.ndarray:
    centered, std, denom = cache
    n = centered.shape[1]
    grad = (grad_out - grad_out.mean(axis=1, keepdims=True)) / denom
    std_safe = np.where(std > 0, std, 1.0)
    corr = centered * ((grad_out * centered).sum(axis=1, keepdims=True)) / (
        n * std_safe * denom * denom
    )
    return grad - np.where(std > 0, corr, 0.0)


def _forward_rows(
    head: ProjectionHead, x: np.ndarray, masks: np.ndarray
) -> tuple[np.ndarray, dict]:
    pre = x @ head.w1.T + head.b1
    hidden = np.maximum(pre, 0.0)
    dropped = hidden * masks
    z = dropped @ head.w2.T
    out, ln_cache = _layer_norm_rows(z)
    cache = {"x": x, "pre": pre, "dropped": dropped, "masks": masks, "ln": ln_cache}
    return out, cache


def _backward_rows(
    head: ProjectionHead, grad_out: np.ndarray, cache: dict
) -> dict[str, np.ndarray]:
    grad_z = _layer_norm_backward(grad_out, cache["ln"])
    grad_w2 = grad_z.T @ cache["dropped"]
    grad_dropped = grad_z @ head.w2
    grad_hidden = grad_dropped * cache["masks"]
    grad_pre = grad_hidden * (cache["pre"] > 0)
    grad_w1 = grad_pre.T @ cache["x"]
    grad_b1 = grad_pre.sum(axis=0)
    return {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2}


def project(
    head: ProjectionHead, raw: np.ndarray, mode: str = "eval", seed: int = 0
) -> np.ndarray:
    """Project one raw embedding; train mode applies seeded inverted dropout."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (head.d_in,):
        raise ValueError(f"raw embedding has shape {raw.shape}, expected ({head.d_in},)")
    if mode == "train":
        mask = dropout_mask(head.d_hid, head.dropout_rate, np.random.default_rng(seed))
    else:
        mask = np.ones(head.d_hid)
    out, _ = _forward_rows(head, raw[None, :], mask[None, :])
    return out[0]


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + float(np.log(np.sum(np.exp(values - m))))


def info_nce(
    anchor: np.ndarray,
    positives: list[np.ndarray],
    negatives: list[np.ndarray],
    tau: float,
) -> float:
    """InfoNCE with dot-product logits and the temperature inside the exponent.

    -log( sum_p exp(<a,p>/tau) / (sum_p exp(<a,p>/tau) + sum_n exp(<a,n>/tau)) ),
    evaluated as logsumexp(all) - logsumexp(positives) for stability.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not positives:
        raise ValueError("info_nce requires at least one positive")
    anchor = np.asarray(anchor, dtype=float)
    pos = np.asarray(positives, dtype=float)
    neg = np.asarray(negatives, dtype=float) if negatives else np.empty((0, anchor.size))
    if pos.shape[1] != anchor.size or (neg.size and neg.shape[1] != anchor.size):
        raise ValueError("anchor, positives, and negatives must share one dimension")
    pos_logits = pos @ anchor / tau
    neg_logits = neg @ anchor / tau if neg.size else np.empty(0)
    all_logits = np.concatenate([pos_logits, neg_logits])
    return _logsumexp(all_logits) - _logsumexp(pos_logits)


def _info_nce_with_embedding_grads(
    embedded: np.ndarray, n_pos: int, tau: float
) -> tuple[float, np.ndarray]:
    """Loss and d(loss)/d(embedded rows) for rows [anchor, positives..., negatives...]."""
    anchor = embedded[0]
    others = embedded[1:]
    logits = others @ anchor / tau
    m = np.max(logits)
    exp_all = np.exp(logits - m)
    soft_all = exp_all / exp_all.sum()
    mp = np.max(logits[:n_pos])
    exp_pos = np.exp(logits[:n_pos] - mp)
    soft_pos = exp_pos / exp_pos.sum()
    loss = (m + np.log(exp_all.sum())) - (mp + np.log(exp_pos.sum()))

    coeff = soft_all.copy()
    coeff[:n_pos] -= soft_pos
    grad = np.empty_like(embedded)
    grad[0] = coeff @ others / tau
    grad[1:] = np.outer(coeff, anchor) / tau
    return float(loss), grad


def triplet_masks(
    head: ProjectionHead, n_rows: int, mode: str, seed: int
) -> np.ndarray:
    if mode == "train" and head.dropout_rate > 0:
        rng = np.random.default_rng(seed)
        return np.stack(
            [dropout_mask(head.d_hid, head.dropout_rate, rng) for _ in range(n_rows)]
        )
    return np.ones((n_rows, head.d_hid))


def triplet_loss_and_grads(
    head: ProjectionHead,
    raw_rows: np.ndarray,
    n_pos: int,
    tau: float,
    masks: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """InfoNCE through the head for rows [anchor, positives..., negatives...].

    Returns the loss and analytic gradients with respect to every head
    parameter; `masks` fixes the dropout pattern so finite differences stay
    comparable.
    """
    raw_rows = np.asarray(raw_rows, dtype=float)
    if masks is None:
        masks = np.ones((raw_rows.shape[0], head.d_hid))
    embedded, cache = _forward_rows(head, raw_rows, masks)
    loss, grad_embedded = _info_nce_with_embedding_grads(embedded, n_pos, tau)
    grads = _backward_rows(head, grad_embedded, cache)
    return loss, grads


def train_head(
    head: ProjectionHead,
    triplets: list[Triplet],
    embeddings: dict[str, np.ndarray],
    tau: float = 0.1,
    epochs: int = 20,
    learning_rate: float = 0.05,
    seed: int = 0,
) -> tuple[ProjectionHead, list[float]]:
    """Full-batch gradient descent on the mean InfoNCE over mined triplets.

    The trace records the mean loss at the start of each epoch (before that
    epoch's update); zero epochs returns the head unchanged with an empty
    trace. Dropout masks are drawn per (seed, epoch, triplet) so runs are
    reproducible.
    """
    if learning_rate <= 0:
        raise ValueError(f"learning_rate must be positive, got {learning_rate}")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    missing = sorted(
        {
            sid
            for t in triplets
            for sid in chain((t.anchor,), t.positives, t.negatives)
            if sid not in embeddings
        }
    )
    if missing:
        raise ValueError(f"missing raw embeddings for sample id(s): {missing[:5]}")
    if epochs == 0 or not triplets:
        return head, []

    current = head.copy()
    trace: list[float] = []
    mode = "train" if head.dropout_rate > 0 else "eval"
    for epoch in range(epochs):
        total_loss = 0.0
        acc = {
            "w1": np.zeros_like(current.w1),
            "b1": np.zeros_like(current.b1),
            "w2": np.zeros_like(current.w2),
        }
        for t_idx, t in enumerate(triplets):
            ids = [t.anchor, *t.positives, *t.negatives]
            rows = np.stack([embeddings[sid] for sid in ids])
            masks = triplet_masks(current, len(ids), mode, seed=(seed, epoch, t_idx))
            loss, grads = triplet_loss_and_grads(
                current, rows, len(t.positives), tau, masks
            )
            total_loss += loss
            for key in acc:
                acc[key] += grads[key]
        n = len(triplets)
        trace.append(total_loss / n)
        current.w1 -= learning_rate * acc["w1"] / n
        current.b1 -= learning_rate * acc["b1"] / n
        current.w2 -= learning_rate * acc["w2"] / n
    return current, trace


# ---------------------------------------------------------------------------
# supervised objective

def normalize_counts(counts: np.ndarray) -> np.ndarray:
    """Counts -> probability vector; an all-zero vector becomes uniform."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    total = counts.sum()
    if total == 0:
        return np.full(counts.size, 1.0 / counts.size)
    return counts / total


def softmax_scores(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()


def supervised_ce(truth: np.ndarray, pred: np.ndarray) -> float:
    """Cross entropy -sum truth * log(pred + eps) between two item distributions."""
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape:
        raise ValueError(f"distribution lengths differ: {truth.shape} vs {pred.shape}")
    for name, v in (("truth", truth), ("pred", pred)):
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-6:
            raise ValueError(f"{name} is not a probability distribution")
    return float(-(truth * np.log(pred + CE_EPS)).sum())


def combined_loss(sup: float, con: float, lam: float) -> float:
    return sup + lam * con


# ---------------------------------------------------------------------------
# raw sample embeddings (metadata embedding + standardized trend features)

def trend_features(sample: Sample) -> np.ndarray:
    """Fixed 8-dim summary of a sample's history.

    Order: last value, mean, max, length, change rate into the target window,
    least-squares slope, first value, count of zero windows.
    """
    h = sample.history
    if not h:
        return np.zeros(TREND_FEATURE_DIM)
    last = float(h[-1])
    prev = float(h[-2]) if len(h) >= 2 else 0.0
    if len(h) >= 2:
        slope = float(np.polyfit(np.arange(len(h)), np.asarray(h, dtype=float), 1)[0])
    else:
        slope = 0.0
    return np.array(
        [
            last,
            float(np.mean(h)),
            float(np.max(h)),
            float(len(h)),
            rate_from_counts(prev, last),
            slope,
            float(h[0]),
            float(sum(1 for v in h if v == 0)),
        ]
    )


@dataclass(frozen=True)
class FeatureScaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std


def fit_feature_scaler(samples: list[Sample]) -> FeatureScaler:
    """Per-feature mean/std over the training samples; zero spread maps to 1."""
    if not samples:
        raise ValueError("cannot fit a feature scaler on an empty sample list")
    rows = np.stack([trend_features(s) for s in samples])
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return FeatureScaler(mean=mean, std=std)


def build_raw_embeddings(
    samples: list[Sample],
    meta_embeddings: dict[str, np.ndarray],
    scaler: FeatureScaler,
) -> dict[str, np.ndarray]:
    """Concatenate each sample's metadata embedding with its standardized trend features."""
    out = {}
    for s in samples:
        try:
            meta_vec = meta_embeddings[s.item_id]
        except KeyError:
            raise ValueError(f"no metadata embedding for item {s.item_id!r}") from None
        out[s.sample_id] = np.concatenate([meta_vec, scaler.transform(trend_features(s))])
    return out


# ---------------------------------------------------------------------------
# checkpointing

def save_head(head: ProjectionHead, path: str | Path, seed: int = 0) -> None:
    """JSON checkpoint: dimensions, seed, and row-major parameter arrays."""
    payload = {
        "d_in": head.d_in,
        "d_hid": head.d_hid,
        "d_out": head.d_out,
        "dropout_rate": head.dropout_rate,
        "seed": seed,
        "w1": head.w1.ravel().tolist(),
        "b1": head.b1.tolist(),
        "w2": head.w2.ravel().tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_head(path: str | Path) -> ProjectionHead:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    d_in, d_hid, d_out = payload["d_in"], payload["d_hid"], payload["d_out"]
    return ProjectionHead(
        w1=np.asarray(payload["w1"], dtype=float).reshape(d_hid, d_in),
        b1=np.asarray(payload["b1"], dtype=float),
        w2=np.asarray(payload["w2"], dtype=float).reshape(d_out, d_hid),
        dropout_rate=float(payload["dropout_rate"]),
    )


def write_loss_trace(trace: list[float], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(trace, 1):
            writer.writerow([epoch, f"{loss:.10g}"])
