"""Staged pipeline: each stage reads its predecessor's artifacts and writes its own."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from . import contrastive, evaluation, figures, ingest, mining, scoring, similarity
from .config import ConfigError, PipelineConfig

logger = logging.getLogger(__name__)

# Derived per-stage seeds keep all randomness on one config knob.
MINING_SEED_OFFSET = 11
HEAD_INIT_SEED_OFFSET = 23
TRAIN_SEED_OFFSET = 37

SERIES_FILE = "series.jsonl"
METADATA_FILE = "metadata.jsonl"
EVENTS_FILE = "events.jsonl"
SAMPLES_TRAIN_FILE = "samples_train.jsonl"
SAMPLES_VAL_FILE = "samples_val.jsonl"
SAMPLES_TEST_FILE = "samples_test.jsonl"
SIMILARITY_FILE = "similarity.tsv"
TRIPLETS_FILE = "triplets.jsonl"
HEAD_FILE = "head.json"
LOSS_TRACE_FILE = "loss_trace.csv"
FIG_LOSS_FILE = "fig_loss.png"
SCORES_FILE = "scores_test.jsonl"
RANKED_FILE = "ranked_test.tsv"
FIG_TOP_FILE = "fig_top_items.png"
PREDICTIONS_FILE = "predictions_test.jsonl"
REPORT_JSON_FILE = "metrics_report.json"
REPORT_TSV_FILE = "metrics_report.tsv"
FIG_METRICS_FILE = "fig_metrics.png"


class ArtifactError(Exception):
    """A required input artifact is missing."""

    def __init__(self, path: str | Path):
        super().__init__(f"missing input artifact: {path}")
        self.path = str(path)


class InvariantError(Exception):
    """An internal pipeline invariant was violated."""


def _require(path: Path) -> Path:
    if not path.exists():
        raise ArtifactError(path)
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_meta(
    out: Path, stage: str, cfg: PipelineConfig, inputs: list[Path], outputs: list[str], **extra
) -> None:
    input_hashes = {p.name: _sha256(p) for p in inputs}
    meta = {
        "stage": stage,
        "effective_config": cfg.as_dict(),
        "input_hashes": input_hashes,
        "outputs": outputs,
        **extra,
    }
    logger.info("stage %s: config=%s", stage, json.dumps(cfg.as_dict(), sort_keys=True))
    for name, digest in input_hashes.items():
        logger.info("stage %s: input %s sha256=%s", stage, name, digest)
    with open(out / f"{stage}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _input_file(cfg_value: str | None, field: str) -> Path:
    if not cfg_value:
        raise ConfigError(field, "required for this stage")
    return _require(Path(cfg_value))


def run_ingest(cfg: PipelineConfig, out: Path) -> None:
    interactions = _input_file(cfg.interactions_path, "interactions_path")
    metadata_path = _input_file(cfg.metadata_path, "metadata_path")

    records, malformed = ingest.parse_interactions(interactions, strict=cfg.strict)
    metadata, meta_malformed = ingest.parse_metadata(metadata_path)
    if not records:
        raise InvariantError(f"no valid interaction records in {interactions}")
    try:
        origin = ingest.resolve_origin(records, cfg.origin)
    except ValueError as exc:
        raise ConfigError("origin", str(exc)) from None
    window_cfg = ingest.WindowConfig(window_days=cfg.window_days, origin=origin)
    series = ingest.build_series(records, window_cfg, count_mode=cfg.count_mode)
    events = ingest.dedup_window_events(records, window_cfg)

    ingest.write_series(series, out / SERIES_FILE)
    ingest.write_metadata(metadata, out / METADATA_FILE)
    ingest.write_events(events, out / EVENTS_FILE)
    _write_meta(
        out,
        "ingest",
        cfg,
        [interactions, metadata_path],
        [SERIES_FILE, METADATA_FILE, EVENTS_FILE],
        resolved_origin=origin,
        malformed_interactions=malformed,
        malformed_metadata=meta_malformed,
    )


def _resolve_split(cfg: PipelineConfig, series: dict) -> ingest.DatasetSplit:
    if cfg.train_windows is not None:
        try:
            return ingest.DatasetSplit(
                train=cfg.train_windows, val=cfg.val_windows, test=cfg.test_windows
            )
        except ValueError as exc:
            raise ConfigError("train_windows/val_windows/test_windows", str(exc)) from None
    try:
        return ingest.default_split(series)
    except ValueError as exc:
        raise ConfigError("test_windows", str(exc)) from None


def _check_leakage(train, val, test) -> None:
    for sample in (*train, *val, *test):
        if sample.history and sample.first_window + len(sample.history) > sample.target_window:
            raise InvariantError(f"sample {sample.sample_id} has history at/after its target")
    if train and val and max(s.target_window for s in train) >= min(s.target_window for s in val):
        raise InvariantError("train target windows overlap validation targets")
    if val and test and max(s.target_window for s in val) >= min(s.target_window for s in test):
        raise InvariantError("validation target windows overlap test targets")


def run_split(cfg: PipelineConfig, out: Path) -> None:
    series = ingest.read_series(_require(out / SERIES_FILE))
    metadata = ingest.read_metadata(_require(out / METADATA_FILE))
    split = _resolve_split(cfg, series)
    train, val, test = ingest.make_samples(series, metadata, split)
    _check_leakage(train, val, test)
    ingest.write_samples(train, out / SAMPLES_TRAIN_FILE)
    ingest.write_samples(val, out / SAMPLES_VAL_FILE)
    ingest.write_samples(test, out / SAMPLES_TEST_FILE)
    _write_meta(
        out,
        "split",
        cfg,
        [out / SERIES_FILE, out / METADATA_FILE],
        [SAMPLES_TRAIN_FILE, SAMPLES_VAL_FILE, SAMPLES_TEST_FILE],
        split={k: list(v) for k, v in split.as_dict().items()},
        sizes={"train": len(train), "val": len(val), "test": len(test)},
    )


def _item_embeddings(cfg: PipelineConfig, out: Path, samples: list) -> dict[str, np.ndarray]:
    if cfg.embeddings_path:
        embeddings = similarity.load_embeddings(_require(Path(cfg.embeddings_path)))
        missing = sorted({s.item_id for s in samples} - set(embeddings))
        if missing:
            raise ValueError(
                f"embedding file lacks {len(missing)} item(s), e.g. {missing[:3]}"
            )
        return embeddings
    metadata = ingest.read_metadata(_require(out / METADATA_FILE))
    for s in samples:
        if s.item_id not in metadata:
            metadata[s.item_id] = ingest.ItemMetadata(item_id=s.item_id)
    # Samples carry their description text, so stay consistent with it even if
    # the metadata artifact was edited between stages.
    for s in samples:
        metadata[s.item_id] = ingest.ItemMetadata(
            item_id=s.item_id, description_text=s.metadata.description_text
        )
    return similarity.build_metadata_embeddings(metadata, cfg.embed_dim)


def _weights(cfg: PipelineConfig) -> similarity.SimilarityWeights:
    return similarity.SimilarityWeights(
        alpha=cfg.alpha, beta=cfg.beta, gamma=cfg.gamma, sigma=cfg.sigma
    )


def run_similarity(cfg: PipelineConfig, out: Path) -> None:
    samples = ingest.read_samples(_require(out / SAMPLES_TRAIN_FILE))
    embeddings = _item_embeddings(cfg, out, samples)
    similarity.write_similarity_tsv(
        samples,
        _weights(cfg),
        embeddings,
        out / SIMILARITY_FILE,
        normalize_trend=cfg.trend_normalize,
        threads=cfg.threads,
    )
    _write_meta(out, "similarity", cfg, [out / SAMPLES_TRAIN_FILE], [SIMILARITY_FILE])


def run_mine(cfg: PipelineConfig, out: Path) -> None:
    samples = ingest.read_samples(_require(out / SAMPLES_TRAIN_FILE))
    embeddings = _item_embeddings(cfg, out, samples)
    pool = mining.CandidatePool(
        samples=samples, pool_mode=cfg.pool_mode, batch_size=cfg.batch_size
    )
    triplets = mining.mine_triplets(
        pool,
        _weights(cfg),
        embeddings,
        n_pos=cfg.n_pos,
        seed=cfg.seed + MINING_SEED_OFFSET,
        global_negatives=cfg.global_negatives,
        normalize_trend=cfg.trend_normalize,
    )
    mining.write_triplets(triplets, out / TRIPLETS_FILE)
    _write_meta(
        out,
        "mine",
        cfg,
        [out / SAMPLES_TRAIN_FILE],
        [TRIPLETS_FILE],
        triplet_count=len(triplets),
    )


def run_train_head(cfg: PipelineConfig, out: Path) -> None:
    triplets = mining.read_triplets(_require(out / TRIPLETS_FILE))
    samples = ingest.read_samples(_require(out / SAMPLES_TRAIN_FILE))
    meta_embeddings = _item_embeddings(cfg, out, samples)
    scaler = contrastive.fit_feature_scaler(samples)
    raw = contrastive.build_raw_embeddings(samples, meta_embeddings, scaler)
    d_in = next(iter(raw.values())).size if raw else cfg.embed_dim + contrastive.TREND_FEATURE_DIM
    head = contrastive.init_head(
        d_in=d_in,
        dropout_rate=cfg.dropout_rate,
        seed=cfg.seed + HEAD_INIT_SEED_OFFSET,
    )
    trained, trace = contrastive.train_head(
        head,
        triplets,
        raw,
        tau=cfg.tau,
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        seed=cfg.seed + TRAIN_SEED_OFFSET,
    )
    contrastive.save_head(trained, out / HEAD_FILE, seed=cfg.seed)
    contrastive.write_loss_trace(trace, out / LOSS_TRACE_FILE)
    figures.plot_loss_trace(trace, out / FIG_LOSS_FILE)
    _write_meta(
        out,
        "train-head",
        cfg,
        [out / TRIPLETS_FILE, out / SAMPLES_TRAIN_FILE],
        [HEAD_FILE, LOSS_TRACE_FILE, FIG_LOSS_FILE],
        final_loss=trace[-1] if trace else None,
    )


def _resolve_eval_window(cfg: PipelineConfig, test_samples: list) -> int:
    windows = sorted({s.target_window for s in test_samples})
    if not windows:
        raise InvariantError("no test samples to score or evaluate")
    if cfg.eval_window is None:
        return windows[0]
    if cfg.eval_window not in windows:
        raise ConfigError(
            "eval_window", f"window {cfg.eval_window} has no test samples (have {windows})"
        )
    return cfg.eval_window


def run_score(cfg: PipelineConfig, out: Path) -> None:
    test_samples = ingest.read_samples(_require(out / SAMPLES_TEST_FILE))
    eval_window = _resolve_eval_window(cfg, test_samples)
    window_samples = sorted(
        (s for s in test_samples if s.target_window == eval_window),
        key=lambda s: s.sample_id,
    )
    if cfg.scores_path:
        loaded = scoring.load_scores(
            _require(Path(cfg.scores_path)), [s.sample_id for s in window_samples]
        )
        scores = {s.sample_id: loaded[s.sample_id] for s in window_samples}
    else:
        spec = scoring.ScorerSpec(kind=cfg.scorer, params={"window": cfg.scorer_window})
        scores = {s.sample_id: scoring.score(spec, s) for s in window_samples}
    predictions = [
        scoring.Prediction(sample_id=s.sample_id, item_id=s.item_id, predicted_score=scores[s.sample_id])
        for s in window_samples
    ]
    ranked = scoring.rank_window(predictions, n=len(predictions))
    scoring.write_scores(scores, out / SCORES_FILE)
    scoring.write_ranked_tsv(ranked, out / RANKED_FILE)
    figures.plot_top_items(ranked, out / FIG_TOP_FILE)
    _write_meta(
        out,
        "score",
        cfg,
        [out / SAMPLES_TEST_FILE],
        [SCORES_FILE, RANKED_FILE, FIG_TOP_FILE],
        eval_window=eval_window,
    )


def run_explain(cfg: PipelineConfig, out: Path) -> None:
    test_samples = ingest.read_samples(_require(out / SAMPLES_TEST_FILE))
    eval_window = _resolve_eval_window(cfg, test_samples)
    window_samples = sorted(
        (s for s in test_samples if s.target_window == eval_window),
        key=lambda s: s.sample_id,
    )
    score_rows = ingest.read_jsonl(_require(out / SCORES_FILE))
    scores = {row["sample_id"]: float(row["score"]) for row in score_rows}
    missing = [s.sample_id for s in window_samples if s.sample_id not in scores]
    if missing:
        raise InvariantError(
            f"scores artifact lacks {len(missing)} sample(s), e.g. {missing[:3]}"
        )
    rows = []
    for s in window_samples:
        record = scoring.explain(s, scores[s.sample_id], embed_dim=cfg.embed_dim)
        rows.append(scoring.prediction_row(s, scores[s.sample_id], record))
    scoring.write_predictions(rows, out / PREDICTIONS_FILE)
    _write_meta(
        out,
        "explain",
        cfg,
        [out / SAMPLES_TEST_FILE, out / SCORES_FILE],
        [PREDICTIONS_FILE],
        eval_window=eval_window,
    )


def run_evaluate(cfg: PipelineConfig, out: Path) -> None:
    test_samples = ingest.read_samples(_require(out / SAMPLES_TEST_FILE))
    eval_window = _resolve_eval_window(cfg, test_samples)
    ranked_rows = scoring.read_ranked_tsv(_require(out / RANKED_FILE))
    events = ingest.read_events(_require(out / EVENTS_FILE))

    window_samples = [s for s in test_samples if s.target_window == eval_window]
    unlabeled = [s.sample_id for s in window_samples if s.label is None]
    if unlabeled:
        raise InvariantError(
            f"cannot evaluate: {len(unlabeled)} test sample(s) lack labels, e.g. {unlabeled[:3]}"
        )
    item_truth = {s.item_id: int(s.label) for s in window_samples}
    user_truth: dict[str, set[str]] = {}
    for user_id, item_id, window in events:
        if window == eval_window:
            user_truth.setdefault(user_id, set()).add(item_id)

    run = evaluation.EvalRun(
        ranked_list=[item_id for _, item_id, _ in ranked_rows],
        user_truth=user_truth,
        item_truth=item_truth,
        k_values=cfg.k_values,
    )
    report = evaluation.evaluate(run)
    evaluation.write_report_json(report, out / REPORT_JSON_FILE)
    evaluation.write_report_tsv(report, out / REPORT_TSV_FILE)
    figures.plot_metric_bars(report, out / FIG_METRICS_FILE)
    _write_meta(
        out,
        "evaluate",
        cfg,
        [out / SAMPLES_TEST_FILE, out / RANKED_FILE, out / EVENTS_FILE],
        [REPORT_JSON_FILE, REPORT_TSV_FILE, FIG_METRICS_FILE],
        eval_window=eval_window,
    )


STAGES = {
    "ingest": run_ingest,
    "split": run_split,
    "similarity": run_similarity,
    "mine": run_mine,
    "train-head": run_train_head,
    "score": run_score,
    "explain": run_explain,
    "evaluate": run_evaluate,
}

STAGE_ORDER = list(STAGES)


def run_subcommand(name: str, cfg: PipelineConfig, out: Path) -> None:
    """Run one pipeline stage (or all of them) against an output directory."""
    out.mkdir(parents=True, exist_ok=True)
    if name == "run-all":
        for stage in STAGE_ORDER:
            logger.info("running stage %s", stage)
            STAGES[stage](cfg, out)
        return
    if name not in STAGES:
        raise ConfigError("command", f"unknown subcommand {name!r}")
    STAGES[name](cfg, out)
