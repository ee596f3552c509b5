import json
import os
from pathlib import Path

import pytest

from trendrank.cli import main
from trendrank.config import ConfigError, load_config
from trendrank.ingest import read_samples
from trendrank.synth import write_demo_corpus

ARTIFACTS = [
    "series.jsonl", "metadata.jsonl", "events.jsonl",
    "samples_train.jsonl", "samples_val.jsonl", "samples_test.jsonl",
    "similarity.tsv", "triplets.jsonl",
    "head.json", "loss_trace.csv", "fig_loss.png",
    "scores_test.jsonl", "ranked_test.tsv", "fig_top_items.png",
    "predictions_test.jsonl",
    "metrics_report.json", "metrics_report.tsv", "fig_metrics.png",
]


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    corpus = write_demo_corpus(root, n_items=16, n_windows=8, n_planted=3, n_users=24)
    config = {
        "interactions_path": str(corpus.interactions_path),
        "metadata_path": str(corpus.metadata_path),
        "embed_dim": 32,
        "epochs": 3,
        "k_values": [3, 5],
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    return corpus, config_path


# --- config layering ------------------------------------------------------------

def test_defaults_match_stated_values():
    cfg = load_config(env={})
    assert (cfg.alpha, cfg.beta, cfg.gamma) == (0.4, 0.2, 0.4)
    assert cfg.tau == 0.1
    assert cfg.n_pos == 2
    assert cfg.batch_size == 8
    assert cfg.window_days == 30
    assert cfg.count_mode == "distinct"


def test_env_override_and_flag_precedence():
    env = {"TRENDRANK_ALPHA": "0.9", "TRENDRANK_SCORER": "last_value"}
    cfg = load_config(env=env)
    assert cfg.alpha == 0.9
    assert cfg.scorer == "last_value"
    cfg = load_config(overrides={"alpha": "0.7"}, env=env)
    assert cfg.alpha == 0.7


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"no_such_key": 1}')
    with pytest.raises(ConfigError, match="no_such_key"):
        load_config(path, env={})
    with pytest.raises(ConfigError, match="unknown"):
        load_config(overrides={"no_such_key": "1"}, env={})


def test_k_values_comma_form():
    cfg = load_config(overrides={"k_values": "3,7"}, env={})
    assert cfg.k_values == (3, 7)


def test_lambda_key_maps_to_attr():
    cfg = load_config(overrides={"lambda": "2.5"}, env={})
    assert cfg.lambda_ == 2.5
    assert cfg.as_dict()["lambda"] == 2.5


def test_invalid_values_name_the_field():
    for key, bad in [("n_pos", "0"), ("tau", "0"), ("dropout_rate", "1.0"), ("pool_mode", "x")]:
        with pytest.raises(ConfigError, match=key):
            load_config(overrides={key: bad}, env={})


# --- exit codes -------------------------------------------------------------------

def test_invalid_config_exits_2_naming_field(tmp_path, caplog):
    rc = main(["mine", "--out", str(tmp_path), "--set", "n_pos=0"])
    assert rc == 2
    assert "n_pos" in caplog.text


def test_missing_config_file_exits_2(tmp_path):
    rc = main(["ingest", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)])
    assert rc == 2


def test_missing_artifact_exits_3_naming_file(tmp_path, caplog):
    rc = main(["split", "--out", str(tmp_path)])
    assert rc == 3
    assert "series.jsonl" in caplog.text


def test_strict_mode_fails_on_malformed_input(tmp_path):
    interactions = tmp_path / "x.jsonl"
    interactions.write_text('{"user_id":"u","item_id":"m","timestamp":1}\nbroken\n')
    metadata = tmp_path / "meta.jsonl"
    metadata.write_text('{"item_id":"m","description_text":"d"}\n')
    args = [
        "ingest", "--out", str(tmp_path / "out"),
        "--set", f"interactions_path={interactions}",
        "--set", f"metadata_path={metadata}",
    ]
    assert main(args) == 0
    assert main(args + ["--strict"]) == 4


# --- pipeline behaviour --------------------------------------------------------------

def test_run_all_writes_every_artifact(small_corpus, tmp_path):
    _, config_path = small_corpus
    out = tmp_path / "out"
    rc = main(["run-all", "--config", str(config_path), "--out", str(out)])
    assert rc == 0
    for name in ARTIFACTS:
        path = out / name
        assert path.exists() and path.stat().st_size > 0, name
    report = json.loads((out / "metrics_report.json").read_text())
    assert set(report) == {"hr", "ndcg", "jaccard", "users", "items"}


def test_stage_isolation_rerun_downstream(small_corpus, tmp_path):
    _, config_path = small_corpus
    out = tmp_path / "out"
    assert main(["run-all", "--config", str(config_path), "--out", str(out)]) == 0
    report_before = (out / "metrics_report.json").read_bytes()
    (out / "ranked_test.tsv").unlink()
    (out / "metrics_report.json").unlink()
    for stage in ("score", "explain", "evaluate"):
        assert main([stage, "--config", str(config_path), "--out", str(out)]) == 0
    assert (out / "metrics_report.json").read_bytes() == report_before


def test_evaluate_with_perfect_oracle_score_file(small_corpus, tmp_path):
    corpus, config_path = small_corpus
    out = tmp_path / "out"
    for stage in ("ingest", "split"):
        assert main([stage, "--config", str(config_path), "--out", str(out)]) == 0
    test_samples = read_samples(out / "samples_test.jsonl")
    eval_window = min(s.target_window for s in test_samples)
    scores_path = tmp_path / "oracle_scores.jsonl"
    with open(scores_path, "w") as fh:
        for s in test_samples:
            if s.target_window == eval_window:
                fh.write(json.dumps({"sample_id": s.sample_id, "score": float(s.label)}) + "\n")
    for stage in ("score", "explain", "evaluate"):
        rc = main([
            stage, "--config", str(config_path), "--out", str(out),
            "--set", f"scores_path={scores_path}",
        ])
        assert rc == 0
    report = json.loads((out / "metrics_report.json").read_text())
    assert report["jaccard"]["3"] == 1.0
    assert report["jaccard"]["5"] == 1.0


def test_score_file_missing_coverage_exits_4(small_corpus, tmp_path, caplog):
    _, config_path = small_corpus
    out = tmp_path / "out"
    for stage in ("ingest", "split"):
        assert main([stage, "--config", str(config_path), "--out", str(out)]) == 0
    scores_path = tmp_path / "partial.jsonl"
    scores_path.write_text('{"sample_id":"nope@1","score":1.0}\n')
    rc = main([
        "score", "--config", str(config_path), "--out", str(out),
        "--set", f"scores_path={scores_path}",
    ])
    assert rc == 4


def test_bad_override_syntax_exits_2(tmp_path):
    assert main(["ingest", "--out", str(tmp_path), "--set", "novalue"]) == 2


def test_meta_files_record_config_and_hashes(small_corpus, tmp_path):
    _, config_path = small_corpus
    out = tmp_path / "out"
    assert main(["ingest", "--config", str(config_path), "--out", str(out)]) == 0
    meta = json.loads((out / "ingest.meta.json").read_text())
    assert meta["stage"] == "ingest"
    assert meta["effective_config"]["alpha"] == 0.4
    assert all(len(digest) == 64 for digest in meta["input_hashes"].values())
    assert meta["resolved_origin"] >= 0
