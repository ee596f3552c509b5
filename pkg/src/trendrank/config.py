"""Flat key-value pipeline configuration with file, environment, and flag layers."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

ENV_PREFIX = "TRENDRANK_"


class ConfigError(Exception):
    """Invalid or unknown configuration; carries the offending field name."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


DEFAULTS: dict[str, Any] = {
    "interactions_path": None,
    "metadata_path": None,
    "embeddings_path": None,
    "scores_path": None,
    "window_days": 30,
    "origin": None,
    "count_mode": "distinct",
    "train_windows": None,
    "val_windows": None,
    "test_windows": None,
    "alpha": 0.4,
    "beta": 0.2,
    "gamma": 0.4,
    "sigma": 1.0,
    "embed_dim": 256,
    "trend_normalize": False,
    "n_pos": 2,
    "pool_mode": "batch",
    "batch_size": 8,
    "global_negatives": 6,
    "tau": 0.1,
    "lambda": 1.0,
    "dropout_rate": 0.1,
    "learning_rate": 0.05,
    "epochs": 20,
    "seed": 7,
    "k_values": [5, 10],
    "scorer": "linear_trend",
    "scorer_window": 3,
    "eval_window": None,
    "threads": 1,
    "strict": False,
}


@dataclass(frozen=True)
class PipelineConfig:
    interactions_path: str | None
    metadata_path: str | None
    embeddings_path: str | None
    scores_path: str | None
    window_days: int
    origin: int | None
    count_mode: str
    train_windows: tuple[int, int] | None
    val_windows: tuple[int, int] | None
    test_windows: tuple[int, int] | None
    alpha: float
    beta: float
    gamma: float
    sigma: float
    embed_dim: int
    trend_normalize: bool
    n_pos: int
    pool_mode: str
    batch_size: int
    global_negatives: int
    tau: float
    lambda_: float
    dropout_rate: float
    learning_rate: float
    epochs: int
    seed: int
    k_values: tuple[int, ...]
    scorer: str
    scorer_window: int
    eval_window: int | None
    threads: int
    strict: bool

    def as_dict(self) -> dict[str, Any]:
        out = {}
        for key in DEFAULTS:
            attr = "lambda_" if key == "lambda" else key
            value = getattr(self, attr)
            if isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return out


def _check_optional_path(key: str, value: Any) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise ConfigError(key, f"expected a file path string, got {value!r}")
    return value


def _check_int(key: str, value: Any, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {value}")
    return value


def _check_float(key: str, value: Any, minimum: float | None = None, exclusive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    value = float(value)
    if minimum is not None:
        if exclusive and value <= minimum:
            raise ConfigError(key, f"must be > {minimum}, got {value}")
        if not exclusive and value < minimum:
            raise ConfigError(key, f"must be >= {minimum}, got {value}")
    return value


def _check_bool(key: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(key, f"expected true/false, got {value!r}")
    return value


def _check_choice(key: str, value: Any, choices: tuple[str, ...]) -> str:
    if value not in choices:
        raise ConfigError(key, f"expected one of {choices}, got {value!r}")
    return value


def _check_int_list(key: str, value: Any) -> list[int]:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        try:
            value = [int(p) for p in parts]
        except ValueError:
            raise ConfigError(key, f"expected a list of integers, got {value!r}") from None
    if not isinstance(value, list) or not value:
        raise ConfigError(key, f"expected a non-empty list of integers, got {value!r}")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(key, f"expected integers, found {v!r}")
        out.append(v)
    return out


def _check_window_range(key: str, value: Any) -> tuple[int, int] | None:
    if value is None:
        return None
    pair = _check_int_list(key, value)
    if len(pair) != 2:
        raise ConfigError(key, f"expected [first_window, last_window], got {value!r}")
    lo, hi = pair
    if lo < 1 or hi < lo:
        raise ConfigError(key, f"expected an ascending range with first window >= 1, got {value!r}")
    return lo, hi


def _validate(data: dict[str, Any]) -> PipelineConfig:
    ranges = {
        name: _check_window_range(name, data[name])
        for name in ("train_windows", "val_windows", "test_windows")
    }
    supplied = [name for name, rng in ranges.items() if rng is not None]
    if supplied and len(supplied) != 3:
        missing = sorted(set(ranges) - set(supplied))[0]
        raise ConfigError(missing, "all three split ranges must be given together (or none)")

    k_values = _check_int_list("k_values", data["k_values"])
    if any(k < 1 for k in k_values):
        raise ConfigError("k_values", f"all K values must be positive, got {k_values}")

    alpha = _check_float("alpha", data["alpha"], minimum=0.0)
    beta = _check_float("beta", data["beta"], minimum=0.0)
    gamma = _check_float("gamma", data["gamma"], minimum=0.0)
    if alpha + beta + gamma <= 0:
        raise ConfigError("alpha", "alpha + beta + gamma must be positive")

    dropout = _check_float("dropout_rate", data["dropout_rate"], minimum=0.0)
    if dropout >= 1.0:
        raise ConfigError("dropout_rate", f"must be < 1, got {dropout}")

    origin = data["origin"]
    if origin is not None:
        origin = _check_int("origin", origin, minimum=0)
    eval_window = data["eval_window"]
    if eval_window is not None:
        eval_window = _check_int("eval_window", eval_window, minimum=1)

    return PipelineConfig(
        interactions_path=_check_optional_path("interactions_path", data["interactions_path"]),
        metadata_path=_check_optional_path("metadata_path", data["metadata_path"]),
        embeddings_path=_check_optional_path("embeddings_path", data["embeddings_path"]),
        scores_path=_check_optional_path("scores_path", data["scores_path"]),
        window_days=_check_int("window_days", data["window_days"], minimum=1),
        origin=origin,
        count_mode=_check_choice("count_mode", data["count_mode"], ("distinct", "events")),
        train_windows=ranges["train_windows"],
        val_windows=ranges["val_windows"],
        test_windows=ranges["test_windows"],
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        sigma=_check_float("sigma", data["sigma"], minimum=0.0, exclusive=True),
        embed_dim=_check_int("embed_dim", data["embed_dim"], minimum=8),
        trend_normalize=_check_bool("trend_normalize", data["trend_normalize"]),
        n_pos=_check_int("n_pos", data["n_pos"], minimum=1),
        pool_mode=_check_choice("pool_mode", data["pool_mode"], ("batch", "global")),
        batch_size=_check_int("batch_size", data["batch_size"], minimum=1),
        global_negatives=_check_int("global_negatives", data["global_negatives"], minimum=1),
        tau=_check_float("tau", data["tau"], minimum=0.0, exclusive=True),
        lambda_=_check_float("lambda", data["lambda"], minimum=0.0),
        dropout_rate=dropout,
        learning_rate=_check_float("learning_rate", data["learning_rate"], minimum=0.0, exclusive=True),
        epochs=_check_int("epochs", data["epochs"], minimum=0),
        seed=_check_int("seed", data["seed"], minimum=0),
        k_values=tuple(k_values),
        scorer=_check_choice("scorer", data["scorer"], ("last_value", "moving_average", "linear_trend")),
        scorer_window=_check_int("scorer_window", data["scorer_window"], minimum=1),
        eval_window=eval_window,
        threads=_check_int("threads", data["threads"], minimum=1),
        strict=_check_bool("strict", data["strict"]),
    )


def _parse_override(key: str, raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, str] | None = None,
    env: Mapping[str, str] | None = None,
) -> PipelineConfig:
    """Merge defaults <- config file <- environment <- flag overrides, then validate.

    Unknown keys are rejected at every layer; environment variables use the
    TRENDRANK_ prefix with the upper-cased key name.
    """
    data = dict(DEFAULTS)

    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                file_data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError("config", f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(file_data, dict):
            raise ConfigError("config", f"config file {path} must hold a JSON object")
        for key, value in file_data.items():
            if key not in DEFAULTS:
                raise ConfigError(key, "unknown configuration key")
            data[key] = value

    env = os.environ if env is None else env
    for key in DEFAULTS:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            data[key] = _parse_override(key, env[env_key])

    for key, raw in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown configuration key")
        data[key] = _parse_override(key, raw) if isinstance(raw, str) else raw

    return _validate(data)
