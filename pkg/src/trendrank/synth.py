"""Deterministic synthetic corpus generator for demos and end-to-end tests."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .ingest import SECONDS_PER_DAY

DEFAULT_ORIGIN = 1262304000  # 2010-01-01 00:00:00 UTC

_GENRES = ("thriller", "comedy", "documentary", "romance", "adventure")
_TONES = ("quiet", "steady", "modest", "familiar", "gentle", "plain")
_THEMES = ("festival", "holiday", "award", "viral", "seasonal")


@dataclass(frozen=True)
class DemoCorpus:
    interactions_path: Path
    metadata_path: Path
    planted_items: tuple[str, ...]
    n_windows: int
    origin: int


def write_demo_corpus(
    out_dir: str | Path,
    n_items: int = 50,
    n_windows: int = 12,
    n_planted: int = 5,
    n_users: int = 50,
    window_days: int = 30,
    origin: int = DEFAULT_ORIGIN,
) -> DemoCorpus:
    """Write interactions.jsonl and metadata.jsonl for a corpus with planted hits.

    The planted items' per-window distinct-user counts grow linearly and
    strictly dominate every other item in the final window; every user
    interacts with at least one planted item there, so an oracle that ranks
    the planted items first scores HR@n_planted = 1. A handful of items first
    appear in the final window (cold starts).
    """
    if n_planted >= n_items:
        raise ValueError("n_planted must be smaller than n_items")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    window_seconds = window_days * SECONDS_PER_DAY
    users = [f"u{idx:03d}" for idx in range(n_users)]

    planted = [f"hot_{idx:02d}" for idx in range(n_planted)]
    n_cold = min(3, n_items - n_planted - 1)
    n_background = n_items - n_planted - n_cold
    background = [f"item_{idx:02d}" for idx in range(n_planted, n_planted + n_background)]
    cold = [f"new_{idx:02d}" for idx in range(n_planted + n_background, n_items)]

    events: list[tuple[str, str, int]] = []

    def add_window_events(item_id: str, window: int, count: int, offset: int) -> None:
        start = origin + (window - 1) * window_seconds
        for j in range(count):
            user = users[(offset + j) % n_users]
            events.append((user, item_id, start + (j * 3571) % window_seconds))

    # Planted: linear growth, capped below the user count so counts stay exact
    # under distinct-user aggregation.
    for idx, item_id in enumerate(planted):
        for window in range(1, n_windows + 1):
            count = min(n_users, 4 + 3 * window)
            add_window_events(item_id, window, count, offset=idx * 11)

    # Background: small flat counts, staggered release windows.
    for idx, item_id in enumerate(background):
        first = 1 + (idx * 7) % max(1, n_windows - 2)
        for window in range(first, n_windows + 1):
            count = 1 + (idx + window) % 3
            add_window_events(item_id, window, count, offset=idx * 13 + window * 5)

    # Cold starts: first (and only) interactions in the final window.
    for idx, item_id in enumerate(cold):
        add_window_events(item_id, n_windows, 2, offset=idx * 17)

    interactions_path = out_dir / "interactions.jsonl"
    with open(interactions_path, "w", encoding="utf-8") as fh:
        for user_id, item_id, ts in events:
            fh.write(
                json.dumps(
                    {"user_id": user_id, "item_id": item_id, "timestamp": ts},
                    sort_keys=True,
                )
                + "\n"
            )

    metadata_path = out_dir / "metadata.jsonl"
    with open(metadata_path, "w", encoding="utf-8") as fh:
        for idx, item_id in enumerate(planted):
            genre = _GENRES[idx % len(_GENRES)]
            text = (
                f"Surging {genre} release number {idx} with rocket momentum "
                "and a devoted following"
            )
            fh.write(_meta_row(item_id, text, genre) + "\n")
        for idx, item_id in enumerate(background):
            genre = _GENRES[idx % len(_GENRES)]
            tone = _TONES[idx % len(_TONES)]
            text = f"A {tone} {genre} title number {idx} holding a steady niche audience"
            fh.write(_meta_row(item_id, text, genre) + "\n")
        for idx, item_id in enumerate(cold):
            theme = _THEMES[idx % len(_THEMES)]
            text = f"Fresh arrival number {idx} debuting with {theme} buzz this month"
            fh.write(_meta_row(item_id, text, theme) + "\n")

    return DemoCorpus(
        interactions_path=interactions_path,
        metadata_path=metadata_path,
        planted_items=tuple(planted),
        n_windows=n_windows,
        origin=origin,
    )


def _meta_row(item_id: str, text: str, category: str) -> str:
    return json.dumps(
        {"item_id": item_id, "description_text": text, "attributes": {"category": category}},
        sort_keys=True,
    )
