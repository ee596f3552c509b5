"""Shared fixture builders for the test suite."""

from __future__ import annotations

import numpy as np

from trendrank.ingest import ItemMetadata, Sample

WORDS = (
    "thriller", "comedy", "sequel", "remake", "indie", "festival", "classic",
    "animated", "noir", "romance", "documentary", "cult", "blockbuster",
    "gritty", "upbeat", "slow", "verbose", "sparse", "niche", "viral",
)


def make_sample(
    sample_id: str,
    history: list[int],
    text: str = "some plain description text",
    item_id: str | None = None,
    first_window: int = 1,
    target_window: int | None = None,
    label: int | None = None,
) -> Sample:
    item = item_id or sample_id.split("@")[0]
    target = target_window if target_window is not None else first_window + len(history)
    return Sample(
        sample_id=sample_id,
        item_id=item,
        target_window=target,
        history=list(history),
        first_window=first_window,
        metadata=ItemMetadata(item_id=item, description_text=text),
        label=label,
    )


def random_sample(rng: np.random.Generator, idx: int) -> Sample:
    hist_len = int(rng.integers(0, 7))
    history = [int(v) for v in rng.integers(0, 6, size=hist_len)]
    n_words = int(rng.integers(0, 6))
    text = " ".join(rng.choice(WORDS, size=n_words)) if n_words else ""
    label = int(rng.integers(0, 9)) if rng.random() < 0.8 else None
    first = int(rng.integers(1, 4))
    return make_sample(
        sample_id=f"it{idx:03d}@{first + hist_len}",
        history=history,
        text=text,
        item_id=f"it{idx:03d}",
        first_window=first,
        label=label,
    )


def random_pool(rng: np.random.Generator, size: int) -> list[Sample]:
    return [random_sample(rng, i) for i in range(size)]


def separable_fixture(noise: float = 0.5, seed: int = 42):
    """Four triplets over two well-separated raw-embedding clusters."""
    from trendrank.mining import Triplet

    rng = np.random.default_rng(seed)
    d_in = 8
    first = np.zeros(d_in)
    first[0] = 1.0
    second = np.zeros(d_in)
    second[1] = 1.0
    embeddings = {}
    for i in range(4):
        embeddings[f"a{i}"] = first + noise * rng.normal(size=d_in)
        embeddings[f"b{i}"] = second + noise * rng.normal(size=d_in)
    triplets = [
        Triplet("a0", ("a1", "a2"), ("b0", "b1", "b2")),
        Triplet("a3", ("a1", "a0"), ("b3", "b2")),
        Triplet("b0", ("b1", "b3"), ("a0", "a2")),
        Triplet("b2", ("b3", "b0"), ("a1", "a3", "a0")),
    ]
    return embeddings, triplets
