"""Interaction-log ingestion, 30-day windowing, and leakage-free temporal splits."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class InteractionRecord:
    """One (user, item, timestamp) event; the atom every count is built from."""

    user_id: str
    item_id: str
    timestamp: int


@dataclass(frozen=True)
class ItemMetadata:
    item_id: str
    description_text: str = ""
    attributes: dict[str, str] | None = None


@dataclass(frozen=True)
class WindowConfig:
    """Global timeline bucketing: window 1 starts at `origin` and spans `window_days`."""

    window_days: int = 30
    origin: int = 0

    def __post_init__(self):
        if self.window_days < 1:
            raise ValueError(f"window_days must be >= 1, got {self.window_days}")

    @property
    def window_seconds(self) -> int:
        return self.window_days * SECONDS_PER_DAY


@dataclass
class PopularitySeries:
    """Per-item counts, dense from the item's first observed window onward.

    counts[k] is the popularity in window first_window + k; gaps between
    observed windows are explicit zeros so downstream trend comparison sees
    uniformly sampled sequences.
    """

    item_id: str
    first_window: int
    counts: list[int]

    def value_at(self, window: int) -> int:
        idx = window - self.first_window
        if 0 <= idx < len(self.counts):
            return self.counts[idx]
        return 0

    @property
    def last_window(self) -> int:
        return self.first_window + len(self.counts) - 1


@dataclass
class Sample:
    """One (item, target window) prediction unit with history strictly before T."""

    sample_id: str
    item_id: str
    target_window: int
    history: list[int]
    first_window: int
    metadata: ItemMetadata
    label: int | None = None


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint ascending window ranges (inclusive) for train/val/test."""

    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]

    def __post_init__(self):
        for name, (lo, hi) in self.as_dict().items():
            if lo < 1 or hi < lo:
                raise ValueError(f"{name} range ({lo}, {hi}) is not a valid ascending window range")
        if self.train[1] + 1 != self.val[0] or self.val[1] + 1 != self.test[0]:
            raise ValueError(
                "split ranges must be contiguous and ordered train < val < test, got "
                f"train={self.train} val={self.val} test={self.test}"
            )

    def as_dict(self) -> dict[str, tuple[int, int]]:
        return {"train": self.train, "val": self.val, "test": self.test}


def parse_interactions(
    path: str | Path, fmt: str | None = None, strict: bool = False
) -> tuple[list[InteractionRecord], int]:
    """Read an interaction log and return (records, malformed_line_count).

    Malformed lines are skipped and counted; with strict=True any malformed
    line aborts the parse instead.
    """
    path = Path(path)
    fmt = fmt or _infer_format(path)
    if fmt == "jsonl":
        records, malformed = _parse_interactions_jsonl(path)
    elif fmt == "csv":
        records, malformed = _parse_interactions_csv(path)
    else:
        raise ValueError(f"unsupported interaction format {fmt!r} (expected jsonl or csv)")
    if malformed:
        if strict:
            raise ValueError(f"{malformed} malformed line(s) in {path} (strict mode)")
        logger.warning("skipped %d malformed line(s) in %s", malformed, path)
    return records, malformed


def _infer_format(path: Path) -> str:
    return "csv" if path.suffix.lower() == ".csv" else "jsonl"


def _record_from_fields(user_id, item_id, timestamp) -> InteractionRecord | None:
    if not isinstance(user_id, str) or not user_id:
        return None
    if not isinstance(item_id, str) or not item_id:
        return None
    if isinstance(timestamp, bool) or not isinstance(timestamp, int) or timestamp < 0:
        return None
    return InteractionRecord(user_id, item_id, timestamp)


def _parse_interactions_jsonl(path: Path) -> tuple[list[InteractionRecord], int]:
    records: list[InteractionRecord] = []
    malformed = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rec = _record_from_fields(
                    obj.get("user_id"), obj.get("item_id"), obj.get("timestamp")
                )
            except (json.JSONDecodeError, AttributeError):
                rec = None
            if rec is None:
                malformed += 1
            else:
                records.append(rec)
    return records, malformed


def _parse_interactions_csv(path: Path) -> tuple[list[InteractionRecord], int]:
    records: list[InteractionRecord] = []
    malformed = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"user_id", "item_id", "timestamp"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path} is missing required columns {sorted(required)}")
        for row in reader:
            try:
                ts = int(row["timestamp"])
            except (TypeError, ValueError):
                ts = -1
            rec = _record_from_fields(row.get("user_id") or "", row.get("item_id") or "", ts)
            if rec is None:
                malformed += 1
            else:
                records.append(rec)
    return records, malformed


def parse_metadata(path: str | Path) -> tuple[dict[str, ItemMetadata], int]:
    """Read a metadata JSONL file into an item_id -> ItemMetadata map."""
    metadata: dict[str, ItemMetadata] = {}
    malformed = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                item_id = obj["item_id"]
                if not isinstance(item_id, str) or not item_id:
                    raise ValueError
                attrs = obj.get("attributes")
                if attrs is not None and not isinstance(attrs, dict):
                    raise ValueError
            except (json.JSONDecodeError, TypeError, KeyError, ValueError):
                malformed += 1
                continue
            metadata[item_id] = ItemMetadata(
                item_id=item_id,
                description_text=str(obj.get("description_text") or ""),
                attributes=attrs,
            )
    if malformed:
        logger.warning("skipped %d malformed metadata line(s) in %s", malformed, path)
    return metadata, malformed


def resolve_origin(records: list[InteractionRecord], origin: int | None = None) -> int:
    """Pick the start of window 1: given origin, or the corpus minimum truncated to midnight UTC."""
    if not records:
        raise ValueError("cannot resolve a window origin from an empty interaction log")
    min_ts = min(r.timestamp for r in records)
    if origin is None:
        return (min_ts // SECONDS_PER_DAY) * SECONDS_PER_DAY
    if origin > min_ts:
        raise ValueError(f"origin {origin} is after the earliest event timestamp {min_ts}")
    return origin


def window_index(timestamp: int, cfg: WindowConfig) -> int:
    """Map an epoch timestamp to its 1-based window on the global timeline."""
    if timestamp < cfg.origin:
        raise ValueError(f"timestamp {timestamp} precedes window origin {cfg.origin}")
    return (timestamp - cfg.origin) // cfg.window_seconds + 1


def dedup_window_events(
    records: list[InteractionRecord], cfg: WindowConfig
) -> list[tuple[str, str, int]]:
    """Distinct (user_id, item_id, window) triples, sorted for stable output."""
    seen = {(r.user_id, r.item_id, window_index(r.timestamp, cfg)) for r in records}
    return sorted(seen, key=lambda t: (t[2], t[1], t[0]))


def build_series(
    records: list[InteractionRecord], cfg: WindowConfig, count_mode: str = "distinct"
) -> dict[str, PopularitySeries]:
    """Aggregate events into per-item popularity series.

    count_mode "distinct" counts distinct users per (item, window);
    "events" counts raw interaction events.
    """
    if count_mode not in ("distinct", "events"):
        raise ValueError(f"count_mode must be 'distinct' or 'events', got {count_mode!r}")
    per_item: dict[str, dict[int, int]] = {}
    if count_mode == "distinct":
        for user_id, item_id, window in {
            (r.user_id, r.item_id, window_index(r.timestamp, cfg)) for r in records
        }:
            per_item.setdefault(item_id, {})
            per_item[item_id][window] = per_item[item_id].get(window, 0) + 1
    else:
        for r in records:
            window = window_index(r.timestamp, cfg)
            per_item.setdefault(r.item_id, {})
            per_item[r.item_id][window] = per_item[r.item_id].get(window, 0) + 1

    series: dict[str, PopularitySeries] = {}
    for item_id, by_window in per_item.items():
        first = min(by_window)
        last = max(by_window)
        counts = [by_window.get(w, 0) for w in range(first, last + 1)]
        series[item_id] = PopularitySeries(item_id=item_id, first_window=first, counts=counts)
    return series


def default_split(series: dict[str, PopularitySeries]) -> DatasetSplit:
    """Last observed window is test, the one before is validation, the rest train."""
    if not series:
        raise ValueError("cannot derive a split from an empty series map")
    last = max(s.last_window for s in series.values())
    if last < 3:
        raise ValueError(
            f"corpus spans only {last} window(s); at least 3 are needed for a default split"
        )
    return DatasetSplit(train=(1, last - 2), val=(last - 1, last - 1), test=(last, last))


def sample_id_for(item_id: str, target_window: int) -> str:
    return f"{item_id}@{target_window}"


def _history_before(series: PopularitySeries, target_window: int) -> list[int]:
    # Dense history across [first_window, target_window), zero-filled past the
    # last observed window so every position is an explicit popularity value.
    return [series.value_at(w) for w in range(series.first_window, target_window)]


def make_samples(
    series: dict[str, PopularitySeries],
    metadata: dict[str, ItemMetadata],
    split: DatasetSplit,
) -> tuple[list[Sample], list[Sample], list[Sample]]:
    """Emit per-split samples; items missing metadata get empty text plus a warning."""
    missing_meta = sorted(set(series) - set(metadata))
    if missing_meta:
        logger.warning(
            "%d item(s) have interactions but no metadata (e.g. %s); using empty descriptions",
            len(missing_meta),
            missing_meta[0],
        )
    out: list[list[Sample]] = [[], [], []]
    ranges = [split.train, split.val, split.test]
    items = sorted(series)
    for bucket, (lo, hi) in zip(out, ranges):
        for target in range(lo, hi + 1):
            for item_id in items:
                s = series[item_id]
                if s.first_window > target:
                    continue
                meta = metadata.get(item_id) or ItemMetadata(item_id=item_id)
                bucket.append(
                    Sample(
                        sample_id=sample_id_for(item_id, target),
                        item_id=item_id,
                        target_window=target,
                        history=_history_before(s, target),
                        first_window=s.first_window,
                        metadata=meta,
                        label=s.value_at(target),
                    )
                )
    return out[0], out[1], out[2]


# ---------------------------------------------------------------------------
# serialization

def sample_to_row(sample: Sample) -> dict:
    return {
        "sample_id": sample.sample_id,
        "item_id": sample.item_id,
        "target_window": sample.target_window,
        "history": list(sample.history),
        "first_window": sample.first_window,
        "description_text": sample.metadata.description_text,
        "label": sample.label,
    }


def sample_from_row(row: dict) -> Sample:
    return Sample(
        sample_id=row["sample_id"],
        item_id=row["item_id"],
        target_window=int(row["target_window"]),
        history=[int(v) for v in row["history"]],
        first_window=int(row["first_window"]),
        metadata=ItemMetadata(item_id=row["item_id"], description_text=row["description_text"]),
        label=None if row.get("label") is None else int(row["label"]),
    )


def write_jsonl(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_samples(samples: list[Sample], path: str | Path) -> None:
    write_jsonl([sample_to_row(s) for s in samples], path)


def read_samples(path: str | Path) -> list[Sample]:
    return [sample_from_row(row) for row in read_jsonl(path)]


def write_series(series: dict[str, PopularitySeries], path: str | Path) -> None:
    rows = [
        {"item_id": s.item_id, "first_window": s.first_window, "counts": s.counts}
        for s in sorted(series.values(), key=lambda s: s.item_id)
    ]
    write_jsonl(rows, path)


def read_series(path: str | Path) -> dict[str, PopularitySeries]:
    out = {}
    for row in read_jsonl(path):
        out[row["item_id"]] = PopularitySeries(
            item_id=row["item_id"],
            first_window=int(row["first_window"]),
            counts=[int(c) for c in row["counts"]],
        )
    return out


def write_metadata(metadata: dict[str, ItemMetadata], path: str | Path) -> None:
    rows = [
        {"item_id": m.item_id, "description_text": m.description_text, "attributes": m.attributes}
        for m in sorted(metadata.values(), key=lambda m: m.item_id)
    ]
    write_jsonl(rows, path)


def read_metadata(path: str | Path) -> dict[str, ItemMetadata]:
    out = {}
    for row in read_jsonl(path):
        out[row["item_id"]] = ItemMetadata(
            item_id=row["item_id"],
            description_text=row.get("description_text") or "",
            attributes=row.get("attributes"),
        )
    return out


def write_events(events: list[tuple[str, str, int]], path: str | Path) -> None:
    rows = [{"user_id": u, "item_id": i, "window": w} for (u, i, w) in events]
    write_jsonl(rows, path)


def read_events(path: str | Path) -> list[tuple[str, str, int]]:
    return [(r["user_id"], r["item_id"], int(r["window"])) for r in read_jsonl(path)]
