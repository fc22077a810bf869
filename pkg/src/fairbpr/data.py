"""Interaction and provider-group data: loading, filtering, temporal splitting.

Input files are delimiter-separated text. Interactions are one event per row
(`user<sep>item<sep>rating<sep>timestamp`); provider files map each item to
its provider and the provider's group label (`item<sep>provider<sep>group`).
Ratings are ingested but treated as implicit positive feedback downstream.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

UNKNOWN_GROUP = "UNKNOWN"


class ParseError(ValueError):
    """A row of an input file could not be parsed."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class GroupConflictError(ValueError):
    """An item is assigned to two different group labels."""


@dataclass(frozen=True)
class Interaction:
    """One (user, item, rating, timestamp) feedback event."""

    user: str
    item: str
    rating: float
    timestamp: int


@dataclass(frozen=True)
class GroupAssignment:
    item: str
    provider: str
    group: str


@dataclass
class Catalog:
    """Item universe with per-item group labels.

    ``group_share`` is computed over the labeled items only and sums to 1.
    Items absent from ``groups`` are reported under ``UNKNOWN`` by consumers.
    """

    items: set
    groups: dict
    group_share: dict

    def group_of(self, item):
        return self.groups.get(item, UNKNOWN_GROUP)

    @classmethod
    def from_groups(cls, groups: dict) -> "Catalog":
        counts = Counter(groups.values())
        total = sum(counts.values())
        share = {g: c / total for g, c in counts.items()} if total else {}
        return cls(items=set(groups), groups=dict(groups), group_share=share)


@dataclass
class DatasetSplit:
    """Disjoint train/validation/test partition of a filtered interaction log.

    Parts are ordered so that every train timestamp <= every validation
    timestamp <= every test timestamp, up to ties at the boundaries.
    Instances are treated as immutable once built; derived sampling indexes
    are cached on first use.
    """

    train: list
    validation: list
    test: list
    _train_index: object = field(default=None, repr=False, compare=False)

    def all_interactions(self):
        return self.train + self.validation + self.test

    def train_index(self):
        """Cached sampling/training view of the train part (see sampling)."""
        if self._train_index is None:
            from .sampling import _TrainIndex

            self._train_index = _TrainIndex(self.train)
        return self._train_index


def _split_row(raw, sep, path, line_no, n_fields):
    parts = raw.split(sep)
    if len(parts) != n_fields:
        raise ParseError(
            path, line_no, f"expected {n_fields} fields separated by {sep!r}, got {len(parts)}"
        )
    return parts


def load_interactions(path, sep="\t") -> list:
    """Read an interaction file, in file order, without deduplication.

    Each non-empty row must be `user<sep>item<sep>rating<sep>timestamp` with a
    real-valued rating and a non-negative integer timestamp. Raises
    :class:`ParseError` with the offending line number on malformed rows.
    """
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.rstrip("\r\n")
            if not raw:
                continue
            user, item, rating_s, ts_s = _split_row(raw, sep, path, line_no, 4)
            if not user or not item:
                raise ParseError(path, line_no, "empty user or item identifier")
            try:
                rating = float(rating_s)
            except ValueError:
                raise ParseError(path, line_no, f"non-numeric rating {rating_s!r}") from None
            try:
                ts = int(ts_s)
            except ValueError:
                raise ParseError(path, line_no, f"non-integer timestamp {ts_s!r}") from None
            if ts < 0:
                raise ParseError(path, line_no, f"negative timestamp {ts}")
            out.append(Interaction(user=user, item=item, rating=rating, timestamp=ts))
    return out


def load_provider_groups(path, sep="\t"):
    """Read an `item<sep>provider<sep>group` file.

    Returns ``(assignments, catalog)``. Rows repeating an item with the same
    group are deduplicated silently (first provider wins); a repeated item
    with a different group raises :class:`GroupConflictError`.
    """
    assignments = []
    groups = {}
    providers = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.rstrip("\r\n")
            if not raw:
                continue
            item, provider, group = _split_row(raw, sep, path, line_no, 3)
            if not item or not group:
                raise ParseError(path, line_no, "empty item or group identifier")
            if item in groups:
                if groups[item] != group:
                    raise GroupConflictError(
                        f"{path}:{line_no}: item {item!r} labeled both "
                        f"{groups[item]!r} and {group!r}"
                    )
                continue
            groups[item] = group
            providers[item] = provider
            assignments.append(GroupAssignment(item=item, provider=provider, group=group))
    return assignments, Catalog.from_groups(groups)


def filter_min_interactions(data, min_item=0, min_user=0) -> list:
    """Drop interactions of items/users below the given activity thresholds.

    Removal is iterated to a fixed point: dropping a sparse item can push a
    user below ``min_user`` and vice versa, so rounds repeat until the
    surviving interactions satisfy both thresholds simultaneously. Counts are
    over interaction rows (duplicates included), matching raw activity.
    """
    if min_item < 0 or min_user < 0:
        raise ValueError("thresholds must be non-negative")
    current = list(data)
    while True:
        item_counts = Counter(x.item for x in current)
        user_counts = Counter(x.user for x in current)
        kept = [
            x
            for x in current
            if item_counts[x.item] >= min_item and user_counts[x.user] >= min_user
        ]
        if len(kept) == len(current):
            return kept
        current = kept


def temporal_split(data, test_frac=0.2, val_frac=0.2) -> DatasetSplit:
    """Chronological split: most recent interactions become test, then validation.

    Interactions are stably sorted by timestamp (ties keep input order); the
    last ``ceil(n * test_frac)`` go to test, the preceding ``ceil(n * val_frac)``
    to validation, the remainder to train.
    """
    if test_frac < 0 or val_frac < 0 or test_frac + val_frac >= 1:
        raise ValueError("need 0 <= test_frac + val_frac < 1")
    ordered = sorted(data, key=lambda x: x.timestamp)
    n = len(ordered)
    n_test = _ceil_frac(n, test_frac)
    n_val = min(_ceil_frac(n, val_frac), n - n_test)
    cut_val = n - n_test - n_val
    return DatasetSplit(
        train=ordered[:cut_val],
        validation=ordered[cut_val : cut_val + n_val],
        test=ordered[cut_val + n_val :],
    )


def _ceil_frac(n, frac):
    return min(n, math.ceil(n * frac))


def catalog_stats(split: DatasetSplit, catalog: Catalog) -> dict:
    """Dataset summary: sizes, item-group shares, and train-interaction shares.

    Items appearing in the interactions but missing from the catalog are
    counted under ``UNKNOWN`` and reported via ``n_unlabeled_items``.
    """
    everything = split.all_interactions()
    users = {x.user for x in everything}
    items = {x.item for x in everything}

    item_groups = Counter(catalog.group_of(i) for i in items)
    n_items = len(items)
    item_share = {g: c / n_items for g, c in item_groups.items()} if n_items else {}

    train_groups = Counter(catalog.group_of(x.item) for x in split.train)
    n_train = len(split.train)
    train_share = {g: c / n_train for g, c in train_groups.items()} if n_train else {}

    return {
        "n_users": len(users),
        "n_items": n_items,
        "n_unlabeled_items": item_groups.get(UNKNOWN_GROUP, 0),
        "n_interactions": {
            "total": len(everything),
            "train": n_train,
            "validation": len(split.validation),
            "test": len(split.test),
        },
        "catalog_group_share": dict(catalog.group_share),
        "item_group_share": item_share,
        "train_interaction_group_share": train_share,
    }


def write_interactions(path, data, sep="\t"):
    """Inverse of :func:`load_interactions`; used to persist split parts."""
    with open(path, "w", encoding="utf-8") as fh:
        for x in data:
            rating = int(x.rating) if float(x.rating).is_integer() else x.rating
            fh.write(f"{x.user}{sep}{x.item}{sep}{rating}{sep}{x.timestamp}\n")
