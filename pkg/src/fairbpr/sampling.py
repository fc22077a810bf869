"""Training-triplet samplers for pairwise ranking.

Two strategies over the train split of a :class:`~fairbpr.data.DatasetSplit`:

* bootstrap sampling with replacement: user uniform, positive uniform over the
  user's train items, negative uniform over all train items with rejection of
  items the user interacted with;
* group-weighted (cost-sensitive) sampling: one slot of the triplet (negative
  or positive) is drawn with per-item weights derived from a cost ``C >= 1``
  assigned to an emphasized provider group, shifting how often that group's
  items land in the chosen slot.

Both are driven by a seeded numpy ``Generator`` (PCG64), so a fixed seed
reproduces the exact triplet stream on any platform. Item and user universes
are canonicalized by sorting identifiers, which keeps the stream invariant
under permutations of the input rows.
"""

from __future__ import annotations

import enum
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .data import UNKNOWN_GROUP, Catalog

# Attempts per draw before giving up on a pathological user/candidate set.
RETRY_CAP = 10_000


class SamplingError(RuntimeError):
    """Rejection sampling exceeded the retry cap."""


class TargetSlot(enum.Enum):
    """Which triplet slot the group weights apply to."""

    NEGATIVE = "negative"
    POSITIVE = "positive"
    NONE = "none"


@dataclass(frozen=True)
class Triplet:
    """One pairwise training sample: ``positive`` is an item the user
    interacted with in train, ``negative`` is one they did not."""

    user: str
    positive: str
    negative: str


@dataclass
class SamplerConfig:
    cost: float = 1.0
    target_slot: TargetSlot = TargetSlot.NONE
    emphasized_group: str | None = None
    seed: int = 0
    triplets_per_epoch: int | None = None  # None resolves to len(train)
    user_draw: str = "uniform"  # or "interactions": users weighted by activity

    def __post_init__(self):
        if isinstance(self.target_slot, str):
            self.target_slot = TargetSlot(self.target_slot.lower())
        if self.cost < 1:
            raise ValueError(f"cost must be >= 1, got {self.cost}")
        if self.triplets_per_epoch is not None and self.triplets_per_epoch < 0:
            raise ValueError("triplets_per_epoch must be >= 0")
        if self.user_draw not in ("uniform", "interactions"):
            raise ValueError(f"unknown user_draw {self.user_draw!r}")
        if self.target_slot is not TargetSlot.NONE and self.emphasized_group is None:
            raise ValueError("emphasized_group required when a target slot is set")


@dataclass
class ItemWeights:
    """Positive per-item sampling weights; items of a group share one value."""

    weights: dict
    # alignments against train indexes, matched by object identity (a strong
    # reference to the index pins it, so ids cannot be recycled under us)
    _alignments: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.weights:
            raise ValueError("empty item set")
        if any(w <= 0 for w in self.weights.values()):
            raise ValueError("all weights must be > 0")


def group_probability_vector(cost):
    """Percentage pair ``((C*100)/(C+1), 100/(C+1))`` for emphasized vs other.

    The two components sum to 100; ``C=1`` gives (50, 50).
    """
    if cost < 1:
        raise ValueError(f"cost must be >= 1, got {cost}")
    return (cost * 100.0) / (cost + 1.0), 100.0 / (cost + 1.0)


def build_item_weights(items, catalog: Catalog, config: SamplerConfig) -> ItemWeights:
    """Assign each item its group's sampling weight.

    With exactly two group labels among ``items`` the weights are the
    percentage pair from :func:`group_probability_vector`; with any other
    number of labels the emphasized group gets weight ``C`` and every other
    group weight 1 (the same ratio). Unlabeled items count as a non-emphasized
    ``UNKNOWN`` group.
    """
    if not items:
        raise ValueError("empty item set")
    labels = {catalog.group_of(i) for i in items}
    if len(labels) == 2:
        w_emph, w_other = group_probability_vector(config.cost)
    else:
        w_emph, w_other = float(config.cost), 1.0
    emphasized = config.emphasized_group
    return ItemWeights(
        weights={
            i: (w_emph if catalog.group_of(i) == emphasized else w_other) for i in items
        }
    )


class _TrainIndex:
    """Integer-indexed view of the train interactions.

    Users and items are the sorted distinct identifiers; per-user item sets
    are stored both as sorted row arrays (for vectorized lookups) and Python
    sets (for scalar rejection tests). ``member_keys`` holds
    ``user_row * n_items + item_row`` sorted ascending, giving a single
    searchsorted membership probe for (user, item) pairs.
    """

    def __init__(self, train):
        if not train:
            raise ValueError("train split is empty")
        self.users = sorted({x.user for x in train})
        self.items = sorted({x.item for x in train})
        self.n_users = len(self.users)
        self.n_items = len(self.items)
        self.user_row = {u: r for r, u in enumerate(self.users)}
        self.item_row = {i: r for r, i in enumerate(self.items)}

        sets = [set() for _ in range(self.n_users)]
        inter_counts = np.zeros(self.n_users, dtype=np.int64)
        for x in train:
            sets[self.user_row[x.user]].add(self.item_row[x.item])
            inter_counts[self.user_row[x.user]] += 1
        self.user_sets = sets
        self.user_items = [np.fromiter(sorted(s), dtype=np.int64, count=len(s)) for s in sets]
        self.degrees = np.fromiter((len(s) for s in sets), dtype=np.int64, count=self.n_users)
        self.offsets = np.concatenate(([0], np.cumsum(self.degrees)))
        self.flat_items = (
            np.concatenate(self.user_items) if self.user_items else np.empty(0, np.int64)
        )
        self.member_keys = (
            np.repeat(np.arange(self.n_users, dtype=np.int64), self.degrees) * self.n_items
            + self.flat_items
        )
        self.cum_interactions = np.cumsum(inter_counts)

    def group_codes(self, catalog):
        """(codes array aligned to items, label list) for fast composition counts."""
        labels = sorted({(catalog.group_of(i) if catalog else UNKNOWN_GROUP) for i in self.items})
        code = {g: k for k, g in enumerate(labels)}
        codes = np.fromiter(
            (code[catalog.group_of(i)] if catalog else 0 for i in self.items),
            dtype=np.int64,
            count=self.n_items,
        )
        return codes, labels


class _AlignedWeights:
    """Item weights aligned to a train index, with cumulative sums for
    inverse-CDF draws (global and per user)."""

    def __init__(self, index: _TrainIndex, weights: ItemWeights):
        try:
            self.w = np.fromiter(
                (weights.weights[i] for i in index.items),
                dtype=np.float64,
                count=index.n_items,
            )
        except KeyError as e:
            raise ValueError(f"weights missing train item {e.args[0]!r}") from None
        self.cum = np.cumsum(self.w)
        self.total = float(self.cum[-1])
        self.cum_list = self.cum.tolist()  # bisect on a list is faster than np scalar calls
        # per-user cumulative weights over flat_items; base/total per user
        self.flat_cum = np.cumsum(self.w[index.flat_items])
        base = np.concatenate(([0.0], self.flat_cum))[index.offsets[:-1]]
        self.user_base = base
        self.user_total = self.flat_cum[index.offsets[1:] - 1] - base


def _aligned(index, weights: ItemWeights) -> "_AlignedWeights":
    for idx_obj, alignment in weights._alignments:
        if idx_obj is index:
            return alignment
    alignment = _AlignedWeights(index, weights)
    weights._alignments.append((index, alignment))
    return alignment


def _draw_weighted_row(cum_list, total, rng):
    r = rng.random() * total
    row = bisect_right(cum_list, r)
    return min(row, len(cum_list) - 1)


def _scalar_user(index, rng, user_draw):
    for _ in range(RETRY_CAP):
        if user_draw == "interactions":
            total = index.cum_interactions[-1]
            u = int(np.searchsorted(index.cum_interactions, rng.random() * total, side="right"))
            u = min(u, index.n_users - 1)
        else:
            u = int(rng.integers(index.n_users))
        if index.degrees[u] < index.n_items:
            return u
    raise SamplingError("no user with a non-empty negative candidate set found")


def _scalar_negative(index, u, rng, aligned):
    owned = index.user_sets[u]
    for _ in range(RETRY_CAP):
        if aligned is None:
            j = int(rng.integers(index.n_items))
        else:
            j = _draw_weighted_row(aligned.cum_list, aligned.total, rng)
        if j not in owned:
            return j
    raise SamplingError(f"negative rejection exceeded {RETRY_CAP} attempts for user row {u}")


def sample_triplet_uniform(split, rng, user_draw="uniform") -> Triplet:
    """Draw one triplet by bootstrap sampling with replacement.

    User uniform over users with train interactions, positive uniform over the
    user's train items, negative uniform over all train items and re-drawn
    until it is not one of the user's items.
    """
    index = split.train_index()
    u = _scalar_user(index, rng, user_draw)
    arr = index.user_items[u]
    i = int(arr[rng.integers(len(arr))])
    j = _scalar_negative(index, u, rng, None)
    return Triplet(index.users[u], index.items[i], index.items[j])


def sample_triplet_cost_sensitive(split, weights: ItemWeights, config: SamplerConfig, rng) -> Triplet:
    """Draw one triplet with group weights applied to the configured slot.

    NEGATIVE: negative drawn proportionally to item weight over all train
    items (with the usual rejection); user and positive as in the uniform
    sampler. POSITIVE: positive drawn proportionally to weight within the
    user's train items; negative uniform. NONE: identical to the uniform
    sampler.
    """
    slot = config.target_slot
    if slot is TargetSlot.NONE:
        return sample_triplet_uniform(split, rng, config.user_draw)
    index = split.train_index()
    aligned = _aligned(index, weights)
    u = _scalar_user(index, rng, config.user_draw)
    if slot is TargetSlot.POSITIVE:
        lo, hi = index.offsets[u], index.offsets[u + 1]
        target = aligned.user_base[u] + rng.random() * aligned.user_total[u]
        p = int(np.searchsorted(aligned.flat_cum, target, side="right"))
        i = int(index.flat_items[min(max(p, lo), hi - 1)])
        j = _scalar_negative(index, u, rng, None)
    else:
        arr = index.user_items[u]
        i = int(arr[rng.integers(len(arr))])
        j = _scalar_negative(index, u, rng, aligned)
    return Triplet(index.users[u], index.items[i], index.items[j])


def _batch_users(index, rng, n, user_draw):
    if user_draw == "interactions":
        total = index.cum_interactions[-1]
        u = np.searchsorted(index.cum_interactions, rng.random(n) * total, side="right")
        u = np.minimum(u, index.n_users - 1).astype(np.int64)
    else:
        u = rng.integers(0, index.n_users, size=n, dtype=np.int64)
    bad = index.degrees[u] == index.n_items
    rounds = 0
    while bad.any():
        rounds += 1
        if rounds > RETRY_CAP:
            raise SamplingError("no user with a non-empty negative candidate set found")
        m = int(bad.sum())
        if user_draw == "interactions":
            redo = np.searchsorted(index.cum_interactions, rng.random(m) * total, side="right")
            redo = np.minimum(redo, index.n_users - 1).astype(np.int64)
        else:
            redo = rng.integers(0, index.n_users, size=m, dtype=np.int64)
        u[bad] = redo
        bad = index.degrees[u] == index.n_items
    return u


def _batch_positives(index, rng, u, aligned):
    if aligned is None:
        k = (rng.random(len(u)) * index.degrees[u]).astype(np.int64)
        k = np.minimum(k, index.degrees[u] - 1)  # guard the 1-ulp rounding edge
        return index.flat_items[index.offsets[u] + k]
    target = aligned.user_base[u] + rng.random(len(u)) * aligned.user_total[u]
    p = np.searchsorted(aligned.flat_cum, target, side="right")
    lo = index.offsets[u]
    hi = index.offsets[u + 1] - 1
    return index.flat_items[np.clip(p, lo, hi)]


def _batch_negatives(index, rng, u, aligned):
    n = len(u)
    j = np.empty(n, dtype=np.int64)
    pending = np.arange(n)
    rounds = 0
    size = index.member_keys.size
    while pending.size:
        rounds += 1
        if rounds > RETRY_CAP:
            raise SamplingError(f"negative rejection exceeded {RETRY_CAP} attempts")
        m = pending.size
        if aligned is None:
            cand = rng.integers(0, index.n_items, size=m, dtype=np.int64)
        else:
            pos = np.searchsorted(aligned.cum, rng.random(m) * aligned.total, side="right")
            cand = np.minimum(pos, index.n_items - 1).astype(np.int64)
        keys = u[pending] * index.n_items + cand
        loc = np.searchsorted(index.member_keys, keys)
        loc_safe = np.minimum(loc, size - 1)
        owned = (loc < size) & (index.member_keys[loc_safe] == keys)
        j[pending] = cand
        pending = pending[owned]
    return j


def sample_triplet_arrays(split, config: SamplerConfig, catalog: Catalog | None = None,
                          n: int | None = None, rng=None):
    """Vectorized triplet stream as integer row arrays.

    Returns ``(user_rows, pos_rows, neg_rows, index)``; rows refer to
    ``index.users`` / ``index.items``. This is the engine behind
    :func:`generate_epoch_triplets` and model training; identical seeds give
    identical arrays.
    """
    index = split.train_index()
    if n is None:
        n = config.triplets_per_epoch if config.triplets_per_epoch is not None else len(split.train)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if n == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty, index

    slot = config.target_slot
    aligned = None
    if slot is not TargetSlot.NONE:
        if catalog is None:
            raise ValueError("catalog required for group-weighted sampling")
        weights = build_item_weights(set(index.items), catalog, config)
        aligned = _aligned(index, weights)

    u = _batch_users(index, rng, n, config.user_draw)
    i = _batch_positives(index, rng, u, aligned if slot is TargetSlot.POSITIVE else None)
    j = _batch_negatives(index, rng, u, aligned if slot is TargetSlot.NEGATIVE else None)
    return u, i, j, index


def generate_epoch_triplets(split, config: SamplerConfig, catalog: Catalog | None = None,
                            rng=None) -> list:
    """Generate ``N`` i.i.d. triplets with the configured sampler.

    ``N`` is ``config.triplets_per_epoch``, defaulting to the number of train
    interactions. Deterministic for a fixed seed and input data.
    """
    u, i, j, index = sample_triplet_arrays(split, config, catalog, rng=rng)
    users, items = index.users, index.items
    return [Triplet(users[a], items[b], items[c]) for a, b, c in zip(u, i, j)]


def triplet_composition_audit(triplets, catalog: Catalog | None) -> dict:
    """Per-group share of the positive and negative slots of a triplet list."""
    pos_counts = Counter(
        (catalog.group_of(t.positive) if catalog else UNKNOWN_GROUP) for t in triplets
    )
    neg_counts = Counter(
        (catalog.group_of(t.negative) if catalog else UNKNOWN_GROUP) for t in triplets
    )
    return _composition_record(len(triplets), pos_counts, neg_counts)


def sample_and_audit(split, config: SamplerConfig, catalog: Catalog | None,
                     n: int, rng=None, dump_path=None, sep="\t") -> dict:
    """Sample ``n`` triplets and return their composition record without
    materializing triplet objects; optionally dump rows ``user sep pos sep neg``."""
    u, i, j, index = sample_triplet_arrays(split, config, catalog, n=n, rng=rng)
    codes, labels = index.group_codes(catalog)
    pos = dict(zip(labels, np.bincount(codes[i], minlength=len(labels)).tolist())) if n else {}
    neg = dict(zip(labels, np.bincount(codes[j], minlength=len(labels)).tolist())) if n else {}
    if dump_path is not None:
        users, items = index.users, index.items
        with open(dump_path, "w", encoding="utf-8") as fh:
            for a, b, c in zip(u, i, j):
                fh.write(f"{users[a]}{sep}{items[b]}{sep}{items[c]}\n")
    pos = {g: c for g, c in pos.items() if c}
    neg = {g: c for g, c in neg.items() if c}
    return _composition_record(int(n), Counter(pos), Counter(neg))


def _composition_record(n, pos_counts, neg_counts):
    def share(counts):
        return {g: c / n for g, c in sorted(counts.items())} if n else {}

    return {
        "n_triplets": n,
        "positive_counts": dict(sorted(pos_counts.items())),
        "negative_counts": dict(sorted(neg_counts.items())),
        "positive_share": share(pos_counts),
        "negative_share": share(neg_counts),
    }
