"""Ranking utility and provider-group exposure metrics.

NDCG uses binary relevance with a base-2 logarithmic decay. Group exposure
comes in two flavors: plain slot share (fraction of top-k positions holding a
group's items) and position-weighted exposure, where the slot at rank r
carries weight ``1/log2(r+1)`` before normalizing. Items without a catalog
label accrue to the ``UNKNOWN`` group.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .data import Catalog, DatasetSplit
from .model import FactorModel, recommend_top_k


@dataclass
class RankedList:
    """One user's recommendations, best first, truncated to ``k``."""

    user: str
    items: list
    k: int

    def __post_init__(self):
        if len(self.items) > self.k:
            raise ValueError(f"list longer than k={self.k}")
        if len(set(self.items)) != len(self.items):
            raise ValueError("duplicate items in ranked list")


@dataclass
class MetricsReport:
    ndcg: dict
    slot_share: dict
    weighted_exposure: dict
    triplet_audit: dict | None
    params: dict = field(default_factory=dict)
    n_ndcg_users: int = 0

    def to_dict(self):
        return {
            "ndcg": {str(k): v for k, v in self.ndcg.items()},
            "slot_share": {str(k): v for k, v in self.slot_share.items()},
            "weighted_exposure": {str(k): v for k, v in self.weighted_exposure.items()},
            "triplet_audit": self.triplet_audit,
            "config": self.params,
            "n_ndcg_users": self.n_ndcg_users,
        }


def _discount(rank):
    # rank is 1-based
    return 1.0 / math.log2(rank + 1)


def ndcg_at_k(ranked, relevant, k) -> float:
    """NDCG@k with binary relevance.

    ``DCG = sum rel(item_r) / log2(r+1)`` over the first k ranks; the ideal
    DCG places ``min(k, |relevant|)`` relevant items at the top. Raises
    ``ValueError`` for an empty relevant set (undefined; callers exclude such
    users).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = set(relevant)
    if not relevant:
        raise ValueError("NDCG undefined for an empty relevant set")
    items = ranked.items if isinstance(ranked, RankedList) else list(ranked)
    dcg = sum(_discount(r) for r, it in enumerate(items[:k], start=1) if it in relevant)
    idcg = sum(_discount(r) for r in range(1, min(k, len(relevant)) + 1))
    return dcg / idcg


def _group_fractions(lists, catalog, k, weight_fn):
    totals = defaultdict(float)
    grand = 0.0
    for rl in lists:
        for r, item in enumerate(rl.items[:k], start=1):
            w = weight_fn(r)
            totals[catalog.group_of(item)] += w
            grand += w
    if grand == 0.0:
        return {}
    return {g: v / grand for g, v in sorted(totals.items())}


def group_slot_share(lists, catalog: Catalog, k) -> dict:
    """Fraction of all occupied top-k slots holding each group's items."""
    return _group_fractions(lists, catalog, k, lambda r: 1.0)


def group_weighted_exposure(lists, catalog: Catalog, k) -> dict:
    """Like slot share, but a slot at rank r counts ``1/log2(r+1)``."""
    return _group_fractions(lists, catalog, k, _discount)


def build_ranked_lists(model: FactorModel, split: DatasetSplit, k) -> list:
    """Top-k lists for every model user, excluding their train items."""
    index = split.train_index()
    lists = []
    for user in model.user_ids:
        row = index.user_row.get(user)
        exclude = [index.items[p] for p in index.user_sets[row]] if row is not None else ()
        items = recommend_top_k(model, user, k, exclude=exclude)
        lists.append(RankedList(user=user, items=items, k=k))
    return lists


def fairness_report(model: FactorModel, split: DatasetSplit, catalog: Catalog,
                    ks=(10, 20), triplet_audit=None, params=None) -> MetricsReport:
    """Assemble NDCG and group-exposure metrics at each cutoff.

    NDCG averages over users with at least one test interaction on an item the
    model knows; exposure aggregates over every user's list (users without
    test feedback still allocate attention). Raises ``ValueError`` when no
    user is NDCG-eligible.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValueError("cutoffs must be positive")
    k_max = ks[-1]
    lists = build_ranked_lists(model, split, k_max)

    relevant = defaultdict(set)
    for x in split.test:
        if x.item in model.item_index:
            relevant[x.user].add(x.item)
    eligible = [rl for rl in lists if relevant.get(rl.user)]
    if not eligible:
        raise ValueError("no user has test interactions on items known to the model")

    ndcg = {}
    for k in ks:
        vals = [ndcg_at_k(rl, relevant[rl.user], k) for rl in eligible]
        ndcg[k] = sum(vals) / len(vals)
    slot = {k: group_slot_share(lists, catalog, k) for k in ks}
    weighted = {k: group_weighted_exposure(lists, catalog, k) for k in ks}
    return MetricsReport(
        ndcg=ndcg,
        slot_share=slot,
        weighted_exposure=weighted,
        triplet_audit=triplet_audit,
        params=dict(params or {}),
        n_ndcg_users=len(eligible),
    )
