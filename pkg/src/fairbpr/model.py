"""Pairwise matrix factorization trained with SGD over triplet streams.

The model is plain dot-product MF (no bias terms): a user factor matrix and
an item factor matrix of shared dimensionality, initialized i.i.d. uniform on
[0, 1). Each training step takes one (user, positive, negative) triplet and
ascends ``ln sigmoid(score(u,i) - score(u,j))`` with optional L2 shrinkage.

The epoch loop runs through a numba-compiled kernel when numba is available
(pure-python fallback otherwise); both apply steps in stream order, so a
fixed seed yields an identical model. Everything is float64.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .data import Catalog, DatasetSplit
from .sampling import SamplerConfig, Triplet, sample_triplet_arrays

logger = logging.getLogger(__name__)

try:
    from numba import njit

    _HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


class TrainingError(RuntimeError):
    """Non-finite values encountered while training."""


class CheckpointError(RuntimeError):
    """Checkpoint file is missing fields, truncated, or not a checkpoint."""


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.001
    l2_reg: float = 0.0
    dim: int = 10
    seed: int = 0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.l2_reg < 0:
            raise ValueError("l2_reg must be >= 0")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


@dataclass
class FactorModel:
    """User and item latent factors plus identifier-to-row maps."""

    user_factors: np.ndarray
    item_factors: np.ndarray
    dim: int
    user_ids: list
    item_ids: list
    user_index: dict = field(init=False, repr=False)
    item_index: dict = field(init=False, repr=False)
    _item_id_rank: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.user_factors.shape != (len(self.user_ids), self.dim):
            raise ValueError("user_factors shape does not match ids/dim")
        if self.item_factors.shape != (len(self.item_ids), self.dim):
            raise ValueError("item_factors shape does not match ids/dim")
        self.user_index = {u: r for r, u in enumerate(self.user_ids)}
        self.item_index = {i: r for r, i in enumerate(self.item_ids)}

    def item_id_rank(self):
        """rank[row] = position of the row's id in ascending id order."""
        if self._item_id_rank is None:
            order = sorted(range(len(self.item_ids)), key=lambda r: self.item_ids[r])
            rank = np.empty(len(order), dtype=np.int64)
            rank[order] = np.arange(len(order))
            self._item_id_rank = rank
        return self._item_id_rank


@dataclass
class TrainResult:
    model: FactorModel
    epoch_losses: list
    triplet_audit: dict


def init_model(n_users, n_items, config: TrainConfig, rng, user_ids=None, item_ids=None) -> FactorModel:
    """Fresh model with factors drawn i.i.d. uniform on [0, 1)."""
    if n_users < 1 or n_items < 1:
        raise ValueError("need at least one user and one item")
    user_ids = list(range(n_users)) if user_ids is None else list(user_ids)
    item_ids = list(range(n_items)) if item_ids is None else list(item_ids)
    if len(user_ids) != n_users or len(item_ids) != n_items:
        raise ValueError("id list lengths do not match counts")
    return FactorModel(
        user_factors=rng.random((n_users, config.dim), dtype=np.float64),
        item_factors=rng.random((n_items, config.dim), dtype=np.float64),
        dim=config.dim,
        user_ids=user_ids,
        item_ids=item_ids,
    )


def score(model: FactorModel, user, item) -> float:
    """Dot product of the user's and item's factor vectors."""
    try:
        u = model.user_index[user]
    except KeyError:
        raise LookupError(f"unknown user {user!r}") from None
    try:
        i = model.item_index[item]
    except KeyError:
        raise LookupError(f"unknown item {item!r}") from None
    return float(np.dot(model.user_factors[u], model.item_factors[i]))


def _sigmoid_neg(x):
    """sigmoid(-x) = 1 / (1 + e^x), stable for large |x|."""
    if x >= 0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


def _softplus_neg(x):
    """-ln sigmoid(x) = ln(1 + e^-x), stable for large |x|."""
    if x >= 0:
        return math.log1p(math.exp(-x))
    return -x + math.log1p(math.exp(x))


def bpr_loss(model: FactorModel, triplet: Triplet, l2=0.0) -> float:
    """Per-triplet criterion: ``-ln sigmoid(x)`` for the score difference
    ``x = score(u,i) - score(u,j)``, plus ``l2/2`` times the squared norms of
    the three touched factor rows."""
    x = score(model, triplet.user, triplet.positive) - score(model, triplet.user, triplet.negative)
    reg = 0.0
    if l2:
        u = model.user_factors[model.user_index[triplet.user]]
        vi = model.item_factors[model.item_index[triplet.positive]]
        vj = model.item_factors[model.item_index[triplet.negative]]
        reg = 0.5 * l2 * (float(u @ u) + float(vi @ vi) + float(vj @ vj))
    return _softplus_neg(x) + reg


def bpr_step(model: FactorModel, triplet: Triplet, lr, l2=0.0) -> FactorModel:
    """Apply one SGD step in place and return the model.

    With ``x = score(u,i) - score(u,j)`` and ``g = 1/(1+exp(x))``:

        u += lr * (g * (i - j) - l2 * u)
        i += lr * (g * u_old   - l2 * i)
        j += lr * (-g * u_old  - l2 * j)

    where ``u_old`` is the user vector before its update.
    """
    try:
        u = model.user_index[triplet.user]
        i = model.item_index[triplet.positive]
        j = model.item_index[triplet.negative]
    except KeyError as e:
        raise LookupError(f"triplet references unknown identifier {e.args[0]!r}") from None
    U, V = model.user_factors, model.item_factors
    x = float(np.dot(U[u], V[i] - V[j]))
    if not math.isfinite(x):
        raise TrainingError(f"non-finite score difference for {triplet}")
    g = _sigmoid_neg(x)
    u_old = U[u].copy()
    U[u] += lr * (g * (V[i] - V[j]) - l2 * U[u])
    V[i] += lr * (g * u_old - l2 * V[i])
    V[j] += lr * (-g * u_old - l2 * V[j])
    if not (np.isfinite(U[u]).all() and np.isfinite(V[i]).all() and np.isfinite(V[j]).all()):
        raise TrainingError(f"non-finite factors after update for {triplet}")
    return model


@njit(cache=False)
def _sgd_epoch_numba(U, V, users, pos, neg, lr, l2):  # pragma: no cover - compiled
    total = 0.0
    d = U.shape[1]
    for t in range(users.shape[0]):
        u = users[t]
        i = pos[t]
        j = neg[t]
        x = 0.0
        for f in range(d):
            x += U[u, f] * (V[i, f] - V[j, f])
        if x >= 0:
            e = math.exp(-x)
            g = e / (1.0 + e)
            total += math.log1p(e)
        else:
            g = 1.0 / (1.0 + math.exp(x))
            total += -x + math.log1p(math.exp(x))
        for f in range(d):
            uf = U[u, f]
            U[u, f] += lr * (g * (V[i, f] - V[j, f]) - l2 * uf)
            V[i, f] += lr * (g * uf - l2 * V[i, f])
            V[j, f] += lr * (-g * uf - l2 * V[j, f])
    return total


def _sgd_epoch_py(U, V, users, pos, neg, lr, l2):
    total = 0.0
    d = U.shape[1]
    for t in range(users.shape[0]):
        u = users[t]
        i = pos[t]
        j = neg[t]
        x = 0.0
        for f in range(d):
            x += U[u, f] * (V[i, f] - V[j, f])
        g = _sigmoid_neg(x)
        total += _softplus_neg(x)
        for f in range(d):
            uf = U[u, f]
            U[u, f] += lr * (g * (V[i, f] - V[j, f]) - l2 * uf)
            V[i, f] += lr * (g * uf - l2 * V[i, f])
            V[j, f] += lr * (-g * uf - l2 * V[j, f])
    return total


_sgd_epoch = _sgd_epoch_numba if _HAS_NUMBA else _sgd_epoch_py


def train(split: DatasetSplit, catalog: Catalog | None, config: TrainConfig) -> TrainResult:
    """Train BPR-MF over the split's train part.

    Per epoch, a fresh batch of ``N`` triplets is drawn by the configured
    sampler (default ``N = len(train)``) and each triplet is applied as one
    SGD step in stream order. Returns the model, per-epoch mean losses, and a
    composition audit of all training triplets.
    """
    index = split.train_index()
    init_rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(0,)))
    sample_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.sampler.seed, spawn_key=(1,))
    )
    model = init_model(
        index.n_users, index.n_items, config, init_rng,
        user_ids=index.users, item_ids=index.items,
    )
    n_per_epoch = (
        config.sampler.triplets_per_epoch
        if config.sampler.triplets_per_epoch is not None
        else len(split.train)
    )
    codes, labels = index.group_codes(catalog)
    pos_counts = np.zeros(len(labels), dtype=np.int64)
    neg_counts = np.zeros(len(labels), dtype=np.int64)
    losses = []
    U, V = model.user_factors, model.item_factors
    for epoch in range(config.epochs):
        u, i, j, _ = sample_triplet_arrays(
            split, config.sampler, catalog, n=n_per_epoch, rng=sample_rng
        )
        if n_per_epoch == 0:
            losses.append(None)
            continue
        pos_counts += np.bincount(codes[i], minlength=len(labels))
        neg_counts += np.bincount(codes[j], minlength=len(labels))
        total = _sgd_epoch(U, V, u, i, j, config.learning_rate, config.l2_reg)
        if not (math.isfinite(total) and np.isfinite(U).all() and np.isfinite(V).all()):
            raise TrainingError(f"non-finite factors after epoch {epoch + 1}")
        losses.append(total / n_per_epoch)

    n_total = int(pos_counts.sum())
    audit = {
        "n_triplets": n_total,
        "positive_counts": {g: int(c) for g, c in zip(labels, pos_counts) if c},
        "negative_counts": {g: int(c) for g, c in zip(labels, neg_counts) if c},
        "positive_share": {g: int(c) / n_total for g, c in zip(labels, pos_counts) if c}
        if n_total else {},
        "negative_share": {g: int(c) / n_total for g, c in zip(labels, neg_counts) if c}
        if n_total else {},
    }
    return TrainResult(model=model, epoch_losses=losses, triplet_audit=audit)


def recommend_top_k(model: FactorModel, user, k, exclude=()) -> list:
    """The ``k`` highest-scoring items for a user, excluding a given set.

    Ties are broken by ascending item identifier, so the output is a total
    order. If fewer than ``k`` candidates exist, all of them are returned and
    a warning is logged.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    try:
        u = model.user_index[user]
    except KeyError:
        raise LookupError(f"unknown user {user!r}") from None
    scores = model.item_factors @ model.user_factors[u]
    mask = np.ones(len(model.item_ids), dtype=bool)
    for it in exclude:
        r = model.item_index.get(it)
        if r is not None:
            mask[r] = False
    cand = np.nonzero(mask)[0]
    if cand.size == 0:
        logger.warning("user %r has no candidate items", user)
        return []
    rank = model.item_id_rank()
    s = scores[cand]
    if cand.size <= k:
        if cand.size < k:
            logger.warning(
                "user %r: only %d candidates for top-%d", user, cand.size, k
            )
        order = np.lexsort((rank[cand], -s))
        return [model.item_ids[r] for r in cand[order]]
    kth = np.partition(s, cand.size - k)[cand.size - k]
    gt = s > kth
    greater = cand[gt]
    order = np.lexsort((rank[greater], -s[gt]))
    chosen = list(greater[order])
    equal = cand[s == kth]
    need = k - len(chosen)
    eq_order = np.argsort(rank[equal])
    chosen.extend(equal[eq_order][:need])
    return [model.item_ids[r] for r in chosen]


_MAGIC = b"FAIRBPR1\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)!r}")


def save_checkpoint(model: FactorModel, path, meta=None):
    """Write a self-describing binary checkpoint; byte-deterministic for a
    given model (no timestamps), so identical runs give identical files."""
    header = {
        "dim": model.dim,
        "n_users": len(model.user_ids),
        "n_items": len(model.item_ids),
        "user_ids": model.user_ids,
        "item_ids": model.item_ids,
        "dtype": "<f8",
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"), default=_json_default)
    blob = blob.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(">Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.user_factors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.item_factors, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(model, meta)``.

    The round-trip is exact: factors are stored as raw little-endian float64.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise CheckpointError(f"{path}: not a fairbpr checkpoint")
        (blob_len,) = struct.unpack(">Q", _read_exact(fh, 8, path))
        try:
            header = json.loads(_read_exact(fh, blob_len, path).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: corrupt header ({e})") from None
        try:
            dim = header["dim"]
            user_ids = header["user_ids"]
            item_ids = header["item_ids"]
        except KeyError as e:
            raise CheckpointError(f"{path}: header missing {e.args[0]!r}") from None
        n_users, n_items = len(user_ids), len(item_ids)
        U = np.frombuffer(_read_exact(fh, n_users * dim * 8, path), dtype="<f8").copy()
        V = np.frombuffer(_read_exact(fh, n_items * dim * 8, path), dtype="<f8").copy()
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after factor matrices")
    model = FactorModel(
        user_factors=U.reshape(n_users, dim),
        item_factors=V.reshape(n_items, dim),
        dim=dim,
        user_ids=user_ids,
        item_ids=item_ids,
    )
    return model, header.get("meta", {})


def _read_exact(fh, n, path):
    buf = fh.read(n)
    if len(buf) != n:
        raise CheckpointError(f"{path}: truncated checkpoint")
    return buf
