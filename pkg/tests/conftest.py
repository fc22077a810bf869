import math

import numpy as np
import pytest

from fairbpr import Catalog, Interaction, bpr_loss, bpr_step, temporal_split


def make_interactions(rows):
    """rows: iterable of (user, item, rating, timestamp) tuples."""
    return [Interaction(u, i, float(r), int(t)) for u, i, r, t in rows]


def random_dataset(seed, n_users=20, n_items=50, per_user=10, minority=0.1,
                   minority_popularity=1.0):
    """Random implicit-feedback log with a two-group catalog.

    The first ``round(minority * n_items)`` items form group F, the rest group
    M. ``minority_popularity`` scales how often F items are drawn, so values
    below 1 make the minority group under-represented in interactions too.
    """
    rng = np.random.default_rng(seed)
    n_f = round(minority * n_items)
    groups = {f"i{k:03d}": ("F" if k < n_f else "M") for k in range(n_items)}
    item_ids = sorted(groups)
    w = np.array([minority_popularity if groups[i] == "F" else 1.0 for i in item_ids])
    w = w / w.sum()
    inters = []
    for u in range(n_users):
        picks = rng.choice(n_items, size=min(per_user, n_items), replace=False, p=w)
        for k in picks:
            inters.append(Interaction(f"u{u:03d}", item_ids[k], 5.0,
                                      int(rng.integers(0, 10**6))))
    return inters, Catalog.from_groups(groups)


def planted_dataset(seed=0, n_users_per_side=40, n_items_per_side=40, n_f_per_side=6,
                    per_user=20, cross=2, minority_popularity=0.35):
    """Two user communities with disjoint preferred item blocks.

    Each user draws ``per_user - cross`` items from their own block and
    ``cross`` from the other, with minority (F) items down-weighted by
    ``minority_popularity``. Recoverable structure: a trained model should
    rank own-block items high, and F items start under-exposed.
    """
    rng = np.random.default_rng(seed)
    groups = {}
    blocks = []
    for side in ("a", "b"):
        ids = [f"{side}{k:03d}" for k in range(n_items_per_side)]
        for k, it in enumerate(ids):
            groups[it] = "F" if k < n_f_per_side else "M"
        blocks.append(ids)
    inters = []
    for side in (0, 1):
        own, other = blocks[side], blocks[1 - side]
        w_own = np.array([minority_popularity if groups[i] == "F" else 1.0 for i in own])
        w_own = w_own / w_own.sum()
        for u in range(n_users_per_side):
            uid = f"u{side}{u:03d}"
            picks = rng.choice(len(own), size=per_user - cross, replace=False, p=w_own)
            items = [own[k] for k in picks]
            items += [other[k] for k in rng.choice(len(other), size=cross, replace=False)]
            for it in items:
                inters.append(Interaction(uid, it, 5.0, int(rng.integers(0, 10**6))))
    return inters, Catalog.from_groups(groups)


def write_dataset_files(tmp_path, inters, catalog, sep="\t"):
    """Write interaction and provider files the CLI can ingest."""
    ipath = tmp_path / "interactions.tsv"
    ppath = tmp_path / "providers.tsv"
    with open(ipath, "w") as fh:
        for x in inters:
            fh.write(f"{x.user}{sep}{x.item}{sep}{x.rating:g}{sep}{x.timestamp}\n")
    with open(ppath, "w") as fh:
        for item in sorted(catalog.groups):
            fh.write(f"{item}{sep}prov_{item}{sep}{catalog.groups[item]}\n")
    return ipath, ppath


@pytest.fixture
def small_split():
    inters, catalog = random_dataset(seed=42, n_users=15, n_items=40, per_user=8)
    return temporal_split(inters, 0.2, 0.2), catalog


# ---------------------------------------------------------------------------
# independent oracles shared by unit and acceptance tests
# ---------------------------------------------------------------------------

def fd_gradient(model, triplet, l2, h=1e-5):
    """Central finite differences of bpr_loss over the three touched rows."""
    rows = [
        (model.user_factors, model.user_index[triplet.user]),
        (model.item_factors, model.item_index[triplet.positive]),
        (model.item_factors, model.item_index[triplet.negative]),
    ]
    grads = []
    for arr, r in rows:
        g = np.zeros(model.dim)
        for f in range(model.dim):
            orig = arr[r, f]
            arr[r, f] = orig + h
            up = bpr_loss(model, triplet, l2)
            arr[r, f] = orig - h
            down = bpr_loss(model, triplet, l2)
            arr[r, f] = orig
            g[f] = (up - down) / (2 * h)
        grads.append(g)
    return np.concatenate(grads)


def analytic_gradient(model, triplet, l2, lr=1e-3):
    """Gradient implied by bpr_step: (theta_before - theta_after) / lr."""
    U0, V0 = model.user_factors.copy(), model.item_factors.copy()
    bpr_step(model, triplet, lr=lr, l2=l2)
    u = model.user_index[triplet.user]
    i = model.item_index[triplet.positive]
    j = model.item_index[triplet.negative]
    g = np.concatenate([
        (U0[u] - model.user_factors[u]) / lr,
        (V0[i] - model.item_factors[i]) / lr,
        (V0[j] - model.item_factors[j]) / lr,
    ])
    model.user_factors[:] = U0
    model.item_factors[:] = V0
    return g


def ndcg_oracle(items, relevant, k):
    """Independent NDCG: explicit DCG loop over the list, IDCG from an
    explicitly constructed ideal ranking of the full relevant set."""
    def dcg(seq):
        total = 0.0
        for r, rel_flag in enumerate(seq, start=1):
            if r > k:
                break
            total += rel_flag / math.log2(r + 1)
        return total

    rel_seq = [1 if it in relevant else 0 for it in items]
    ideal_seq = [1] * len(relevant) + [0] * max(0, k - len(relevant))
    return dcg(rel_seq) / dcg(ideal_seq)


def oracle_topk(model, user, k, exclude):
    """Full sort over all candidate items by (-score, identifier)."""
    u = model.user_index[user]
    pairs = []
    for item, r in model.item_index.items():
        if item in exclude:
            continue
        pairs.append((item, float(np.dot(model.user_factors[u], model.item_factors[r]))))
    pairs.sort(key=lambda kv: (-kv[1], kv[0]))
    return [it for it, _ in pairs[:k]]
