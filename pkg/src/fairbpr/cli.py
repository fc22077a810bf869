"""Command-line pipeline: prepare, train, evaluate, audit, sweep.

Every command takes flags, an optional flat JSON config file, or both; flags
override the config file, which overrides built-in defaults. Each output
artifact embeds the fully resolved configuration (and seed), and re-running a
command with identical inputs produces byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import data as dio
from .data import UNKNOWN_GROUP
from .metrics import fairness_report
from .model import TrainConfig, load_checkpoint, save_checkpoint, train
from .sampling import SamplerConfig, TargetSlot, sample_and_audit

DEFAULTS = {
    "sep": "\t",
    "min_item": 0,
    "min_user": 0,
    "test_frac": 0.2,
    "val_frac": 0.2,
    "dim": 10,
    "epochs": 10,
    "lr": 0.001,
    "l2": 0.0,
    "cost": 1.0,
    "slot": "none",
    "emphasized_group": "auto",
    "triplets_per_epoch": None,
    "user_draw": "uniform",
    "k": "10,20",
    "seed": 0,
    "out": "runs",
    "n_samples": 100000,
    "report_group": "auto",
    "dataset_name": None,
    "costs": None,
    "slots": "neg",
    "interactions": None,
    "providers": None,
    "split_dir": None,
    "checkpoint": None,
    "dump_triplets": None,
}

_SLOT_ALIASES = {
    "neg": TargetSlot.NEGATIVE,
    "negative": TargetSlot.NEGATIVE,
    "pos": TargetSlot.POSITIVE,
    "positive": TargetSlot.POSITIVE,
    "none": TargetSlot.NONE,
    "-": TargetSlot.NONE,
}


def _parse_sep(raw):
    return {"tab": "\t", "\\t": "\t"}.get(raw, raw)


def _parse_ks(raw):
    if isinstance(raw, (list, tuple)):
        ks = [int(v) for v in raw]
    else:
        ks = [int(v) for v in str(raw).split(",") if v.strip()]
    if not ks or any(k < 1 for k in ks):
        raise ValueError(f"invalid cutoff list {raw!r}")
    return sorted(set(ks))


def _parse_costs(raw):
    if raw is None:
        raise ValueError("sweep requires --costs (a non-empty comma-separated list)")
    if isinstance(raw, (list, tuple)):
        costs = [float(v) for v in raw]
    else:
        costs = [float(v) for v in str(raw).split(",") if v.strip()]
    if not costs:
        raise ValueError("empty cost list")
    return costs


def resolve_config(args) -> dict:
    """Merge defaults < config file < explicit CLI flags into one dict."""
    cfg = dict(DEFAULTS)
    given = {k: v for k, v in vars(args).items() if k not in ("func", "command", "config")}
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            from_file = json.load(fh)
        unknown = set(from_file) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(from_file)
        cfg["_explicit"] = set(from_file)
    cfg.update(given)
    cfg["_explicit"] = cfg.get("_explicit", set()) | set(given)
    cfg["sep"] = _parse_sep(cfg["sep"])
    cfg["command"] = args.command
    return cfg


def _echo(cfg) -> dict:
    """JSON-safe copy of the resolved configuration for embedding in outputs."""
    out = {}
    for key, val in sorted(cfg.items()):
        if key.startswith("_"):
            continue
        if isinstance(val, Path):
            val = str(val)
        out[key] = val
    return out


def _require(cfg, *keys):
    for key in keys:
        if cfg.get(key) is None:
            raise ValueError(f"missing required option --{key.replace('_', '-')}")


def _require_file(path, what):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} file not found: {path}")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _load_split_dir(split_dir, sep):
    split_dir = Path(split_dir)
    parts = {}
    for name in ("train", "validation", "test"):
        path = split_dir / f"{name}.tsv"
        _require_file(path, f"{name} split")
        parts[name] = dio.load_interactions(path, sep)
    return dio.DatasetSplit(**parts)


def _pick_group(catalog, which):
    """Deterministic majority/minority label from catalog shares."""
    if not catalog.group_share:
        raise ValueError("catalog has no labeled items")
    items = sorted(catalog.group_share.items(), key=lambda kv: (kv[1], kv[0]))
    return items[0][0] if which == "minority" else items[-1][0]


def _resolve_emphasized(cfg, catalog, slot):
    raw = cfg["emphasized_group"]
    if raw != "auto":
        return raw
    if slot is TargetSlot.NONE:
        return None
    # weighting the majority in the negative slot reduces how often minority
    # items are pushed down; weighting the minority in the positive slot
    # boosts how often they are pulled up
    return _pick_group(catalog, "majority" if slot is TargetSlot.NEGATIVE else "minority")


def _resolve_report_group(cfg, catalog):
    raw = cfg["report_group"]
    return _pick_group(catalog, "minority") if raw == "auto" else raw


def _sampler_config(cfg, catalog, slot=None, cost=None):
    slot = _SLOT_ALIASES[str(cfg["slot"]).lower()] if slot is None else slot
    cost = float(cfg["cost"]) if cost is None else float(cost)
    n = cfg["triplets_per_epoch"]
    return SamplerConfig(
        cost=cost,
        target_slot=slot,
        emphasized_group=_resolve_emphasized(cfg, catalog, slot),
        seed=int(cfg["seed"]),
        triplets_per_epoch=None if n is None else int(n),
        user_draw=cfg["user_draw"],
    )


def _dataset_name(cfg):
    if cfg.get("dataset_name"):
        return cfg["dataset_name"]
    if cfg.get("interactions"):
        return Path(cfg["interactions"]).stem
    return "dataset"


def cmd_prepare(args) -> int:
    cfg = resolve_config(args)
    _require(cfg, "interactions", "providers")
    _require_file(cfg["interactions"], "interactions")
    _require_file(cfg["providers"], "providers")
    sep = cfg["sep"]
    raw = dio.load_interactions(cfg["interactions"], sep)
    _, catalog = dio.load_provider_groups(cfg["providers"], sep)
    filtered = dio.filter_min_interactions(raw, int(cfg["min_item"]), int(cfg["min_user"]))
    split = dio.temporal_split(filtered, float(cfg["test_frac"]), float(cfg["val_frac"]))

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", split.train), ("validation", split.validation),
                       ("test", split.test)):
        dio.write_interactions(out / f"{name}.tsv", part, sep)

    stats = dio.catalog_stats(split, catalog)
    stats["dataset"] = _dataset_name(cfg)
    stats["config"] = _echo(cfg)
    _write_json(out / "stats.json", stats)

    cfg_json = json.dumps(_echo(cfg), sort_keys=True)
    groups = sorted(set(stats["item_group_share"]) | set(stats["train_interaction_group_share"]))
    rows = [
        [
            stats["dataset"], g,
            f"{stats['item_group_share'].get(g, 0.0):.6f}",
            f"{stats['train_interaction_group_share'].get(g, 0.0):.6f}",
            stats["n_users"], stats["n_items"],
            stats["n_interactions"]["total"], stats["n_interactions"]["train"],
            cfg_json,
        ]
        for g in groups
    ]
    _write_csv(
        out / "stats.csv",
        ["dataset", "group", "item_share", "train_interaction_share",
         "n_users", "n_items", "n_interactions_total", "n_interactions_train", "config_json"],
        rows,
    )
    print(f"prepared split written to {out} "
          f"(train={len(split.train)}, validation={len(split.validation)}, test={len(split.test)})")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    _require(cfg, "split_dir", "providers")
    _require_file(cfg["providers"], "providers")
    sep = cfg["sep"]
    split = _load_split_dir(cfg["split_dir"], sep)
    _, catalog = dio.load_provider_groups(cfg["providers"], sep)
    sampler = _sampler_config(cfg, catalog)
    tconf = TrainConfig(
        epochs=int(cfg["epochs"]),
        learning_rate=float(cfg["lr"]),
        l2_reg=float(cfg["l2"]),
        dim=int(cfg["dim"]),
        seed=int(cfg["seed"]),
        sampler=sampler,
    )
    result = train(split, catalog, tconf)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    echo = _echo(cfg)
    echo["resolved_emphasized_group"] = sampler.emphasized_group
    save_checkpoint(result.model, out / "model.ckpt",
                    meta={"config": echo, "triplet_audit": result.triplet_audit})
    _write_json(out / "train_log.json", {
        "epoch_losses": result.epoch_losses,
        "triplet_audit": result.triplet_audit,
        "config": echo,
    })
    print(f"model checkpoint written to {out / 'model.ckpt'}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args)
    _require(cfg, "checkpoint", "split_dir", "providers")
    _require_file(cfg["checkpoint"], "checkpoint")
    _require_file(cfg["providers"], "providers")
    sep = cfg["sep"]
    model, meta = load_checkpoint(cfg["checkpoint"])
    split = _load_split_dir(cfg["split_dir"], sep)
    _, catalog = dio.load_provider_groups(cfg["providers"], sep)
    ks = _parse_ks(cfg["k"])
    echo = _echo(cfg)
    report = fairness_report(model, split, catalog, ks=ks,
                             triplet_audit=meta.get("triplet_audit"), params=echo)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "metrics.json", report.to_dict())
    rg = _resolve_report_group(cfg, catalog)
    row = _metrics_row(_dataset_name(cfg), cfg.get("slot", "none"), cfg.get("cost", 1.0),
                       report, ks, rg, "ok", json.dumps(echo, sort_keys=True))
    _write_csv(out / "metrics.csv", _metrics_header(ks, rg), [row])
    print(f"metrics written to {out / 'metrics.json'}")
    return 0


def _metrics_header(ks, report_group):
    head = ["dataset", "item_type", "cost"]
    head += [f"ndcg@{k}" for k in ks]
    head += [f"pos_triplet_share_{report_group}", f"neg_triplet_share_{report_group}"]
    head += [f"exposure@{k}_{report_group}" for k in ks]
    head += [f"weighted_exposure@{k}_{report_group}" for k in ks]
    head += ["n_ndcg_users", "status", "config_json"]
    return head


def _metrics_row(dataset, slot, cost, report, ks, rg, status, cfg_json):
    audit = report.triplet_audit or {}
    row = [dataset, str(slot), f"{float(cost):g}"]
    row += [f"{report.ndcg.get(k, float('nan')):.6f}" for k in ks]
    row += [
        f"{audit.get('positive_share', {}).get(rg, 0.0):.6f}",
        f"{audit.get('negative_share', {}).get(rg, 0.0):.6f}",
    ]
    row += [f"{report.slot_share.get(k, {}).get(rg, 0.0):.6f}" for k in ks]
    row += [f"{report.weighted_exposure.get(k, {}).get(rg, 0.0):.6f}" for k in ks]
    row += [report.n_ndcg_users, status, cfg_json]
    return row


def cmd_audit(args) -> int:
    cfg = resolve_config(args)
    _require(cfg, "split_dir", "providers")
    _require_file(cfg["providers"], "providers")
    sep = cfg["sep"]
    split = _load_split_dir(cfg["split_dir"], sep)
    _, catalog = dio.load_provider_groups(cfg["providers"], sep)
    sampler = _sampler_config(cfg, catalog)
    record = sample_and_audit(split, sampler, catalog, int(cfg["n_samples"]),
                              dump_path=cfg["dump_triplets"], sep=sep)
    record["config"] = _echo(cfg)
    record["config"]["resolved_emphasized_group"] = sampler.emphasized_group
    print(json.dumps(record, indent=2, sort_keys=True))
    if "out" in cfg["_explicit"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "audit.json", record)
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    costs = _parse_costs(cfg["costs"])
    slots = [s.strip().lower() for s in str(cfg["slots"]).split(",") if s.strip()]
    for s in slots:
        if s not in _SLOT_ALIASES or _SLOT_ALIASES[s] is TargetSlot.NONE:
            raise ValueError(f"invalid sweep slot {s!r} (use neg and/or pos)")
    _require(cfg, "providers")
    _require_file(cfg["providers"], "providers")
    sep = cfg["sep"]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)

    if cfg.get("split_dir"):
        split_dir = Path(cfg["split_dir"])
    else:
        _require(cfg, "interactions")
        prep_args = argparse.Namespace(**vars(args))
        prep_args.command = "prepare"
        prep_args.out = str(out / "prepared")
        cmd_prepare(prep_args)
        split_dir = out / "prepared"

    split = _load_split_dir(split_dir, sep)
    _, catalog = dio.load_provider_groups(cfg["providers"], sep)
    ks = _parse_ks(cfg["k"])
    rg = _resolve_report_group(cfg, catalog)
    dataset = _dataset_name(cfg)

    runs = [(TargetSlot.NONE, 1.0)]
    runs += [(_SLOT_ALIASES[s], c) for s in slots for c in costs if c != 1.0]

    rows = []
    failures = 0
    for slot, cost in runs:
        slot_label = {"negative": "NEG", "positive": "POS", "none": "-"}[slot.value]
        run_dir = out / f"{dataset}_{slot_label}_C{cost:g}"
        run_dir.mkdir(parents=True, exist_ok=True)
        run_cfg = dict(cfg, slot=slot.value, cost=cost, out=str(run_dir))
        echo_json = json.dumps(_echo(run_cfg), sort_keys=True)
        try:
            sampler = _sampler_config(run_cfg, catalog, slot=slot, cost=cost)
            tconf = TrainConfig(
                epochs=int(cfg["epochs"]), learning_rate=float(cfg["lr"]),
                l2_reg=float(cfg["l2"]), dim=int(cfg["dim"]), seed=int(cfg["seed"]),
                sampler=sampler,
            )
            result = train(split, catalog, tconf)
            save_checkpoint(result.model, run_dir / "model.ckpt",
                            meta={"config": _echo(run_cfg),
                                  "triplet_audit": result.triplet_audit})
            report = fairness_report(model=result.model, split=split, catalog=catalog,
                                     ks=ks, triplet_audit=result.triplet_audit,
                                     params=_echo(run_cfg))
            _write_json(run_dir / "metrics.json", report.to_dict())
            rows.append(_metrics_row(dataset, slot_label, cost, report, ks, rg,
                                     "ok", echo_json))
            print(f"sweep run {slot_label} C={cost:g}: "
                  f"ndcg@{ks[0]}={report.ndcg[ks[0]]:.4f} "
                  f"exposure@{ks[0]}[{rg}]={report.slot_share[ks[0]].get(rg, 0.0):.4f}")
        except Exception as e:  # keep sweeping, record the failure
            failures += 1
            rows.append([dataset, slot_label, f"{cost:g}"]
                        + [""] * (len(_metrics_header(ks, rg)) - 6)
                        + ["", f"error: {e}", echo_json])
            print(f"sweep run {slot_label} C={cost:g} failed: {e}", file=sys.stderr)

    _write_csv(out / "sweep.csv", _metrics_header(ks, rg), rows)
    print(f"sweep table written to {out / 'sweep.csv'}")
    return 3 if failures else 0


def _add_common(p):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=None, help="flat JSON config file; flags override it")
    p.add_argument("--sep", default=S, help="field separator (default tab; 'tab' and '\\t' accepted)")
    p.add_argument("--seed", type=int, default=S, help="base RNG seed")
    p.add_argument("--out", default=S, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fairbpr",
        description="Pairwise recommender training with group-weighted triplet sampling "
                    "and provider-exposure evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("prepare", help="filter interactions and write a temporal split")
    _add_common(p)
    p.add_argument("--interactions", default=S, help="user<sep>item<sep>rating<sep>timestamp file")
    p.add_argument("--providers", default=S, help="item<sep>provider<sep>group file")
    p.add_argument("--min-item", dest="min_item", type=int, default=S,
                   help="drop items with fewer interactions (iterated with --min-user)")
    p.add_argument("--min-user", dest="min_user", type=int, default=S)
    p.add_argument("--test-frac", dest="test_frac", type=float, default=S)
    p.add_argument("--val-frac", dest="val_frac", type=float, default=S)
    p.add_argument("--dataset-name", dest="dataset_name", default=S)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train BPR-MF on a prepared split")
    _add_common(p)
    p.add_argument("--split-dir", dest="split_dir", default=S, help="directory from `prepare`")
    p.add_argument("--providers", default=S)
    p.add_argument("--dim", type=int, default=S)
    p.add_argument("--epochs", type=int, default=S)
    p.add_argument("--lr", type=float, default=S)
    p.add_argument("--l2", type=float, default=S)
    _add_sampler_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="compute utility and exposure metrics for a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", default=S)
    p.add_argument("--split-dir", dest="split_dir", default=S)
    p.add_argument("--providers", default=S)
    p.add_argument("--k", default=S, help="comma-separated cutoffs, e.g. 10,20")
    p.add_argument("--report-group", dest="report_group", default=S,
                   help="group whose shares go into the CSV (default: smallest catalog share)")
    p.add_argument("--slot", default=S, help=argparse.SUPPRESS)
    p.add_argument("--cost", type=float, default=S, help=argparse.SUPPRESS)
    p.add_argument("--dataset-name", dest="dataset_name", default=S)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("audit", help="sample triplets without training and report composition")
    _add_common(p)
    p.add_argument("--split-dir", dest="split_dir", default=S)
    p.add_argument("--providers", default=S)
    _add_sampler_flags(p)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=S)
    p.add_argument("--dump-triplets", dest="dump_triplets", default=S,
                   help="also write sampled rows user<sep>pos<sep>neg to this path")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("sweep", help="prepare once, then train+evaluate per (slot, cost)")
    _add_common(p)
    p.add_argument("--interactions", default=S)
    p.add_argument("--providers", default=S)
    p.add_argument("--split-dir", dest="split_dir", default=S,
                   help="reuse an existing prepared split instead of preparing")
    p.add_argument("--costs", default=S, help="comma-separated cost values, e.g. 1,1.2,2,3")
    p.add_argument("--slots", default=S, help="comma-separated slots to sweep (neg,pos)")
    p.add_argument("--min-item", dest="min_item", type=int, default=S)
    p.add_argument("--min-user", dest="min_user", type=int, default=S)
    p.add_argument("--test-frac", dest="test_frac", type=float, default=S)
    p.add_argument("--val-frac", dest="val_frac", type=float, default=S)
    p.add_argument("--dim", type=int, default=S)
    p.add_argument("--epochs", type=int, default=S)
    p.add_argument("--lr", type=float, default=S)
    p.add_argument("--l2", type=float, default=S)
    p.add_argument("--emphasized-group", dest="emphasized_group", default=S)
    p.add_argument("--triplets-per-epoch", dest="triplets_per_epoch", type=int, default=S)
    p.add_argument("--user-draw", dest="user_draw", choices=["uniform", "interactions"], default=S)
    p.add_argument("--k", default=S)
    p.add_argument("--report-group", dest="report_group", default=S)
    p.add_argument("--dataset-name", dest="dataset_name", default=S)
    p.set_defaults(func=cmd_sweep)

    return parser


def _add_sampler_flags(p):
    S = argparse.SUPPRESS
    p.add_argument("--cost", type=float, default=S, help="group weight ratio C >= 1 (1 = uniform)")
    p.add_argument("--slot", choices=["neg", "pos", "none"], default=S,
                   help="triplet slot the group weights apply to")
    p.add_argument("--emphasized-group", dest="emphasized_group", default=S,
                   help="group receiving weight C ('auto': majority for neg, minority for pos)")
    p.add_argument("--triplets-per-epoch", dest="triplets_per_epoch", type=int, default=S)
    p.add_argument("--user-draw", dest="user_draw", choices=["uniform", "interactions"], default=S)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
