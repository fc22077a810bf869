import csv
import json

from fairbpr.cli import main

from conftest import make_interactions, random_dataset, write_dataset_files


def _toy_files(tmp_path, n_users=12, n_items=30, per_user=8, seed=3):
    inters, catalog = random_dataset(seed=seed, n_users=n_users, n_items=n_items,
                                     per_user=per_user, minority=0.2)
    return write_dataset_files(tmp_path, inters, catalog)


def _prepare(tmp_path, ipath, ppath, extra=()):
    out = tmp_path / "prep"
    rc = main(["prepare", "--interactions", str(ipath), "--providers", str(ppath),
               "--out", str(out), *extra])
    assert rc == 0
    return out


class TestPrepare:
    def test_ten_rows_six_two_two(self, tmp_path):
        rows = make_interactions([("u1", f"i{t}", 1, t) for t in range(10)])
        groups = {f"i{t}": "M" for t in range(10)}
        from fairbpr import Catalog
        ipath, ppath = write_dataset_files(tmp_path, rows, Catalog.from_groups(groups))
        out = _prepare(tmp_path, ipath, ppath)
        from fairbpr import load_interactions
        assert len(load_interactions(out / "train.tsv")) == 6
        assert len(load_interactions(out / "validation.tsv")) == 2
        assert len(load_interactions(out / "test.tsv")) == 2
        stats = json.loads((out / "stats.json").read_text())
        assert stats["n_interactions"]["train"] == 6
        assert stats["config"]["command"] == "prepare"
        assert (out / "stats.csv").exists()

    def test_missing_provider_file(self, tmp_path, capsys):
        ipath, _ = _toy_files(tmp_path)
        rc = main(["prepare", "--interactions", str(ipath),
                   "--providers", str(tmp_path / "absent.tsv"),
                   "--out", str(tmp_path / "o")])
        assert rc != 0
        assert "absent.tsv" in capsys.readouterr().err

    def test_min_item_filter_applied(self, tmp_path):
        rows = make_interactions(
            [("u1", "rare", 1, 1)] + [(f"u{k}", "common", 1, k + 2) for k in range(10)]
        )
        from fairbpr import Catalog
        ipath, ppath = write_dataset_files(
            tmp_path, rows, Catalog.from_groups({"rare": "F", "common": "M"}))
        out = _prepare(tmp_path, ipath, ppath, extra=["--min-item", "2"])
        stats = json.loads((out / "stats.json").read_text())
        assert stats["n_interactions"]["total"] == 10


class TestTrainEvaluate:
    def test_full_cycle_and_determinism(self, tmp_path):
        ipath, ppath = _toy_files(tmp_path)
        prep = _prepare(tmp_path, ipath, ppath)
        run = tmp_path / "run"
        train_argv = ["train", "--split-dir", str(prep), "--providers", str(ppath),
                      "--epochs", "2", "--dim", "3", "--lr", "0.05", "--seed", "11",
                      "--cost", "2", "--slot", "neg", "--out", str(run)]
        assert main(train_argv) == 0
        ck_a = (run / "model.ckpt").read_bytes()
        assert main(train_argv) == 0
        assert (run / "model.ckpt").read_bytes() == ck_a

        log = json.loads((run / "train_log.json").read_text())
        assert len(log["epoch_losses"]) == 2
        assert log["config"]["cost"] == 2.0
        assert log["triplet_audit"]["n_triplets"] > 0

        eval_argv = ["evaluate", "--checkpoint", str(run / "model.ckpt"),
                     "--split-dir", str(prep), "--providers", str(ppath),
                     "--k", "5,10", "--out", str(run)]
        assert main(eval_argv) == 0
        m_a = (run / "metrics.json").read_bytes()
        assert main(eval_argv) == 0
        assert (run / "metrics.json").read_bytes() == m_a
        payload = json.loads(m_a)
        assert set(payload["ndcg"]) == {"5", "10"}
        assert set(payload["slot_share"]) == {"5", "10"}
        assert payload["config"]["k"] == "5,10"

    def test_invalid_cost_rejected(self, tmp_path, capsys):
        ipath, ppath = _toy_files(tmp_path)
        prep = _prepare(tmp_path, ipath, ppath)
        rc = main(["train", "--split-dir", str(prep), "--providers", str(ppath),
                   "--cost", "0.5", "--slot", "neg", "--out", str(tmp_path / "r")])
        assert rc != 0
        assert "cost" in capsys.readouterr().err

    def test_corrupted_checkpoint(self, tmp_path, capsys):
        ipath, ppath = _toy_files(tmp_path)
        prep = _prepare(tmp_path, ipath, ppath)
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint at all")
        rc = main(["evaluate", "--checkpoint", str(bad), "--split-dir", str(prep),
                   "--providers", str(ppath), "--out", str(tmp_path / "e")])
        assert rc != 0
        assert "checkpoint" in capsys.readouterr().err.lower()

    def test_config_file_precedence(self, tmp_path):
        ipath, ppath = _toy_files(tmp_path)
        prep = _prepare(tmp_path, ipath, ppath)
        cfg = {"epochs": 4, "dim": 3, "lr": 0.05, "split_dir": str(prep),
               "providers": str(ppath), "out": str(tmp_path / "rc")}
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg))
        # config file drives epochs=4; CLI overrides dim to 2
        rc = main(["train", "--config", str(cfg_path), "--dim", "2"])
        assert rc == 0
        log = json.loads((tmp_path / "rc" / "train_log.json").read_text())
        assert len(log["epoch_losses"]) == 4
        assert log["config"]["dim"] == 2

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({"banana": 1}))
        rc = main(["train", "--config", str(cfg_path)])
        assert rc != 0
        assert "banana" in capsys.readouterr().err


class TestAudit:
    def test_shares_and_dump(self, tmp_path, capsys):
        ipath, ppath = _toy_files(tmp_path)
        prep = _prepare(tmp_path, ipath, ppath)
        capsys.readouterr()  # drop prepare's progress line
        dump = tmp_path / "triplets.tsv"
        rc = main(["audit", "--split-dir", str(prep), "--providers", str(ppath),
                   "--cost", "2", "--slot", "neg", "--n-samples", "2000",
                   "--seed", "3", "--dump-triplets", str(dump)])
        assert rc == 0
        record = json.loads(capsys.readouterr().out)
        assert record["n_triplets"] == 2000
        assert abs(sum(record["negative_share"].values()) - 1.0) < 1e-9
        assert record["config"]["resolved_emphasized_group"] == "M"
        lines = dump.read_text().splitlines()
        assert len(lines) == 2000 and len(lines[0].split("\t")) == 3

    def test_zero_samples(self, tmp_path, capsys):
        ipath, ppath = _toy_files(tmp_path)
        prep = _prepare(tmp_path, ipath, ppath)
        capsys.readouterr()
        rc = main(["audit", "--split-dir", str(prep), "--providers", str(ppath),
                   "--n-samples", "0"])
        assert rc == 0
        record = json.loads(capsys.readouterr().out)
        assert record["n_triplets"] == 0
        assert record["positive_share"] == {}

    def test_cost_one_close_to_uniform(self, tmp_path, capsys):
        ipath, ppath = _toy_files(tmp_path, n_users=10, n_items=25)
        prep = _prepare(tmp_path, ipath, ppath)
        capsys.readouterr()
        shares = {}
        for label, extra in (("baseline", []),
                             ("c1", ["--cost", "1", "--slot", "neg"])):
            rc = main(["audit", "--split-dir", str(prep), "--providers", str(ppath),
                       "--n-samples", "30000", "--seed", "7", *extra])
            assert rc == 0
            record = json.loads(capsys.readouterr().out)
            shares[label] = record["negative_share"]["F"]
        assert abs(shares["baseline"] - shares["c1"]) < 0.02


class TestSweep:
    def test_table_shape_and_run_dirs(self, tmp_path):
        ipath, ppath = _toy_files(tmp_path)
        out = tmp_path / "sweep"
        rc = main(["sweep", "--interactions", str(ipath), "--providers", str(ppath),
                   "--costs", "1,1.2,2,3", "--slots", "neg",
                   "--epochs", "2", "--dim", "3", "--lr", "0.05", "--k", "5",
                   "--seed", "2", "--out", str(out), "--dataset-name", "toy"])
        assert rc == 0
        with open(out / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert [r["item_type"] for r in rows] == ["-", "NEG", "NEG", "NEG"]
        assert [r["cost"] for r in rows] == ["1", "1.2", "2", "3"]
        assert all(r["status"] == "ok" for r in rows)
        assert (out / "toy_NEG_C2" / "model.ckpt").exists()
        assert (out / "toy_NEG_C2" / "metrics.json").exists()
        cfg = json.loads(rows[2]["config_json"])
        assert cfg["cost"] == 2.0 and cfg["seed"] == 2

    def test_empty_costs_rejected(self, tmp_path, capsys):
        ipath, ppath = _toy_files(tmp_path)
        rc = main(["sweep", "--interactions", str(ipath), "--providers", str(ppath),
                   "--costs", "", "--out", str(tmp_path / "s")])
        assert rc != 0
        assert "cost" in capsys.readouterr().err.lower()

    def test_partial_failure_keeps_going(self, tmp_path):
        ipath, ppath = _toy_files(tmp_path)
        out = tmp_path / "sweep"
        # 0.5 is an invalid cost: that row fails, the others complete
        rc = main(["sweep", "--interactions", str(ipath), "--providers", str(ppath),
                   "--costs", "1,0.5,2", "--slots", "neg",
                   "--epochs", "1", "--dim", "2", "--lr", "0.05", "--k", "5",
                   "--out", str(out)])
        assert rc != 0
        with open(out / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        statuses = [r["status"] for r in rows]
        assert sum(s == "ok" for s in statuses) == 2
        assert sum(s.startswith("error") for s in statuses) == 1


class TestSeparators:
    def test_double_colon_end_to_end(self, tmp_path):
        inters, catalog = random_dataset(seed=5, n_users=8, n_items=20, per_user=6)
        ipath, ppath = write_dataset_files(tmp_path, inters, catalog, sep="::")
        out = tmp_path / "prep"
        rc = main(["prepare", "--interactions", str(ipath), "--providers", str(ppath),
                   "--sep", "::", "--out", str(out)])
        assert rc == 0
        rc = main(["audit", "--split-dir", str(out), "--providers", str(ppath),
                   "--sep", "::", "--n-samples", "100"])
        assert rc == 0
