import json

import numpy as np
import pytest

from hypercl import ConfigurationError, dataio
from hypercl.cli import main, parse_variant

from conftest import DATA, random_dataset


@pytest.fixture
def toy(tmp_path):
    d = random_dataset(np.random.default_rng(0), n=24, m=10, f=5)
    p = tmp_path / "toy.json"
    dataio.save_dataset(d, p)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 3, "node_emb_dim": 6, "hyperedge_emb_dim": 6,
                               "projection_hidden_dim": 6, "p_f": 0.2, "p_m": 0.2,
                               "probe_epochs": 50}))
    return p, cfg


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestVariant:
    def test_names(self):
        assert parse_variant("tricl") == (True, True, True)
        assert parse_variant("tricl-n") == (True, False, False)
        assert parse_variant("tricl-ng") == (True, True, False)

    def test_mask(self):
        assert parse_variant("loss-mask=0,0,1") == (False, False, True)

    def test_bad(self):
        with pytest.raises(ConfigurationError):
            parse_variant("loss-mask=1,1")


class TestStats:
    def test_zoo(self, capsys):
        code, out, _ = run(capsys, "stats", DATA / "zoo.json", "--json")
        st = json.loads(out)
        assert code == 0
        assert f"{st['avg_node_degree']:.2f}" == "17.00"
        assert set(st) == {"nodes", "hyperedges", "memberships", "avg_hyperedge_size",
                           "max_hyperedge_size", "avg_node_degree", "max_node_degree",
                           "features", "classes"}

    def test_single_edge(self, tmp_path, capsys):
        p = tmp_path / "one.json"
        p.write_text(json.dumps({"num_nodes": 3, "hyperedges": [[0, 1, 2]],
                                 "features": [[0]] * 3, "labels": [0] * 3}))
        code, out, _ = run(capsys, "stats", p)
        assert code == 0 and "avg_hyperedge_size  3.00" in out

    def test_missing_file_is_one_line(self, tmp_path, capsys):
        code, out, err = run(capsys, "stats", tmp_path / "nope.json")
        assert code == 3
        assert len(err.strip().splitlines()) == 1
        assert json.loads(err)["error"] == "DatasetFormatError"


class TestSplit:
    def test_count_and_disjoint(self, toy, tmp_path, capsys):
        code, out, _ = run(capsys, "split", toy[0], "--count", 3, "--seed", 5,
                           "--out", tmp_path / "splits")
        paths = json.loads(out)["splits"]
        assert code == 0 and len(paths) == 3
        for i, p in enumerate(paths):
            s = dataio.load_split(p, 24)
            assert s.seed == 5 + i
            assert (len(s.train), len(s.valid), len(s.test)) == (2, 2, 20)

    def test_bad_ratios(self, toy, tmp_path, capsys):
        code, _, err = run(capsys, "split", toy[0], "--ratios", "0.5,0.5,0.5", "--out", tmp_path)
        assert code == 2 and "ConfigurationError" in err


class TestTrainEmbedEval:
    def test_pipeline(self, toy, tmp_path, capsys):
        data, cfg = toy
        out = tmp_path / "run"
        code, o, _ = run(capsys, "train", data, "--config", cfg, "--out", out, "--embeddings")
        assert code == 0
        summary = dataio.load_run_summary(out / "summary.json")
        assert len(summary["loss_trace"]) == 3

        run(capsys, "split", data, "--count", 2, "--out", tmp_path / "s")
        splits = sorted((tmp_path / "s").glob("*.json"))
        code, o, _ = run(capsys, "eval-classify", data, "--model", out / "model.npz",
                         "--splits", *splits, "--probe-epochs", 50,
                         "--summary", out / "summary.json")
        assert code == 0 and 0 <= json.loads(o)["accuracy_mean"] <= 1
        code, o, _ = run(capsys, "eval-cluster", data, "--embeddings", out / "embeddings.bin",
                         "--runs", 2, "--silhouette", "--summary", out / "summary.json")
        assert code == 0
        summary = dataio.load_run_summary(out / "summary.json")
        assert {"accuracy_mean", "nmi", "f1", "silhouette"} <= set(summary["evaluation"])

    def test_same_seed_same_digest(self, toy, tmp_path, capsys):
        digests = []
        for name in ("a", "b"):
            run(capsys, "train", toy[0], "--config", toy[1], "--seed", 4, "--out", tmp_path / name)
            digests.append(dataio.summary_digest(dataio.load_run_summary(tmp_path / name / "summary.json")))
        assert digests[0] == digests[1]

    def test_variant_terms(self, toy, tmp_path, capsys):
        run(capsys, "train", toy[0], "--config", toy[1], "--variant", "tricl-n", "--out", tmp_path / "n")
        s = dataio.load_run_summary(tmp_path / "n" / "summary.json")
        assert set(s["component_trace"]) == {"node"}
        run(capsys, "train", toy[0], "--config", toy[1], "--variant", "loss-mask=0,0,1",
            "--out", tmp_path / "m")
        s = dataio.load_run_summary(tmp_path / "m" / "summary.json")
        assert set(s["component_trace"]) == {"membership"}

    def test_random_init_embed(self, toy, tmp_path, capsys):
        for name, fmt in (("a.bin", "binary"), ("b.bin", "binary"), ("c.csv", "csv")):
            code, _, _ = run(capsys, "embed", toy[0], "--random-init", "--config", toy[1],
                             "--seed", 2, "--format", fmt, "--out", tmp_path / name)
            assert code == 0
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        a = dataio.load_embeddings(tmp_path / "a.bin")
        c = dataio.load_embeddings(tmp_path / "c.csv")
        assert a.shape == (24, 6)
        np.testing.assert_array_equal(a, c.astype(np.float32))

    def test_dim_mismatch(self, toy, tmp_path, capsys):
        run(capsys, "train", toy[0], "--config", toy[1], "--out", tmp_path / "r")
        other = tmp_path / "other.json"
        d = random_dataset(np.random.default_rng(1), n=24, m=10, f=7)
        dataio.save_dataset(d, other)
        code, _, err = run(capsys, "embed", other, "--model", tmp_path / "r" / "model.npz",
                           "--out", tmp_path / "e.bin")
        assert code == 3 and "ShapeError" in err

    def test_missing_splits(self, toy, tmp_path, capsys):
        run(capsys, "embed", toy[0], "--random-init", "--config", toy[1], "--out", tmp_path / "e.bin")
        code, _, err = run(capsys, "eval-classify", toy[0], "--embeddings", tmp_path / "e.bin")
        assert code == 2 and "split" in err

    def test_bundled_config_name(self, tmp_path, capsys):
        code, _, _ = run(capsys, "train", DATA / "zoo.json", "--config", "zoo", "--epochs", 1,
                         "--out", tmp_path / "z")
        s = dataio.load_run_summary(tmp_path / "z" / "summary.json")
        assert code == 0 and s["config"]["w_g"] == 2 and s["config"]["node_emb_dim"] == 128
