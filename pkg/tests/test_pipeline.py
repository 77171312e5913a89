import json

import numpy as np
import pytest
from PIL import Image

from provenance.cli import main
from provenance.errors import ValidationError
from provenance.interchange import Label, RecordMeta, write_embedding_file
from provenance.ledger import Ledger, embed_hash
from provenance.pipeline import Engine, FrameworkMode
from provenance.vecstore import Store

from conftest import build_engine_root, make_corpus, random_unit_vectors


class TestEngineIngest:
    def test_counts_and_ledger_population(self, engine_root):
        root, _, _ = engine_root
        store = Store(root)
        assert store.open_collection("ai").count("train") == 20
        assert store.open_collection("human").count("train") == 20
        assert len(Ledger.open(root / "ledgers" / "ai.lgr")) == 20
        assert len(Ledger.open(root / "ledgers" / "human.lgr")) == 20

    def test_reingest_is_idempotent_and_reported(self, tmp_path, engine_root, caplog):
        import logging

        root, ai_vecs, _ = engine_root
        path = tmp_path / "again.emb"
        write_embedding_file(
            [(RecordMeta(f"ai{i:03d}", f"ai{i:03d}.png", Label.AI, "train"), ai_vecs[i]) for i in range(20)],
            path,
        )
        engine = Engine(root, FrameworkMode.HYBRID)
        with caplog.at_level(logging.WARNING, logger="provenance.pipeline"):
            count = engine.ingest(path, "ai")
        assert count == 20
        assert any("replaced 20 existing records" in r.message for r in caplog.records)
        store = Store(root)
        assert store.open_collection("ai").count("train") == 20
        assert len(Ledger.open(root / "ledgers" / "ai.lgr")) == 20

    def test_reference_corpus_scale_ingest(self, tmp_path):
        # 7,000 per side, hashed into the matching ledgers
        n, dim = 7000, 32
        for label, prefix in ((Label.AI, "ai"), (Label.HUMAN, "hu")):
            vecs = random_unit_vectors(n, dim, seed=len(prefix))
            path = tmp_path / f"{prefix}.emb"
            write_embedding_file(
                [(RecordMeta(f"{prefix}{i:05d}", f"{prefix}{i:05d}.png", label, "train"), vecs[i])
                 for i in range(n)],
                path,
            )
        engine = Engine(tmp_path / "root", FrameworkMode.HYBRID, gas_seed=1)
        assert engine.ingest(tmp_path / "ai.emb", "ai") == n
        assert engine.ingest(tmp_path / "hu.emb", "human") == n
        store = Store(tmp_path / "root")
        assert store.open_collection("ai").count("train") == n
        assert store.open_collection("human").count("train") == n
        assert len(Ledger.open(tmp_path / "root" / "ledgers" / "ai.lgr")) == n
        assert len(Ledger.open(tmp_path / "root" / "ledgers" / "human.lgr")) == n

    def test_empty_file_leaves_store_untouched(self, tmp_path):
        path = tmp_path / "none.emb"
        write_embedding_file([], path)
        engine = Engine(tmp_path / "root", FrameworkMode.HYBRID)
        assert engine.ingest(path, "ai") == 0
        assert not (tmp_path / "root" / "ai").exists()

    def test_vector_only_ingest_skips_ledgers(self, tmp_path):
        vecs = random_unit_vectors(3, 8, seed=1)
        path = tmp_path / "v.emb"
        write_embedding_file(
            [(RecordMeta(f"a{i}", f"a{i}.png", Label.AI, "train"), vecs[i]) for i in range(3)], path
        )
        engine = Engine(tmp_path / "root", FrameworkMode.VECTOR_ONLY)
        assert engine.ingest(path, "ai") == 3
        assert not (tmp_path / "root" / "ledgers").exists()

    def test_dim_mismatch_rejected(self, tmp_path, engine_root):
        root, _, _ = engine_root
        path = tmp_path / "wrong.emb"
        write_embedding_file(
            [(RecordMeta("x", "x.png", Label.AI, "train"), np.ones(8, np.float32))], path
        )
        with pytest.raises(ValidationError, match="dim"):
            Engine(root, FrameworkMode.HYBRID).ingest(path, "ai")

    def test_mixed_labels_cannot_create_collection(self, tmp_path):
        path = tmp_path / "mixed.emb"
        write_embedding_file(
            [
                (RecordMeta("a", "a.png", Label.AI, "train"), np.ones(4, np.float32)),
                (RecordMeta("b", "b.png", Label.HUMAN, "train"), -np.ones(4, np.float32)),
            ],
            path,
        )
        with pytest.raises(ValidationError, match="mixes labels"):
            Engine(tmp_path / "root", FrameworkMode.HYBRID).ingest(path, "new")


class TestEngineClassify:
    def test_hash_only_stored_vector(self, engine_root):
        root, ai_vecs, _ = engine_root
        engine = Engine(root, FrameworkMode.HASH_ONLY)
        resp = engine.classify_vector(ai_vecs[0])
        assert resp.prediction == "ai"
        assert resp.verified is True
        d = resp.to_dict()
        assert "human_similarity" not in d and "ai_similarity" not in d

    def test_hash_only_unseen_vector_is_undetermined(self, engine_root):
        root, _, _ = engine_root
        engine = Engine(root, FrameworkMode.HASH_ONLY)
        probe = random_unit_vectors(1, 64, seed=999)[0]
        resp = engine.classify_vector(probe)
        assert resp.prediction == "undetermined"
        assert resp.verified is False

    def test_vector_only_has_no_verified_field(self, engine_root):
        root, ai_vecs, _ = engine_root
        engine = Engine(root, FrameworkMode.VECTOR_ONLY)
        d = engine.classify_vector(ai_vecs[1]).to_dict()
        assert d["prediction"] == "ai"
        assert "verified" not in d
        assert d["ai_similarity"] == pytest.approx(1.0, abs=1e-6)

    def test_hybrid_near_miss_is_unverified(self, engine_root):
        root, ai_vecs, _ = engine_root
        engine = Engine(root, FrameworkMode.HYBRID)
        nudged = ai_vecs[2].copy()
        nudged[0] = np.nextafter(nudged[0], np.float32(2.0))
        resp = engine.classify_vector(nudged)
        assert resp.prediction == "ai"
        assert resp.verified is False

    def test_hybrid_verdict_always_matches_vector_only(self, engine_root):
        root, _, _ = engine_root
        hybrid = Engine(root, FrameworkMode.HYBRID)
        vector = Engine(root, FrameworkMode.VECTOR_ONLY)
        for probe in random_unit_vectors(25, 64, seed=55):
            assert hybrid.classify_vector(probe).prediction == vector.classify_vector(probe).prediction

    def test_hybrid_conflict_flag(self, tmp_path, engine_root):
        root, _, hu_vecs = engine_root
        # plant a human vector's hash in the AI ledger to force a conflict
        engine = Engine(root, FrameworkMode.HYBRID)
        engine.ledger(Label.AI).store_hash(embed_hash(hu_vecs[0]))
        resp = engine.classify_vector(hu_vecs[0])
        assert resp.prediction == "human"
        assert resp.verified is True
        assert resp.to_dict().get("conflict") is True

    def test_health_reports_generations_and_chain(self, engine_root):
        root, _, _ = engine_root
        health = Engine(root, FrameworkMode.HYBRID).health()
        assert health["status"] == "ok"
        assert health["chain_status"] == "valid"
        assert health["collections"]["ai"]["counts"]["train"] == 20
        assert health["ledgers"]["ai"]["entries"] == 20


class TestCli:
    def _emb_file(self, base, n=5, dim=16, label=Label.AI, prefix="a"):
        vecs = random_unit_vectors(n, dim, seed=777)
        path = base / f"{prefix}.emb"
        write_embedding_file(
            [(RecordMeta(f"{prefix}{i}", f"{prefix}{i}.png", label, "train"), vecs[i]) for i in range(n)],
            path,
        )
        return path, vecs

    def test_ingest_and_classify_roundtrip(self, tmp_path, capsys):
        root = tmp_path / "root"
        ai_path, ai_vecs = self._emb_file(tmp_path, label=Label.AI, prefix="a")
        hu_path, _ = self._emb_file(tmp_path, label=Label.HUMAN, prefix="h")
        assert main(["--root", str(root), "ingest", str(ai_path), "--collection", "ai"]) == 0
        assert main(["--root", str(root), "ingest", str(hu_path), "--collection", "human"]) == 0
        capsys.readouterr()

        query = tmp_path / "q.json"
        query.write_text(json.dumps({"dim": 16, "components": [float(x) for x in ai_vecs[0]],
                                     "source_name": "probe.png"}))
        assert main(["--root", str(root), "classify", str(query)]) == 0
        out = capsys.readouterr().out
        resp = json.loads(out.strip())
        assert resp["prediction"] == "ai"
        assert resp["verified"] is True

    def test_classify_embedding_file_with_report(self, tmp_path, capsys):
        root = tmp_path / "root"
        ai_path, _ = self._emb_file(tmp_path, label=Label.AI, prefix="a")
        hu_path, _ = self._emb_file(tmp_path, label=Label.HUMAN, prefix="h")
        main(["--root", str(root), "ingest", str(ai_path), "--collection", "ai"])
        main(["--root", str(root), "ingest", str(hu_path), "--collection", "human"])
        capsys.readouterr()
        report = tmp_path / "report.csv"
        assert main(["--root", str(root), "classify", str(ai_path), "--report", str(report)]) == 0
        out = capsys.readouterr().out
        assert len(out.strip().splitlines()) == 5
        lines = report.read_text().splitlines()
        assert lines[0].startswith("filename,true_label")
        assert len(lines) == 6

    def test_single_vector_report_has_no_true_label(self, tmp_path, capsys, engine_root):
        root, ai_vecs, _ = engine_root
        query = tmp_path / "q.json"
        query.write_text(json.dumps({"dim": 64, "components": [float(x) for x in ai_vecs[0]],
                                     "source_name": "probe.png"}))
        report = tmp_path / "single.csv"
        assert main(["--root", str(root), "classify", str(query), "--report", str(report)]) == 0
        capsys.readouterr()
        row = report.read_text().splitlines()[1]
        assert row.startswith("probe.png,,")  # empty true_label column

    def test_gas_table_and_determinism(self, capsys):
        assert main(["--seed", "7", "gas", "string", "-n", "50"]) == 0
        out1 = capsys.readouterr().out
        assert "mean,97667.00" in out1
        assert main(["--seed", "7", "gas", "uint256", "-n", "50"]) == 0
        out2 = capsys.readouterr().out
        assert main(["--seed", "7", "gas", "uint256", "-n", "50"]) == 0
        assert capsys.readouterr().out == out2

    def test_bench_grid_from_images(self, tmp_path, capsys):
        corpus = make_corpus(6, size=160, seed=4)
        img_dir = tmp_path / "imgs"
        img_dir.mkdir()
        for name, arr in corpus.items():
            Image.fromarray(arr).save(img_dir / name)
        grid_path = tmp_path / "grid.csv"
        detail_path = tmp_path / "detail.csv"
        assert main(["--seed", "3", "bench", "--images", str(img_dir),
                     "--out", str(grid_path), "--detail", str(detail_path)]) == 0
        capsys.readouterr()
        lines = grid_path.read_text().splitlines()
        assert lines[0] == "perturbation,total,correct,accuracy_percent"
        rows = [l.split(",") for l in lines[1:]]
        assert [r[0] for r in rows] == ["identity", "single_patch", "multi_patch", "resize",
                                        "blur20", "blur40", "blur60", "blur80"]
        assert rows[0][3] == "100.00"
        assert all(r[1] == "6" for r in rows)
        assert len(detail_path.read_text().splitlines()) == 1 + 8 * 6

    def test_bench_from_files(self, tmp_path, capsys):
        orig, vecs = self._emb_file(tmp_path, n=4, prefix="o")
        mod_path = tmp_path / "mod.emb"
        write_embedding_file(
            [(RecordMeta(f"o{i}#patched", f"o{i}", Label.AI, "patched"), vecs[i]) for i in range(4)],
            mod_path,
        )
        assert main(["bench", "--from-files", str(orig), str(mod_path)]) == 0
        out = capsys.readouterr().out
        assert "patched,4,4,100.00" in out

    def test_ledger_verify_ok_and_corrupt(self, tmp_path, capsys, engine_root):
        root, _, _ = engine_root
        assert main(["--root", str(root), "ledger-verify"]) == 0
        assert "ai: valid" in capsys.readouterr().out
        lgr = root / "ledgers" / "ai.lgr"
        data = bytearray(lgr.read_bytes())
        data[40] ^= 0xFF
        lgr.write_bytes(bytes(data))
        assert main(["--root", str(root), "ledger-verify"]) == 3
        assert "CORRUPT" in capsys.readouterr().out

    def test_usage_error_exit_code(self, capsys):
        assert main(["no-such-command"]) == 1
        assert main(["ingest"]) == 1  # missing required args
        capsys.readouterr()

    def test_data_error_exit_code(self, tmp_path, capsys):
        query = tmp_path / "q.json"
        query.write_text(json.dumps({"dim": 4, "components": [1.0, 0.0, 0.0, 0.0]}))
        code = main(["--root", str(tmp_path / "nothing"), "classify", str(query)])
        assert code == 2
        capsys.readouterr()

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg_root = tmp_path / "from-config"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"root": str(cfg_root), "mode": "vector_only"}))
        ai_path, _ = self._emb_file(tmp_path, prefix="a")
        assert main(["--config", str(cfg), "ingest", str(ai_path), "--collection", "ai"]) == 0
        capsys.readouterr()
        assert (cfg_root / "ai" / "manifest").exists()
        assert not (cfg_root / "ledgers").exists()  # vector_only from config

        flag_root = tmp_path / "from-flag"
        assert main(["--config", str(cfg), "--root", str(flag_root), "--mode", "hybrid",
                     "ingest", str(ai_path), "--collection", "ai"]) == 0
        capsys.readouterr()
        assert (flag_root / "ai" / "manifest").exists()
        assert (flag_root / "ledgers" / "ai.lgr").exists()

    def test_hash_only_report_is_a_usage_error(self, tmp_path, capsys, engine_root):
        root, _, _ = engine_root
        query = tmp_path / "q.json"
        query.write_text(json.dumps({"dim": 64, "components": [1.0] * 64}))
        code = main(["--root", str(root), "--mode", "hash_only", "classify", str(query),
                     "--report", str(tmp_path / "r.csv")])
        assert code == 1
        capsys.readouterr()
