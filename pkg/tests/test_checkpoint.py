"""Checkpoint round-trips, the text-manifest format, and corruption handling."""

import numpy as np
import pytest

from bridgerec.checkpoint import VERSION_TAG, check_vocab, load, save
from bridgerec.cluster import ClusterModel
from bridgerec.data import Dataset, split
from bridgerec.errors import ContractError, IngestError
from bridgerec.model import Model, ModelConfig
from bridgerec.sampler import SamplerConfig
from bridgerec.schedule import ScheduleParams
from bridgerec.trainer import evaluate


def make_checkpoint(tmp_path, with_cluster=False, seed=5):
    cfg = ModelConfig(vocab=9, dim=12, blocks=1, max_len=5, dropout=0.25,
                      k_clusters=2 if with_cluster else 0)
    model = Model(cfg, seed=seed)
    sched = ScheduleParams(kind="vp", beta0=0.02, beta1=17.5)
    samp = SamplerConfig(mode="ode", steps=7, guidance_w=0.3, seed=11)
    cluster = None
    if with_cluster:
        centers = np.random.default_rng(0).normal(size=(2, 4))
        cluster = ClusterModel(centers=centers, labels=np.array([0, 1, 1, 0]))
    p = tmp_path / "model.ckpt"
    save(p, model, sched, samp, cluster=cluster)
    return p, model, sched, samp, cluster


class TestRoundTrip:
    def test_exact_weights_and_settings(self, tmp_path):
        p, model, sched, samp, _ = make_checkpoint(tmp_path)
        loaded, sched2, samp2, cluster2 = load(p)
        assert loaded.config == model.config
        assert sched2 == sched
        assert samp2 == samp
        assert cluster2 is None
        for name, arr in model.state_dict().items():
            assert np.array_equal(loaded.state_dict()[name], arr), name

    def test_cluster_round_trip(self, tmp_path):
        p, *_, cluster = make_checkpoint(tmp_path, with_cluster=True)
        _, _, _, cluster2 = load(p)
        assert np.array_equal(cluster2.centers, cluster.centers)
        assert np.array_equal(cluster2.labels, cluster.labels)

    def test_save_load_save_is_byte_identical(self, tmp_path):
        p, model, sched, samp, _ = make_checkpoint(tmp_path)
        loaded, sched2, samp2, _ = load(p)
        p2 = tmp_path / "again.ckpt"
        save(p2, loaded, sched2, samp2)
        assert p.read_bytes() == p2.read_bytes()

    def test_loaded_model_evaluates_identically(self, tmp_path):
        ds = Dataset.from_sequences(
            [0, 1, 2], [[0, 1, 2, 3, 4], [5, 6, 7, 8, 0], [2, 4, 6, 8, 1]])
        sv = split(ds)
        p, model, sched, samp, _ = make_checkpoint(tmp_path)
        loaded, sched2, samp2, _ = load(p)
        a = evaluate(model, sv, ds.num_items, sched, samp, which="test")
        b = evaluate(loaded, sv, ds.num_items, sched2, samp2, which="test")
        assert a.values == b.values


class TestFormat:
    def test_header_is_the_version_tag(self, tmp_path):
        p, *_ = make_checkpoint(tmp_path)
        first = p.read_bytes().split(b"\n", 1)[0]
        assert first.decode() == VERSION_TAG == "bridgerec-ckpt-v1"

    def test_wrong_tag_rejected(self, tmp_path):
        p = tmp_path / "bad.ckpt"
        p.write_bytes(b"some-other-format-v9\nmeta vocab 3\n")
        with pytest.raises(IngestError, match="not a bridgerec-ckpt-v1"):
            load(p)

    def test_truncated_blob_rejected(self, tmp_path):
        p, *_ = make_checkpoint(tmp_path)
        raw = p.read_bytes()
        p.write_bytes(raw[:-16])
        with pytest.raises(IngestError, match="blob size mismatch"):
            load(p)

    def test_unknown_meta_key_rejected(self, tmp_path):
        p, *_ = make_checkpoint(tmp_path)
        raw = p.read_bytes()
        head, rest = raw.split(b"\n", 1)
        p.write_bytes(head + b"\nmeta warp_factor 9\n" + rest)
        with pytest.raises(IngestError, match="unknown meta key"):
            load(p)

    def test_missing_tensor_rejected(self, tmp_path):
        p, *_ = make_checkpoint(tmp_path)
        lines = p.read_bytes().split(b"\n")
        kept = [l for l in lines if not l.startswith(b"tensor item_emb ")]
        p.write_bytes(b"\n".join(kept))
        with pytest.raises(IngestError, match="parameter set mismatch"):
            load(p)

    def test_bad_meta_value_rejected(self, tmp_path):
        p, *_ = make_checkpoint(tmp_path)
        raw = p.read_bytes()
        p.write_bytes(raw.replace(b"meta dim 12", b"meta dim twelve"))
        with pytest.raises(IngestError, match="bad value for meta dim"):
            load(p)


class TestVocabCheck:
    def test_smaller_vocab_rejected(self):
        model = Model(ModelConfig(vocab=5, dim=8, blocks=1, max_len=4), seed=0)
        with pytest.raises(ContractError, match="vocabulary"):
            check_vocab(model, 9)

    def test_equal_or_larger_ok(self):
        model = Model(ModelConfig(vocab=5, dim=8, blocks=1, max_len=4), seed=0)
        check_vocab(model, 5)
        check_vocab(model, 3)
