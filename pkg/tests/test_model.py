"""Encoder and connectivity model: padding, masking, FiLM, determinism and
gradient flow."""

import numpy as np
import pytest

from bridgerec.autodiff import Tape, Tensor
from bridgerec.errors import ContractError, NumericError
from bridgerec.model import Model, ModelConfig, pad_histories, time_features

CFG = ModelConfig(vocab=12, dim=16, blocks=2, max_len=6, dropout=0.2)


def make_model(seed=0, **overrides):
    import dataclasses
    return Model(dataclasses.replace(CFG, **overrides), seed=seed)


class TestPadding:
    def test_left_pad_and_truncate(self):
        ids, lengths = pad_histories([[3], [1, 2, 3, 4, 5, 6, 7]], max_len=4)
        assert ids.shape == (2, 4)
        assert list(ids[0]) == [0, 0, 0, 3]
        assert list(ids[1]) == [4, 5, 6, 7]  # most recent items kept
        assert list(lengths) == [1, 4]

    def test_empty_history_rejected(self):
        with pytest.raises(ContractError):
            pad_histories([[]], max_len=4)


class TestEncoder:
    def test_output_shape(self):
        model = make_model()
        out = model.encode([[1, 2], [3, 4, 5], [6]])
        assert out.data.shape == (3, CFG.dim)

    def test_eval_deterministic(self):
        model = make_model()
        h = [[1, 2, 3], [4, 5]]
        assert np.array_equal(model.encode(h).data, model.encode(h).data)

    def test_dropout_varies_by_step_but_not_run(self):
        model = make_model()
        h = [[1, 2, 3]]
        a = model.encode(h, train=True, step=0).data
        b = model.encode(h, train=True, step=0).data
        c = model.encode(h, train=True, step=1).data
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_pad_slots_cannot_leak(self):
        """Garbage item ids in masked pad positions must not change the
        encoding (attention gives them exactly zero weight and the readout
        only looks at the last position)."""
        model = make_model()
        ids, lengths = pad_histories([[7, 8]], max_len=6)
        base = model._encode_padded(ids, lengths, None, False, 0).data
        ids2 = ids.copy()
        ids2[0, :4] = [11, 3, 5, 9]  # overwrite the four pad slots
        poisoned = model._encode_padded(ids2, lengths, None, False, 0).data
        assert np.array_equal(base, poisoned)

    def test_order_sensitivity(self):
        model = make_model()
        a = model.encode([[1, 2, 3]]).data
        b = model.encode([[3, 2, 1]]).data
        assert not np.allclose(a, b)

    def test_batch_matches_single(self):
        model = make_model()
        hs = [[1, 2, 3], [4, 5], [6, 7, 8, 9]]
        batch = model.encode(hs).data
        for i, h in enumerate(hs):
            single = model.encode([h]).data
            assert np.allclose(batch[i], single[0], atol=1e-12)


class TestConditioning:
    def test_film_is_identity_at_init(self):
        """The modulation head starts at zeros, so conditional and
        unconditional encodings coincide bitwise before training."""
        model = make_model(k_clusters=3)
        hs = [[1, 2, 3], [4, 5]]
        cond = np.array([[1.0, 0, 0], [0, 0, 1.0]])
        a = model.encode_conditional(hs, cond).data
        b = model.encode(hs).data
        assert np.array_equal(a, b)

    def test_film_differs_after_weight_change(self):
        model = make_model(k_clusters=3)
        model.params["film.w"].data[:] = 0.3
        hs = [[1, 2, 3]]
        a = model.encode_conditional(hs, np.array([[1.0, 0, 0]])).data
        b = model.encode(hs).data
        assert not np.allclose(a, b)

    def test_one_hot_rows_validated(self):
        model = make_model(k_clusters=2)
        with pytest.raises(ContractError):
            model.encode_conditional([[1]], np.array([[0.5, 0.5]]))
        with pytest.raises(ContractError):
            model.encode_conditional([[1]], np.array([[1.0, 1.0]]))

    def test_condition_requires_pathway(self):
        model = make_model()  # k_clusters=0
        with pytest.raises(ContractError):
            model.encode_conditional([[1]], np.array([[1.0]]))


class TestTimeFeatures:
    def test_shape_and_t0(self):
        tf = time_features(np.array([0.0]), 16)
        assert tf.shape == (1, 16)
        assert np.allclose(tf[0, :8], 0.0)   # sin half
        assert np.allclose(tf[0, 8:], 1.0)   # cos half

    def test_distinct_times_distinct_features(self):
        tf = time_features(np.array([0.0, 30.0, 100.0]), 16)
        assert not np.allclose(tf[0], tf[1])
        assert not np.allclose(tf[1], tf[2])


class TestPrediction:
    def test_shapes_and_eval_scale_default(self, rng):
        model = make_model()
        x_t = rng.normal(size=(3, CFG.dim))
        x1 = rng.normal(size=(3, CFG.dim))
        out = model.predict_x0(x_t, np.full(3, 0.5), x1)
        assert out.data.shape == (3, CFG.dim)

    def test_nonfinite_inputs_rejected(self, rng):
        model = make_model()
        x = rng.normal(size=(2, CFG.dim))
        bad = x.copy()
        bad[0, 0] = np.nan
        with pytest.raises(NumericError):
            model.predict_x0(bad, np.full(2, 0.5), x)

    def test_score_is_dot_product(self, rng):
        model = make_model()
        x0_hat = rng.normal(size=(2, CFG.dim))
        scores = model.score_candidates(Tensor(x0_hat)).data
        want = x0_hat @ model.params["item_emb"].data.T
        assert np.allclose(scores, want, atol=1e-12)

    def test_cosine_retrieval_scale_invariant(self, rng):
        model = make_model(retrieval="cosine")
        x0_hat = rng.normal(size=(1, CFG.dim))
        s1 = model.score_candidates(Tensor(x0_hat)).data
        model.params["item_emb"].data *= 7.5
        s2 = model.score_candidates(Tensor(x0_hat)).data
        top1 = np.argmax(s1, axis=-1)
        assert np.array_equal(top1, np.argmax(s2, axis=-1))

    def test_project_x0_lands_in_embedding_hull(self, rng):
        model = make_model()
        raw = 50.0 * rng.normal(size=(4, CFG.dim))
        proj = model.project_x0(raw)
        emb = model.params["item_emb"].data
        assert np.all(np.linalg.norm(proj, axis=1) <= np.linalg.norm(emb, axis=1).max() + 1e-12)

    def test_project_x0_sharpens_to_top_item(self):
        model = make_model()
        emb = model.params["item_emb"].data
        raw = 1e4 * emb[3:4]  # overwhelming preference for item 3
        proj = model.project_x0(raw)
        assert np.allclose(proj[0], emb[3], atol=1e-8)


class TestStateAndGradients:
    def test_state_dict_round_trip(self):
        a = make_model(seed=1, k_clusters=2)
        b = make_model(seed=2, k_clusters=2)
        b.load_state_dict(a.state_dict())
        for k in a.params:
            assert np.array_equal(a.params[k].data, b.params[k].data), k

    def test_all_groups_receive_gradient(self, rng):
        import bridgerec.autodiff as ad
        model = make_model(k_clusters=2)
        model.params["film.w"].data[:] = 0.05  # make FiLM non-trivial
        hs = [[1, 2, 3], [4, 5]]
        cond = np.array([[1.0, 0], [0, 1.0]])
        targets = np.array([2, 7])
        with Tape() as tape:
            x1 = model.encode_conditional(hs, cond, train=True, step=0)
            x0_hat = model.predict_x0(Tensor(rng.normal(size=(2, CFG.dim))),
                                      np.full(2, 0.3), x1, train=True, step=0)
            loss = ad.cross_entropy_with_logits(model.score_candidates(x0_hat), targets)
            tape.backward(loss)
        groups = {"item_emb": ["item_emb"],
                  "positions": ["pos_emb"],
                  "encoder": [n for n in model.params if n.startswith("enc0.")],
                  "film": ["film.w", "film.b"],
                  "mlp": [n for n in model.params if n.startswith("mlp.")]}
        for group, names in groups.items():
            assert any(np.any(model.params[n].grad != 0) for n in names), group
