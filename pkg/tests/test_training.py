import numpy as np
import pytest

from hsmgnn import HSMGNN, ModelConfig, TrainConfig, ablate, evaluate, sweep, train
from hsmgnn import training
from hsmgnn.data import SampleSet
from hsmgnn.errors import ConfigError


def synthetic_set(n_samples=24, n=3, t=8, seed=0, task="regression", n_classes=3):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_samples, n, t))
    w = rng.normal(size=(n, t)) * 0.1
    y = np.einsum("bnt,nt->b", x, w)
    if task == "classification":
        y = (np.digitize(y, np.quantile(y, [1 / 3, 2 / 3]))).astype(float)
    return SampleSet(x[:, :, :, None], y, task)


def tiny_cfg(**kw):
    base = dict(n=3, t=8, w_p=4, delta=0.5, d_blocks=2, cnn_hidden=2,
                m_q=2, m_d=3, f_s=4, f_e=4, mlp_widths=(8, 8, 8))
    base.update(kw)
    return ModelConfig(**base)


class TestMetrics:
    def test_perfect_predictions(self):
        r = training.regression_metrics(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert r.mae == r.mse == r.rmse == 0.0

    def test_constant_error(self):
        r = training.regression_metrics(np.array([0.0, 0.0]), np.array([3.0, 3.0]))
        assert r.mse == 9.0 and r.rmse == 3.0 and r.mae == 3.0

    def test_rmse_is_sqrt_mse(self):
        rng = np.random.default_rng(0)
        r = training.regression_metrics(rng.normal(size=50), rng.normal(size=50))
        assert abs(r.rmse ** 2 - r.mse) < 1e-12

    def test_macro_f1_matches_hand_computation(self):
        # confusion: class 0 -> tp=2 fp=1 fn=0; class 1 -> tp=1 fp=1 fn=1;
        # class 2 -> tp=1 fp=0 fn=1
        pred = np.array([0, 0, 0, 1, 1, 2])
        target = np.array([0, 0, 1, 1, 2, 2])
        r = training.classification_metrics(pred, target)
        f1_0 = 2 * (2 / 3) * 1.0 / (2 / 3 + 1.0)
        f1_1 = 2 * 0.5 * 0.5 / (0.5 + 0.5)
        f1_2 = 2 * 1.0 * 0.5 / (1.0 + 0.5)
        assert abs(r.mf1 - (f1_0 + f1_1 + f1_2) / 3) < 1e-12
        assert abs(r.accu - 4 / 6) < 1e-12
        assert 0.0 <= r.accu <= 1.0 and 0.0 <= r.mf1 <= 1.0


class TestTrainLoop:
    def test_seeded_determinism(self):
        sset = synthetic_set()
        tc = TrainConfig(batch_size=8, epochs=3, patience=50, seed=11)
        _, r1 = train(tiny_cfg(), tc, sset, sset)
        _, r2 = train(tiny_cfg(), tc, sset, sset)
        assert r1.loss_curve == r2.loss_curve

    def test_patience_one_frozen_metric_stops_after_two_epochs(self):
        # lr=0 freezes the model, so validation never improves after epoch 1
        sset = synthetic_set()
        tc = TrainConfig(batch_size=8, epochs=50, lr=0.0, patience=1, seed=0)
        _, report = train(tiny_cfg(), tc, sset, sset)
        assert len(report.loss_curve) == 2

    def test_best_checkpoint_retained(self):
        sset = synthetic_set()
        tc = TrainConfig(batch_size=8, epochs=4, lr=1e-2, patience=50, seed=1)
        model, report = train(tiny_cfg(), tc, sset, sset)
        fresh = evaluate(model, sset)
        assert abs(fresh.rmse - report.rmse) < 1e-12

    def test_empty_data_rejected(self):
        sset = synthetic_set(4)
        with pytest.raises(ConfigError):
            train(tiny_cfg(), TrainConfig(), sset.subset(np.array([], dtype=int)), sset)

    def test_classification_training(self):
        sset = synthetic_set(task="classification")
        cfg = tiny_cfg(head="classification", n_classes=3)
        tc = TrainConfig(batch_size=8, epochs=2, patience=10, seed=2)
        model, report = train(cfg, tc, sset, sset)
        assert report.task == "classification"
        assert 0.0 <= report.accu <= 1.0


class TestAblation:
    def test_no_adb_census_lacks_bank(self):
        complete = HSMGNN(tiny_cfg(), seed=0)
        no_adb = HSMGNN(ablate("no-adb", tiny_cfg()), seed=0)
        assert any(k.startswith("adb.") for k in complete.params)
        assert not any(k.startswith("adb.") for k in no_adb.params)

    def test_no_fgcn_drops_euclidean_branch(self):
        no_fgcn = HSMGNN(ablate("no-fgcn", tiny_cfg()), seed=0)
        assert not any(k.startswith("proj_e.") for k in no_fgcn.params)
        # outputs must ignore any Euclidean-branch knobs: the census has none
        assert any(k.startswith("proj_s.") for k in no_fgcn.params)

    def test_no_scs_census(self):
        no_scs = HSMGNN(ablate("no-scs", tiny_cfg()), seed=0)
        assert not any(k.startswith(("cnn.", "adb.", "proj_s.")) for k in no_scs.params)
        assert any(k.startswith("proj_e.") for k in no_scs.params)

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            ablate("no-everything", tiny_cfg())

    @pytest.mark.parametrize("variant", ["complete", "no-scs", "no-adb", "no-fgcn"])
    def test_all_variants_train(self, variant):
        sset = synthetic_set()
        cfg = ablate(variant, tiny_cfg())
        tc = TrainConfig(batch_size=8, epochs=2, patience=10, seed=0)
        model, report = train(cfg, tc, sset, sset)
        assert np.isfinite(report.rmse)


class TestSweep:
    def _sets(self):
        s = synthetic_set()
        return s, s, s

    def test_delta_grid_row_count(self):
        tr, va, te = self._sets()
        tc = TrainConfig(batch_size=8, epochs=1, patience=10, seed=0)
        rows = sweep("delta", [0.1, 0.3, 0.5, 0.7, 0.9], tiny_cfg(), tc, tr, va, te)
        assert len(rows) == 5
        assert [r["value"] for r in rows] == [0.1, 0.3, 0.5, 0.7, 0.9]

    def test_bank_size_grid_accepted(self):
        training.validate_sweep("m_d", [12, 16, 32, 64, 128])
        training.validate_sweep("m_q", [32, 64])

    def test_fusion_weight_pairs(self):
        tr, va, te = self._sets()
        tc = TrainConfig(batch_size=8, epochs=1, patience=10, seed=0)
        rows = sweep("fusion_weights", [(0.2, 0.8), (0.5, 0.5), (0.8, 0.2)],
                     tiny_cfg(), tc, tr, va, te)
        assert len(rows) == 3

    def test_invalid_value_rejected_before_training(self):
        tr, va, te = self._sets()
        with pytest.raises(ConfigError):
            sweep("delta", [0.5, 1.5], tiny_cfg(), TrainConfig(), tr, va, te)

    def test_unknown_param(self):
        with pytest.raises(ConfigError):
            training.validate_sweep("gamma", [1])


class TestModelConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({"n": 3, "t": 8, "frobnicate": True})

    def test_round_trip(self):
        cfg = tiny_cfg(w_s=0.2, w_e=0.8)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg

    def test_checkpoint_round_trip(self, tmp_path):
        model = HSMGNN(tiny_cfg(), seed=3)
        path = tmp_path / "model.hsmg"
        model.save(path)
        other = HSMGNN(tiny_cfg(), seed=4)
        other.load(path)
        for k in model.params:
            assert np.array_equal(model.params[k].data, other.params[k].data)

    def test_checkpoint_mismatch_rejected(self, tmp_path):
        model = HSMGNN(tiny_cfg(), seed=0)
        path = tmp_path / "model.hsmg"
        model.save(path)
        with pytest.raises(ConfigError):
            HSMGNN(ablate("no-adb", tiny_cfg()), seed=0).load(path)
