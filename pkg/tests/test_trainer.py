import numpy as np
import pytest

from causalfield.errors import NumericalError, ParameterError
from causalfield.gsm_init import JointGsmMixture, em_fit, to_mcgsm
from causalfield.mcgsm import log_density, random_params
from causalfield.neighborhoods import PatchDataset
from causalfield.trainer import TrainConfig, refine, train
from oracles import random_spd
from test_gsm_init import sample_joint


def as_dataset(V, din):
    m = V.mean(axis=0)
    return PatchDataset(V[:, :din] - m[:din], V[:, din:] - m[din:], m[:din], m[din:])


def heldout(params, V, din):
    X, Y = V[:, :din] - params.input_mean, V[:, din:] - params.output_mean
    return log_density(params, X, Y).mean()


class TestConfig:
    @pytest.mark.parametrize("kw", [{"gtol": 0}, {"val_fraction": 1.0}, {"c1": 0.95}])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            TrainConfig(**kw)


class TestTrain:
    def test_recovers_generator(self):
        rng = np.random.default_rng(2)
        Sigma = np.stack([random_spd(rng, 5), random_spd(rng, 5, ridge=0.2)])
        gen_joint = JointGsmMixture(Sigma, np.log([[0.3, 3.0], [0.6, 1.6]]))
        gen = to_mcgsm(gen_joint, 4, 1)
        V = sample_joint(gen_joint, 100_000, rng)
        test = sample_joint(gen_joint, 100_000, rng)
        params, trace = train(as_dataset(V, 4), 2, 2, TrainConfig(seed=0))
        truth = log_density(gen, test[:, :4], test[:, 4:]).mean()
        assert truth - heldout(params, test, 4) < 0.02

    def test_linear_regression(self, rng):
        Sigma = random_spd(rng, 4)
        V = rng.multivariate_normal(np.zeros(4), Sigma, size=20_000) + [1.0, -2.0, 0.5, 3.0]
        d = as_dataset(V, 3)
        params, _ = train(d, 1, 1, TrainConfig(val_fraction=0, gtol=1e-9))
        X, Y = d.inputs, d.outputs
        A = np.linalg.lstsq(X, Y, rcond=None)[0].T
        resid = Y - X @ A.T
        np.testing.assert_allclose(params.A[0], A, atol=1e-4)
        np.testing.assert_allclose(params.M[0], np.linalg.inv(resid.T @ resid / len(Y)), rtol=1e-4)

    def test_zero_iterations_returns_init(self, rng):
        V = rng.standard_t(5, size=(2000, 4))
        d = as_dataset(V, 3)
        init = to_mcgsm(em_fit(d, 2, 2, rng=0), 3, 1, d.input_mean, d.output_mean)
        out, trace = refine(init, d, TrainConfig(max_iters=0))
        assert out is init
        assert len(trace.objective) == 1

    def test_trace_monotone_and_deterministic(self, rng):
        V = rng.standard_t(5, size=(3000, 5))
        d = as_dataset(V, 4)
        cfg = TrainConfig(max_iters=60, val_fraction=0, seed=4)
        p1, t1 = train(d, 2, 2, cfg)
        p2, t2 = train(d, 2, 2, cfg)
        assert np.all(np.diff(t1.objective) >= -1e-10)
        assert t1.status in ("converged", "max_iters")
        if t1.status == "converged":
            assert t1.grad_norm[-1] <= cfg.gtol
        assert np.array_equal(p1.A, p2.A) and t1.objective == t2.objective

    def test_validation_selects_best(self, rng):
        V = rng.standard_t(4, size=(2000, 5))
        _, trace = train(as_dataset(V, 4), 2, 2, TrainConfig(max_iters=50, patience=5, seed=1))
        assert trace.validation
        assert trace.validation[trace.best_iter] == max(trace.validation)

    def test_empty(self):
        d = PatchDataset(np.zeros((0, 2)), np.zeros((0, 1)), np.zeros(2), np.zeros(1))
        with pytest.raises(ParameterError):
            train(d, 1, 1)

    def test_nonfinite_start(self, rng):
        p = random_params(1, 1, 2, 1, rng)
        p.A[0, 0, 0] = np.nan
        d = as_dataset(rng.standard_normal((100, 3)), 2)
        with pytest.raises(NumericalError):
            refine(p, d)
