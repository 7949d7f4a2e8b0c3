import numpy as np
import pytest

from causalfield.errors import ParameterError
from causalfield.mcgsm import McgsmParams, random_params
from causalfield.multiscale import Level, MultiscaleModel, image_log_likelihood
from causalfield.neighborhoods import PatchDataset, causal_mask, extract_pairs, superpixel_mask
from causalfield.rates import (RateReport, combine_rates, conditional_cross_entropy, cross_mir,
                               kde_heldout_logpdf, marginal_entropy)

GAUSS_BITS = 0.5 * np.log2(2 * np.pi * np.e)


def iid_gaussian_model(M):
    coarse = McgsmParams(np.zeros((1, 0, 0)), np.ones((1, 1, 1)), np.zeros((1, 1, 0)), np.zeros((1, 1)))
    fine_mask = superpixel_mask(1)
    fine = McgsmParams(np.ones((1, 1, 1)), np.eye(3)[None], np.zeros((1, 3, 1)), np.zeros((1, 1)))
    return MultiscaleModel(Level(coarse, causal_mask(0, 1)), [Level(fine.copy(), fine_mask) for _ in range(M)])


def rescaled(params, t):
    """Parameters of the same model for data multiplied by t."""
    p = params.copy()
    p.chol_K, p.chol_M = params.chol_K / t, params.chol_M / t
    p.input_mean, p.output_mean = t * params.input_mean, t * params.output_mean
    return p


class TestCrossEntropy:
    def test_standard_normal(self, rng):
        p = iid_gaussian_model(0).coarse.params
        d = PatchDataset(np.zeros((100_000, 0)), rng.standard_normal((100_000, 1)), np.zeros(0), np.zeros(1))
        bits, se = conditional_cross_entropy(p, d)
        assert abs(bits - GAUSS_BITS) < 4 * se
        assert se > 0

    def test_mismatched_model_worse(self, rng):
        gen = random_params(2, 2, 3, 1, rng)
        from causalfield.mcgsm import ConditionalSampler
        draw = ConditionalSampler(gen)
        X = rng.standard_normal((20_000, 3))
        Y = np.array([draw(x, rng) for x in X])
        d = PatchDataset(X, Y, np.zeros(3), np.zeros(1))
        wrong = gen.copy()
        wrong.A = gen.A + 0.3
        matched, _ = conditional_cross_entropy(gen, d)
        worse, _ = conditional_cross_entropy(wrong, d)
        from causalfield.mcgsm import log_density
        diff = log_density(gen, X, Y) - log_density(wrong, X, Y)
        assert worse - matched > 4 * diff.std() / np.sqrt(len(diff)) / np.log(2)

    def test_empty(self):
        d = PatchDataset(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros(0), np.zeros(1))
        with pytest.raises(ParameterError):
            conditional_cross_entropy(iid_gaussian_model(0).coarse.params, d)


class TestMarginalEntropy:
    def test_gaussian(self, rng):
        assert marginal_entropy(rng.standard_normal(100_000)) == pytest.approx(GAUSS_BITS, abs=0.02)

    def test_uniform(self, rng):
        assert marginal_entropy(rng.random(100_000)) == pytest.approx(0.0, abs=0.02)

    def test_scaling_adds_one_bit(self, rng):
        x = rng.laplace(size=100_000)
        assert marginal_entropy(2 * x) - marginal_entropy(x) == pytest.approx(1.0, abs=0.03)

    def test_too_few(self, rng):
        with pytest.raises(ParameterError):
            marginal_entropy(rng.standard_normal(9_999))

    def test_bandwidth_grid(self, rng):
        x = rng.standard_normal(20_000)
        _, h = kde_heldout_logpdf(x, return_bandwidth=True)
        assert 0.01 * x.std() <= h <= x.std()

    def test_kde_matches_direct_sum(self, rng):
        from causalfield.rates import _kde_grid_logpdf
        from scipy.stats import norm
        from scipy.special import logsumexp
        train, test = rng.standard_normal(3000), rng.standard_normal(200) * 2
        h = 0.2
        direct = logsumexp(norm.logpdf(test[:, None], train[None], h), axis=1) - np.log(len(train))
        err = np.abs(_kde_grid_logpdf(train, test, h) - direct)
        # linear binning is second-order accurate; the error grows only in the far tails
        assert err.mean() < 1e-3
        assert err[np.abs(test) < 2.5].max() < 1e-3
        assert err.max() < 0.05


class TestCombine:
    def test_no_levels(self):
        assert combine_rates(1.7, [], 0) == 1.7

    def test_one_level(self):
        # per-channel rates times three give the per-superpixel rate
        detail = 3 * (-2.321 / 3)
        assert combine_rates(0.9, [detail], 1) == pytest.approx((-2.321 + 0.9) / 4)

    def test_wrong_length(self):
        with pytest.raises(ParameterError):
            combine_rates(1.0, [1.0], 2)

    def test_matches_full_likelihood(self, rng):
        cm, fm = causal_mask(1, 3), superpixel_mask(3)
        model = MultiscaleModel(Level(random_params(2, 2, 4, 1, rng), cm),
                                [Level(random_params(2, 2, 21, 3, rng), fm) for _ in range(2)])
        img = rng.standard_normal((16, 16))
        total, per_level = image_log_likelihood(model, img)
        bits = [-v.mean() / np.log(2) for v in per_level]
        combined = combine_rates(bits[0], bits[1:], 2)
        assert combined == pytest.approx(-total / img.size / np.log(2), rel=1e-8)


@pytest.fixture(scope="module")
def white_report():
    rng = np.random.default_rng(0)
    images = [rng.standard_normal((64, 64)) for _ in range(12)]
    return cross_mir(iid_gaussian_model(2), images, n_boot=50)


class TestCrossMir:
    def test_white_noise_zero(self, white_report):
        assert white_report.cross_mir == pytest.approx(0.0, abs=0.03)
        assert white_report.entropy_rate == pytest.approx(GAUSS_BITS, abs=0.03)

    def test_report_invariants(self, white_report):
        r = white_report
        assert r.cross_mir == r.marginal_entropy - r.entropy_rate
        assert all(se >= 0 for se in [r.cross_mir_se, r.coarse_se, *r.detail_se, *r.scale_mir_se])
        assert r.detail_rates_per_channel == [d / 3 for d in r.detail_rates]
        assert r.entropy_rate == pytest.approx(combine_rates(r.coarse_rate, r.detail_rates, 2))
        assert len(r.scale_mir) == 3

    def test_text_round_trip(self, white_report):
        assert RateReport.from_text(white_report.to_text()) == white_report

    def test_scale_invariance(self, rng):
        cm, fm = causal_mask(1, 3), superpixel_mask(3)
        model = MultiscaleModel(Level(random_params(2, 2, 4, 1, rng), cm),
                                [Level(random_params(2, 2, 21, 3, rng), fm)])
        images = [rng.standard_normal((64, 64)) for _ in range(4)]
        t = 3.0
        big = MultiscaleModel(Level(rescaled(model.coarse.params, t), cm),
                              [Level(rescaled(model.details[0].params, t), fm)])
        a = cross_mir(model, images, n_boot=10)
        b = cross_mir(big, [t * im for im in images], n_boot=10)
        assert b.marginal_entropy - a.marginal_entropy == pytest.approx(np.log2(t), abs=1e-6)
        assert b.entropy_rate - a.entropy_rate == pytest.approx(np.log2(t), abs=1e-6)
        assert b.cross_mir == pytest.approx(a.cross_mir, abs=1e-6)

    def test_no_images(self):
        with pytest.raises(ParameterError):
            cross_mir(iid_gaussian_model(1), [])
