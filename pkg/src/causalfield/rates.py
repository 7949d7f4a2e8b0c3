"""Cross-entropy rates, marginal entropies and the cross-MIR.

For a stationary Markov random field the entropy rate is a single conditional
entropy, and the multi-information rate (MIR) is the marginal entropy of a
pixel minus the entropy rate. Replacing the entropy rate with a model's
cross-entropy rate gives a lower bound on the MIR, the cross-MIR.

For the multiscale model the rate at scale ``s`` satisfies::

    H[X^s] = H[Y^(s+1) | X^(s+1)] / 4 + H[X^(s+1)] / 4

since a superpixel has four channels and the transform has unit Jacobian.
Everything here is reported in bits.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import logsumexp

from .errors import ParameterError
from .mcgsm import centered, log_density
from .neighborhoods import extract_pairs
from .pyramid import build_pyramid
from .multiscale import level_data

__all__ = [
    "RateReport",
    "conditional_cross_entropy",
    "marginal_entropy",
    "kde_heldout_logpdf",
    "combine_rates",
    "cross_mir",
    "per_image_rates",
]

LN2 = np.log(2)


def conditional_cross_entropy(params, test):
    """Average conditional cross-entropy of held-out pairs under a model.

    Returns ``(bits per output vector, standard error)``.
    """
    if len(test) == 0:
        raise ParameterError("empty dataset")
    X, Y = centered(params, test.raw_inputs, test.raw_outputs)
    ll = log_density(params, X, Y)
    return float(-ll.mean() / LN2), float(ll.std(ddof=1) / np.sqrt(len(ll)) / LN2) if len(ll) > 1 else 0.0


def _kde_grid_logpdf(train, test, h, max_bins=2**21):
    """Gaussian KDE fitted on ``train`` evaluated at ``test`` via linear binning."""
    lo = min(train.min(), test.min()) - 6 * h
    hi = max(train.max(), test.max()) + 6 * h
    n_bins = int(min(max_bins, np.ceil((hi - lo) / (h / 20)) + 1))
    delta = (hi - lo) / (n_bins - 1)
    pos = (train - lo) / delta
    i = np.clip(np.floor(pos).astype(int), 0, n_bins - 2)
    frac = pos - i
    counts = np.bincount(i, 1 - frac, n_bins) + np.bincount(i + 1, frac, n_bins)
    half = int(np.ceil(8 * h / delta))
    t = np.arange(-half, half + 1) * delta
    kernel = np.exp(-0.5 * (t / h) ** 2) / (np.sqrt(2 * np.pi) * h)
    dens = fftconvolve(counts, kernel, mode="same") / len(train)
    pos = (test - lo) / delta
    j = np.clip(np.floor(pos).astype(int), 0, n_bins - 2)
    frac = pos - j
    p = (1 - frac) * dens[j] + frac * dens[j + 1]
    out = np.empty(len(test))
    good = p > 1e-10 * dens.max()
    out[good] = np.log(p[good])
    bad = np.flatnonzero(~good)
    for k in bad:
        # exact evaluation in log space where the binned density underflows
        z = (test[k] - train) / h
        out[k] = logsumexp(-0.5 * z * z) - np.log(len(train) * np.sqrt(2 * np.pi) * h)
    return out


def kde_heldout_logpdf(samples, n_bandwidths=20, rng=0, return_bandwidth=False):
    """Two-fold cross-fitted held-out KDE log-densities (nats) for every sample.

    The bandwidth maximizing the held-out log-likelihood is picked from a
    logarithmic grid spanning 0.01 to 1 sample standard deviation.
    """
    x = np.asarray(samples, dtype=float).ravel()
    rng = np.random.default_rng(rng)
    perm = rng.permutation(len(x))
    folds = [perm[: len(x) // 2], perm[len(x) // 2:]]
    std = x.std()
    if std == 0:
        raise ParameterError("samples are constant")
    best = None
    for h in std * np.logspace(-2, 0, n_bandwidths):
        out = np.empty(len(x))
        out[folds[1]] = _kde_grid_logpdf(x[folds[0]], x[folds[1]], h)
        out[folds[0]] = _kde_grid_logpdf(x[folds[1]], x[folds[0]], h)
        score = out.mean()
        if best is None or score > best[0]:
            best = (score, h, out)
    if return_bandwidth:
        return best[2], best[1]
    return best[2]


def marginal_entropy(samples, rng=0):
    """Differential entropy estimate (bits) of scalar samples.

    Held-out Gaussian-KDE cross-entropy with a likelihood-selected bandwidth,
    so the estimate is biased upwards rather than downwards.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if len(x) < 10_000:
        raise ParameterError(f"need at least 10000 samples, got {len(x)}")
    return float(-kde_heldout_logpdf(x, rng=rng).mean() / LN2)


def combine_rates(coarse_rate, detail_rates, M):
    """Entropy rate per pixel of the finest image.

    ``detail_rates[m - 1]`` is the conditional rate per superpixel at level m
    (fine to coarse) and ``coarse_rate`` the rate per pixel of X^M.
    """
    detail_rates = list(detail_rates)
    if len(detail_rates) != M:
        raise ParameterError(f"expected {M} detail rates, got {len(detail_rates)}")
    total = coarse_rate / 4.0**M
    for m, r in enumerate(detail_rates, start=1):
        total += r / 4.0**m
    return total


@dataclass
class RateReport:
    """Rates in bits. Level lists are ordered fine to coarse (m = 1..M).

    ``scale_*`` lists are indexed by scale s = 0..M, where scale 0 is the
    full-resolution image.
    """

    detail_rates: list
    detail_rates_per_channel: list
    detail_se: list
    coarse_rate: float
    coarse_se: float
    entropy_rate: float
    entropy_rate_se: float
    marginal_entropy: float
    cross_mir: float
    cross_mir_se: float
    scale_marginal: list = field(default_factory=list)
    scale_rate: list = field(default_factory=list)
    scale_mir: list = field(default_factory=list)
    scale_mir_se: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_text(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_text(cls, text):
        return cls(**json.loads(text))


def _scale_rates(coarse, details):
    # rates of X^s for s = M..0 by unrolling the four-channel recursion
    M = len(details)
    rates = [0.0] * (M + 1)
    rates[M] = coarse
    for s in range(M - 1, -1, -1):
        rates[s] = details[s] / 4 + rates[s + 1] / 4
    return rates


def per_image_rates(model, test_images, max_samples=None, seed=0):
    """Combined entropy rate (bits per pixel) of each test image separately.

    Useful for paired comparisons of models evaluated on the same images.
    """
    rng = np.random.default_rng(seed)
    M = model.levels
    out = []
    for img in test_images:
        pyr = build_pyramid(np.asarray(img, dtype=float), M)
        rates = []
        for m in range(M + 1):
            level = model.level(m)
            d = extract_pairs(level_data(pyr, m), level.mask, max_samples, rng, center=False)
            X, Y = centered(level.params, d.raw_inputs, d.raw_outputs)
            rates.append(-log_density(level.params, X, Y).mean() / LN2)
        out.append(combine_rates(rates[0], rates[1:], M))
    return np.array(out)


def cross_mir(model, test_images, max_samples=None, n_boot=200, seed=0):
    """Evaluate a multiscale model on held-out images.

    Per-level conditional cross-entropies are computed on every interior
    position (optionally subsampled to ``max_samples`` per level and image),
    the marginal entropy on the pixels of each scale, and standard errors by
    bootstrap resampling of whole images.
    """
    images = [np.asarray(im, dtype=float) for im in test_images]
    if not images:
        raise ParameterError("no test images")
    rng = np.random.default_rng(seed)
    M = model.levels
    n_img = len(images)
    ll_sum = np.zeros((n_img, M + 1))
    ll_cnt = np.zeros((n_img, M + 1))
    ll_all = [[] for _ in range(M + 1)]
    pixels = [[] for _ in range(M + 1)]
    for i, img in enumerate(images):
        pyr = build_pyramid(img, M)
        for m in range(M + 1):
            level = model.level(m)
            d = extract_pairs(level_data(pyr, m), level.mask, max_samples, rng, center=False)
            X, Y = centered(level.params, d.raw_inputs, d.raw_outputs)
            ll = log_density(level.params, X, Y)
            ll_sum[i, m], ll_cnt[i, m] = ll.sum(), len(ll)
            ll_all[m].append(ll)
            pixels[m].append(pyr.image_at(m).ravel() if m else img.ravel())

    # marginal held-out log-densities per scale, tagged with their image
    marg_sum = np.zeros((n_img, M + 1))
    marg_cnt = np.zeros((n_img, M + 1))
    for s in range(M + 1):
        vals = np.concatenate(pixels[s])
        owner = np.repeat(np.arange(n_img), [len(p) for p in pixels[s]])
        if max_samples is not None and len(vals) > 20 * max_samples:
            keep = np.sort(rng.choice(len(vals), 20 * max_samples, replace=False))
            vals, owner = vals[keep], owner[keep]
        lp = kde_heldout_logpdf(vals, rng=rng)
        marg_sum[:, s] = np.bincount(owner, lp, n_img)
        marg_cnt[:, s] = np.bincount(owner, None, n_img)

    def summarize(w):
        # w: image weights (bootstrap multiplicities)
        mean_ll = (w @ ll_sum) / (w @ ll_cnt)
        rates = -mean_ll / LN2
        coarse, details = rates[0], list(rates[1:])
        scale_rate = _scale_rates(coarse, details)
        marg = -(w @ marg_sum) / (w @ marg_cnt) / LN2
        return rates, scale_rate, marg

    rates, scale_rate, marg = summarize(np.ones(n_img))
    if n_img > 1:
        boots = []
        for _ in range(n_boot):
            w = np.bincount(rng.integers(n_img, size=n_img), minlength=n_img).astype(float)
            r, sr, mg = summarize(w)
            boots.append(np.concatenate([sr, mg - np.array(sr)]))
        boots = np.array(boots)
        se = boots.std(axis=0, ddof=1)
        rate_se, mir_se = se[: M + 1], se[M + 1:]
    else:
        # a single image: fall back to i.i.d. standard errors
        level_se = [np.concatenate(v).std(ddof=1) / np.sqrt(sum(map(len, v))) / LN2 for v in ll_all]
        rate_se = np.array(_scale_rates(level_se[0], level_se[1:]))
        mir_se = rate_se.copy()
    level_se = [float(np.concatenate(v).std(ddof=1) / np.sqrt(sum(map(len, v))) / LN2) for v in ll_all]
    detail = [float(r) for r in rates[1:]]
    return RateReport(
        detail_rates=detail,
        detail_rates_per_channel=[r / 3 for r in detail],
        detail_se=level_se[1:],
        coarse_rate=float(rates[0]),
        coarse_se=level_se[0],
        entropy_rate=float(scale_rate[0]),
        entropy_rate_se=float(rate_se[0]),
        marginal_entropy=float(marg[0]),
        cross_mir=float(marg[0] - scale_rate[0]),
        cross_mir_se=float(mir_se[0]),
        scale_marginal=[float(v) for v in marg],
        scale_rate=[float(v) for v in scale_rate],
        scale_mir=[float(a - b) for a, b in zip(marg, scale_rate)],
        scale_mir_se=[float(v) for v in mir_se],
        counts={"images": n_img, "pairs": [int(c) for c in ll_cnt.sum(axis=0)],
                "pixels": [int(c) for c in marg_cnt.sum(axis=0)]},
    )
