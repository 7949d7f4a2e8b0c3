"""Pairwise filter-response statistics and L_p-spherical fits.

Responses of a vertical Gaussian-derivative filter are collected at two
locations separated vertically by ``d`` pixels, whitened, and fitted with a
two-dimensional L_p-spherically symmetric density whose radius
``r = (|x1|^p + |x2|^p)^(1/p)`` is Gamma distributed::

    log p(x) = log Gamma(r; shape, scale) - log r - log S_p
    S_p = (2 Gamma(1/p))^2 / (p Gamma(2/p))

The fitted exponent ``p`` summarizes how star-shaped the joint histogram is.
"""

from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import convolve2d
from scipy.special import digamma, gammaln, polygamma

from .errors import DegeneracyError, GeometryError, ParameterError

__all__ = [
    "LpFitResult",
    "derivative_kernel",
    "derivative_pair_responses",
    "whiten_pairs",
    "lp_log_density",
    "fit_gamma",
    "fit_lp_radial_gamma",
    "lp_statistic_table",
]

GOLDEN = (np.sqrt(5) - 1) / 2


@dataclass
class LpFitResult:
    p: float
    shape: float
    scale: float
    loglik: float
    n: int
    d: int = None
    p_se: float = None
    at_boundary: bool = False

    def to_dict(self):
        return asdict(self)


def derivative_kernel(sigma=1.5, truncate=4.0):
    """First derivative of a Gaussian along rows, Gaussian along columns."""
    half = int(np.ceil(truncate * sigma))
    t = np.arange(-half, half + 1, dtype=float)
    g = np.exp(-0.5 * (t / sigma) ** 2)
    g /= g.sum()
    dg = -t / sigma**2 * g
    return np.outer(dg, g)


def derivative_pair_responses(images, d, sigma_f=1.5, stride=4):
    """(N, 2) array of filter responses at (r, c) and (r + d, c) on a stride grid."""
    if d < 1:
        raise ParameterError("offset d must be >= 1")
    k = derivative_kernel(sigma_f)
    out = []
    for img in images:
        img = np.asarray(img, dtype=float)
        if img.shape[0] < k.shape[0] + d or img.shape[1] < k.shape[1]:
            raise GeometryError(f"image {img.shape} too small for offset {d}")
        resp = convolve2d(img, k, mode="valid")
        top = resp[: resp.shape[0] - d: stride, ::stride]
        bottom = resp[d::stride, ::stride][: top.shape[0]]
        out.append(np.stack([top.ravel(), bottom.ravel()], axis=1))
    return np.concatenate(out)


def whiten_pairs(pairs):
    """Symmetric whitening: ``C^(-1/2) (x - mean)`` with C the sample covariance."""
    x = np.asarray(pairs, dtype=float)
    x = x - x.mean(axis=0)
    C = x.T @ x / len(x)
    evals, evecs = np.linalg.eigh(C)
    if evals.min() <= 1e-12 * max(evals.max(), 1e-300):
        raise DegeneracyError("covariance of the pairs is singular")
    W = evecs @ np.diag(evals ** -0.5) @ evecs.T
    return x @ W


def _log_sp(p):
    return 2 * (np.log(2) + gammaln(1 / p)) - np.log(p) - gammaln(2 / p)


def lp_radius(x, p):
    a = np.abs(x)
    m = a.max(axis=1)
    m = np.where(m > 0, m, 1.0)
    return m * (((a / m[:, None]) ** p).sum(axis=1)) ** (1 / p)


def fit_gamma(r, iters=50):
    """Maximum-likelihood Gamma shape and scale (Newton on the shape equation)."""
    r = np.asarray(r, dtype=float)
    mean = r.mean()
    s = np.log(mean) - np.log(r).mean()
    k = (3 - s + np.sqrt((s - 3) ** 2 + 24 * s)) / (12 * s)
    for _ in range(iters):
        step = (np.log(k) - digamma(k) - s) / (1 / k - polygamma(1, k))
        k_new = k - step
        if k_new <= 0:
            k_new = k / 2
        if abs(k_new - k) < 1e-12 * k:
            k = k_new
            break
        k = k_new
    return k, mean / k


def lp_log_density(x, p, shape, scale):
    r = lp_radius(x, p)
    log_gamma = (shape - 1) * np.log(r) - r / scale - gammaln(shape) - shape * np.log(scale)
    return log_gamma - np.log(r) - _log_sp(p)


def _profile(x, p):
    r = lp_radius(x, p)
    k, theta = fit_gamma(r)
    return lp_log_density(x, p, k, theta).mean(), k, theta


def fit_lp_radial_gamma(pairs, p_range=(0.3, 4.0), tol=1e-4):
    """Maximum-likelihood L_p-spherical radial-Gamma fit to 2-D samples.

    Golden-section search over p, with the Gamma parameters profiled out at
    each p. ``at_boundary`` flags an optimum at either end of ``p_range``.
    """
    x = np.asarray(pairs, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ParameterError("pairs must have shape (N, 2)")
    if len(x) < 1000:
        raise ParameterError("need at least 1000 pairs")
    x = x[np.any(x != 0, axis=1)]
    f = lambda p: -_profile(x, p)[0]
    a, b = p_range
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    p = (a + b) / 2
    ll, k, theta = _profile(x, p)
    # curvature of the profile log-likelihood for a standard error on p
    h = 1e-3 * p
    curv = (_profile(x, p + h)[0] - 2 * ll + _profile(x, p - h)[0]) / h**2
    se = float(1 / np.sqrt(-curv * len(x))) if curv < 0 else float("nan")
    edge = min(p - p_range[0], p_range[1] - p) < 10 * tol
    return LpFitResult(float(p), float(k), float(theta), float(ll), len(x), p_se=se, at_boundary=bool(edge))


def lp_statistic_table(images, offsets, sigma_f=1.5, stride=4):
    """Fit p at each vertical offset; returns a list of LpFitResult."""
    rows = []
    for d in offsets:
        pairs = whiten_pairs(derivative_pair_responses(images, d, sigma_f, stride))
        fit = fit_lp_radial_gamma(pairs)
        fit.d = int(d)
        rows.append(fit)
    return rows
