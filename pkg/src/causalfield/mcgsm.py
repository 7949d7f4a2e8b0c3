"""Mixture of conditional Gaussian scale mixtures (MCGSM).

The conditional density of an output vector ``y`` given an input vector ``x``
is a mixture of experts over components ``c`` and scales ``s``::

    p(y | x) = sum_cs p(c, s | x) N(y; A_c x, (lambda_cs M_c)^-1)
    p(c, s | x) ~ |lambda_cs K_c|^(1/2) exp(-lambda_cs x' K_c x / 2)

with all (c, s) pairs sharing equal prior weight. ``K_c = L_c L_c'`` and
``M_c = R_c R_c'`` are stored as lower-triangular Cholesky factors.

All functions here work on *centered* inputs and outputs; subtract
``params.input_mean`` / ``params.output_mean`` first (or use
:func:`centered`). Values are in nats.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import GeometryError, NumericalError, ParameterError

__all__ = [
    "McgsmParams",
    "random_params",
    "gate_log_posterior",
    "conditional_log_density",
    "log_density",
    "log_likelihood_and_gradient",
    "conditional_sample",
    "ConditionalSampler",
    "centered",
    "pack",
    "unpack",
]

LOG_2PI = np.log(2 * np.pi)
DIAG_FLOOR = 1e-8


@dataclass
class McgsmParams:
    chol_K: np.ndarray
    chol_M: np.ndarray
    A: np.ndarray
    log_lambda: np.ndarray
    input_mean: np.ndarray = None
    output_mean: np.ndarray = None
    output_std: float = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.chol_K = np.asarray(self.chol_K, dtype=float)
        self.chol_M = np.asarray(self.chol_M, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.log_lambda = np.atleast_2d(np.asarray(self.log_lambda, dtype=float))
        C, S = self.log_lambda.shape
        if self.input_mean is None:
            self.input_mean = np.zeros(self.dim_in)
        if self.output_mean is None:
            self.output_mean = np.zeros(self.dim_out)
        self.input_mean = np.asarray(self.input_mean, dtype=float)
        self.output_mean = np.asarray(self.output_mean, dtype=float)
        if (self.chol_K.shape != (C, self.dim_in, self.dim_in)
                or self.chol_M.shape != (C, self.dim_out, self.dim_out)
                or self.A.shape != (C, self.dim_out, self.dim_in)):
            raise GeometryError("inconsistent MCGSM parameter shapes")

    @property
    def n_components(self):
        return self.log_lambda.shape[0]

    @property
    def n_scales(self):
        return self.log_lambda.shape[1]

    @property
    def dim_in(self):
        return self.chol_K.shape[-1]

    @property
    def dim_out(self):
        return self.chol_M.shape[-1]

    @property
    def lambdas(self):
        return np.exp(self.log_lambda)

    @property
    def K(self):
        return self.chol_K @ np.swapaxes(self.chol_K, 1, 2)

    @property
    def M(self):
        return self.chol_M @ np.swapaxes(self.chol_M, 1, 2)

    def copy(self):
        return McgsmParams(self.chol_K.copy(), self.chol_M.copy(), self.A.copy(),
                           self.log_lambda.copy(), self.input_mean.copy(),
                           self.output_mean.copy(), self.output_std, dict(self.meta))

    def gauge_fixed(self):
        """Equivalent parameters with ``sum_s log_lambda[c, s] = 0`` for every c.

        Scaling lambda_c by t and K_c, M_c by 1/t leaves the density unchanged.
        """
        shift = self.log_lambda.mean(axis=1)
        p = self.copy()
        p.log_lambda = self.log_lambda - shift[:, None]
        p.chol_K = self.chol_K * np.exp(shift / 2)[:, None, None]
        p.chol_M = self.chol_M * np.exp(shift / 2)[:, None, None]
        return p


def random_params(C, S, dim_in, dim_out, rng=None, scale_spread=1.0):
    """Random, well-conditioned parameters (used for tests and demos)."""
    rng = np.random.default_rng(rng)

    def chol(d):
        B = rng.standard_normal((d, d)) / np.sqrt(max(d, 1))
        L = np.linalg.cholesky(B @ B.T + np.eye(d))
        return L

    chol_K = np.stack([chol(dim_in) for _ in range(C)]) if dim_in else np.zeros((C, 0, 0))
    chol_M = np.stack([chol(dim_out) for _ in range(C)])
    A = rng.standard_normal((C, dim_out, dim_in)) / np.sqrt(max(dim_in, 1))
    log_lambda = rng.uniform(-scale_spread, scale_spread, (C, S))
    log_lambda -= log_lambda.mean(axis=1, keepdims=True)
    return McgsmParams(chol_K, chol_M, A, log_lambda)


def centered(params, X, Y=None):
    """Subtract the model's means; missing (NaN) inputs become zero."""
    X = np.asarray(X, dtype=float) - params.input_mean
    X = np.where(np.isnan(X), 0.0, X)
    if Y is None:
        return X
    return X, np.asarray(Y, dtype=float) - params.output_mean


def _check(params, X, Y=None):
    X = np.asarray(X, dtype=float)
    if params.dim_in == 0 and X.size == 0:
        n = len(np.atleast_2d(Y)) if Y is not None else (X.shape[0] if X.ndim == 2 else 1)
        X = np.zeros((n, 0))
    X = np.atleast_2d(X)
    if X.shape[1] != params.dim_in:
        raise GeometryError(f"input has {X.shape[1]} dims, model expects {params.dim_in}")
    if not np.all(np.isfinite(X)):
        raise ParameterError("inputs must be finite")
    if Y is None:
        return X
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[1] != params.dim_out or Y.shape[0] != X.shape[0]:
        raise GeometryError("output shape does not match inputs / model")
    return X, Y


def _terms(params, X, Y=None):
    """Gate (and expert) log terms for every row, component and scale."""
    C, S = params.log_lambda.shape
    Din, Dout = params.dim_in, params.dim_out
    log_lam = params.log_lambda
    lam = np.exp(log_lam)
    N = X.shape[0]
    logdet_K = np.log(np.diagonal(params.chol_K, axis1=1, axis2=2)).sum(axis=1)
    logdet_M = np.log(np.diagonal(params.chol_M, axis1=1, axis2=2)).sum(axis=1)
    G = np.empty((N, C, S))
    E = None if Y is None else np.empty((N, C, S))
    cache = []
    for c in range(C):
        U = X @ params.chol_K[c]
        q = np.einsum("ij,ij->i", U, U)
        G[:, c, :] = 0.5 * Din * log_lam[c] + logdet_K[c] - 0.5 * lam[c] * q[:, None]
        if Y is not None:
            res = Y - X @ params.A[c].T
            V = res @ params.chol_M[c]
            w = np.einsum("ij,ij->i", V, V)
            E[:, c, :] = (0.5 * Dout * (log_lam[c] - LOG_2PI) + logdet_M[c]
                          - 0.5 * lam[c] * w[:, None])
            cache.append((U, q, res, V, w))
        else:
            cache.append((U, q))
    return G, E, cache


def gate_log_posterior(params, x):
    """Log posterior over (component, scale) for one centered input.

    Returns ``(log_post, log_norm)`` where ``log_post`` is a C x S array whose
    exponentials sum to one and ``log_norm`` is the log normalizer of the
    unnormalized gate terms.
    """
    X = _check(params, np.reshape(x, (1, -1)))
    G, _, _ = _terms(params, X)
    lz = logsumexp(G[0])
    return G[0] - lz, lz


def log_density(params, X, Y):
    """Per-row log p(y | x) for centered arrays X (N, D_in) and Y (N, D_out)."""
    X, Y = _check(params, X, Y)
    G, E, _ = _terms(params, X, Y)
    N = X.shape[0]
    G = G.reshape(N, -1)
    return logsumexp(G + E.reshape(N, -1), axis=1) - logsumexp(G, axis=1)


def conditional_log_density(params, x, y):
    return float(log_density(params, np.reshape(x, (1, -1)), np.reshape(y, (1, -1)))[0])


# --- unconstrained parameterization -------------------------------------------------

def _tril(d):
    return np.tril_indices(d)


def pack(params):
    """Flatten parameters to the unconstrained vector used by the optimizer.

    Layout: for each component, the lower triangle of L_c (diagonal as logs),
    the lower triangle of R_c (diagonal as logs) and A_c row-major; then the
    C x S scale logs.
    """
    C = params.n_components
    ik, im = _tril(params.dim_in), _tril(params.dim_out)
    parts = []
    for c in range(C):
        for L, idx in ((params.chol_K[c], ik), (params.chol_M[c], im)):
            v = L[idx].copy()
            diag = idx[0] == idx[1]
            v[diag] = np.log(v[diag])
            parts.append(v)
        parts.append(params.A[c].ravel())
    parts.append(params.log_lambda.ravel())
    return np.concatenate(parts)


def unpack(theta, template):
    """Inverse of :func:`pack`; the scale logs are projected onto the gauge."""
    C, S = template.log_lambda.shape
    Din, Dout = template.dim_in, template.dim_out
    ik, im = _tril(Din), _tril(Dout)
    nk, nm, na = len(ik[0]), len(im[0]), Din * Dout
    chol_K = np.zeros((C, Din, Din))
    chol_M = np.zeros((C, Dout, Dout))
    A = np.empty((C, Dout, Din))
    pos = 0
    for c in range(C):
        for L, idx, n in ((chol_K[c], ik, nk), (chol_M[c], im, nm)):
            v = theta[pos:pos + n].copy()
            diag = idx[0] == idx[1]
            v[diag] = np.exp(np.maximum(v[diag], np.log(DIAG_FLOOR)))
            L[idx] = v
            pos += n
        A[c] = theta[pos:pos + na].reshape(Dout, Din)
        pos += na
    ll = theta[pos:pos + C * S].reshape(C, S)
    ll = ll - ll.mean(axis=1, keepdims=True)
    return McgsmParams(chol_K, chol_M, A, ll, template.input_mean, template.output_mean,
                       template.output_std, dict(template.meta))


def block_names(params):
    """Name of the parameter block for every coordinate of the packed vector."""
    C = params.n_components
    nk = len(_tril(params.dim_in)[0])
    nm = len(_tril(params.dim_out)[0])
    na = params.dim_in * params.dim_out
    names = []
    for c in range(C):
        names += [f"chol_K[{c}]"] * nk + [f"chol_M[{c}]"] * nm + [f"A[{c}]"] * na
    names += ["log_lambda"] * (C * params.n_scales)
    return names


def log_likelihood_and_gradient(params, X, Y=None, *, with_grad=True):
    """Average log-likelihood over rows and its gradient in packed coordinates.

    ``X`` may be a :class:`~causalfield.neighborhoods.PatchDataset`, in which
    case its rows are re-centered on the model's means.
    """
    if Y is None:
        X, Y = centered(params, X.raw_inputs, X.raw_outputs)
    X, Y = _check(params, X, Y)
    N = X.shape[0]
    if N == 0:
        raise ParameterError("empty dataset")
    C, S = params.log_lambda.shape
    Din, Dout = params.dim_in, params.dim_out
    lam = np.exp(params.log_lambda)
    G, E, cache = _terms(params, X, Y)
    G2 = G.reshape(N, -1)
    J2 = G2 + E.reshape(N, -1)
    lg = logsumexp(G2, axis=1)
    lj = logsumexp(J2, axis=1)
    value = float(np.mean(lj - lg))
    if not with_grad:
        return value, None

    gamma = np.exp(G2 - lg[:, None]).reshape(N, C, S)
    post = np.exp(J2 - lj[:, None]).reshape(N, C, S)
    diff = post - gamma
    ik, im = _tril(Din), _tril(Dout)
    parts = []
    g_loglam = np.empty((C, S))
    for c in range(C):
        U, q, res, V, w = cache[c]
        Lc, Rc = params.chol_K[c], params.chol_M[c]
        b = diff[:, c, :] @ lam[c]
        gL = -(X * b[:, None]).T @ U / N
        gL[np.diag_indices(Din)] += diff[:, c, :].sum() / N / np.diag(Lc)
        b2 = post[:, c, :] @ lam[c]
        gR = -(res * b2[:, None]).T @ V / N
        gR[np.diag_indices(Dout)] += post[:, c, :].sum() / N / np.diag(Rc)
        gA = Rc @ (V * b2[:, None]).T @ X / N
        for g, L, idx in ((gL, Lc, ik), (gR, Rc, im)):
            v = g[idx]
            diag = idx[0] == idx[1]
            d = L[idx][diag]
            # chain rule through the log-diagonal; zero below the floor
            v[diag] = np.where(d > DIAG_FLOOR, v[diag] * d, 0.0)
            parts.append(v)
        parts.append(gA.ravel())
        g_loglam[c] = (diff[:, c, :] * (0.5 * Din - 0.5 * lam[c] * q[:, None])
                       + post[:, c, :] * (0.5 * Dout - 0.5 * lam[c] * w[:, None])).sum(axis=0) / N
    g_loglam -= g_loglam.mean(axis=1, keepdims=True)
    parts.append(g_loglam.ravel())
    grad = np.concatenate(parts)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        names = block_names(params)
        bad = [names[i] for i in np.flatnonzero(~np.isfinite(grad))]
        raise NumericalError(f"non-finite log-likelihood or gradient in {sorted(set(bad)) or 'value'}",
                             block=bad[0] if bad else None)
    return value, grad


class ConditionalSampler:
    """Draws ``y ~ p(y | x)`` one input at a time with cached factorizations.

    Each draw consumes exactly one uniform variate and ``dim_out`` standard
    normal variates from the generator, in that order.
    """

    def __init__(self, params):
        self.params = params
        C = params.n_components
        self.lam = np.exp(params.log_lambda)
        self.base = (0.5 * params.dim_in * params.log_lambda
                     + np.log(np.diagonal(params.chol_K, axis1=1, axis2=2)).sum(axis=1)[:, None])
        # R^-T maps white noise to a draw with precision R R'
        eye = np.eye(params.dim_out)
        self.noise_maps = np.stack([
            solve_triangular(params.chol_M[c].T, eye, lower=False) for c in range(C)
        ])
        self.Lt = np.swapaxes(params.chol_K, 1, 2)

    def log_gate(self, x):
        u = self.Lt @ x
        q = np.einsum("ci,ci->c", u, u)
        return self.base - 0.5 * self.lam * q[:, None]

    def __call__(self, x, rng):
        x = np.asarray(x, dtype=float)
        G = self.log_gate(x).ravel()
        p = np.exp(G - G.max())
        cdf = np.cumsum(p)
        u = rng.random()
        k = min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(cdf) - 1)
        c, s = divmod(k, self.params.n_scales)
        z = rng.standard_normal(self.params.dim_out)
        return self.params.A[c] @ x + self.noise_maps[c] @ z / np.sqrt(self.lam[c, s])


def conditional_sample(params, x, rng):
    """Draw one centered output for the centered input ``x``."""
    X = _check(params, np.reshape(x, (1, -1)))
    return ConditionalSampler(params)(X[0], rng)
