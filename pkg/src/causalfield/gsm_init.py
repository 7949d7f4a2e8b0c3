"""EM for zero-mean finite GSM mixtures, used to initialize an MCGSM.

Each component ``c`` is a Gaussian scale mixture whose scale ``s`` has
covariance ``Sigma_c / lambda_cs``; every (c, s) pair has prior weight
``1 / (C S)``. The conditional of such a joint mixture over ``[x, y]`` is an
MCGSM, which :func:`to_mcgsm` computes exactly.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import logsumexp

from .errors import ParameterError
from .mcgsm import McgsmParams

__all__ = ["JointGsmMixture", "em_fit", "joint_log_density", "to_mcgsm"]

LOG_2PI = np.log(2 * np.pi)


@dataclass
class JointGsmMixture:
    Sigma: np.ndarray
    log_lambda: np.ndarray
    trace: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    reseeds: int = 0

    @property
    def n_components(self):
        return self.log_lambda.shape[0]

    @property
    def n_scales(self):
        return self.log_lambda.shape[1]

    @property
    def lambdas(self):
        return np.exp(self.log_lambda)

    @property
    def dim(self):
        return self.Sigma.shape[-1]


def _component_terms(Sigma, log_lambda, V):
    """log N(v; 0, Sigma_c / lambda_cs) for all rows (N, C, S) and Mahalanobis terms (N, C)."""
    N, D = V.shape
    C, S = log_lambda.shape
    lam = np.exp(log_lambda)
    out = np.empty((N, C, S))
    maha = np.empty((N, C))
    for c in range(C):
        L = np.linalg.cholesky(Sigma[c])
        Z = solve_triangular(L, V.T, lower=True)
        maha[:, c] = np.einsum("ij,ij->j", Z, Z)
        logdet = 2 * np.log(np.diag(L)).sum()
        out[:, c, :] = (0.5 * D * log_lambda[c] - 0.5 * logdet - 0.5 * D * LOG_2PI
                        - 0.5 * lam[c] * maha[:, c][:, None])
    return out, maha


def joint_log_density(mix, V):
    """Per-row log density of the joint mixture (nats)."""
    V = np.atleast_2d(V)
    T, _ = _component_terms(mix.Sigma, mix.log_lambda, V)
    C, S = mix.log_lambda.shape
    return logsumexp(T.reshape(len(V), -1), axis=1) - np.log(C * S)


def _pd(S, jitter):
    try:
        np.linalg.cholesky(S)
        return S
    except np.linalg.LinAlgError:
        return S + jitter


def _gauge(Sigma, log_lambda):
    shift = log_lambda.mean(axis=1)
    return Sigma * np.exp(-shift)[:, None, None], log_lambda - shift[:, None]


def em_fit(data, C, S, max_iters=100, tol=1e-6, rng=None, init=None):
    """Fit a joint GSM mixture by expectation maximization.

    Parameters
    ----------
    data : array (N, D) or PatchDataset
        Centered rows; a PatchDataset is used through ``data.joint()``.
    C, S : int
        Number of components and scales per component.
    max_iters : int
    tol : float
        Stop when the average log-likelihood improves by less than this (nats).
    rng : numpy Generator or seed
    init : JointGsmMixture, optional
        Starting point instead of the perturbed global fit.

    Returns
    -------
    JointGsmMixture
        ``trace`` holds the average log-likelihood before the first and after
        every M-step.
    """
    V = data.joint() if hasattr(data, "joint") else np.asarray(data, dtype=float)
    N, D = V.shape
    if C < 1 or S < 1:
        raise ParameterError("C and S must be >= 1")
    if N < 10 * D:
        raise ParameterError(f"need at least {10 * D} rows for a {D}-dim fit, got {N}")
    rng = np.random.default_rng(rng)
    second = V.T @ V / N
    jitter = 1e-8 * np.trace(second) / D * np.eye(D)

    if init is not None:
        Sigma, log_lambda = init.Sigma.copy(), init.log_lambda.copy()
    else:
        Sigma = np.empty((C, D, D))
        for c in range(C):
            d = np.exp(0.3 * rng.standard_normal(D) / 2)
            Sigma[c] = second * np.outer(d, d)
        log_lambda = rng.uniform(-1, 1, (C, S)) if S > 1 else np.zeros((C, S))
        if C == 1 and S == 1:
            Sigma[0] = second
        Sigma = np.stack([_pd(Sc, jitter) for Sc in Sigma])
        Sigma, log_lambda = _gauge(Sigma, log_lambda)

    trace, notes = [], []
    reseeds = 0
    T, maha = _component_terms(Sigma, log_lambda, V)
    flat = T.reshape(N, -1)
    lse = logsumexp(flat, axis=1)
    trace.append(float(np.mean(lse) - np.log(C * S)))
    for it in range(max_iters):
        resp = np.exp(flat - lse[:, None]).reshape(N, C, S)
        weight = resp.sum(axis=(0, 2))
        lam = np.exp(log_lambda)
        for c in range(C):
            if weight[c] < 1e-8 * N:
                reseeds += 1
                v = V[rng.integers(N)]
                Sigma[c] = np.outer(v, v) + (v @ v / D + 1e-12) * np.eye(D) + jitter
                log_lambda[c] = 0.0
                continue
            # covariance given scales, then scales given the new covariance
            w = resp[:, c, :] @ lam[c]
            Sigma[c] = (V * w[:, None]).T @ V / weight[c]
            try:
                cf = cho_factor(Sigma[c], lower=True)
            except np.linalg.LinAlgError:
                Sigma[c] += jitter
                cf = cho_factor(Sigma[c], lower=True)
            m = np.einsum("ij,ij->i", V, cho_solve(cf, V.T).T)
            rs = resp[:, c, :].sum(axis=0)
            rm = resp[:, c, :].T @ m
            ok = rs > 1e-12 * N
            log_lambda[c, ok] = np.log(D * rs[ok]) - np.log(rm[ok])
        Sigma, log_lambda = _gauge(Sigma, log_lambda)
        T, maha = _component_terms(Sigma, log_lambda, V)
        flat = T.reshape(N, -1)
        lse = logsumexp(flat, axis=1)
        trace.append(float(np.mean(lse) - np.log(C * S)))
        if abs(trace[-1] - trace[-2]) < tol:
            break
    if reseeds > 3:
        msg = f"EM reseeded collapsed components {reseeds} times"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning)
    return JointGsmMixture(Sigma, log_lambda, trace, notes, reseeds)


def to_mcgsm(joint, dim_in, dim_out, input_mean=None, output_mean=None):
    """Conditional of a joint GSM mixture over ``[x, y]`` as MCGSM parameters.

    Per component: ``K = Sxx^-1``, ``A = Syx Sxx^-1`` and
    ``M = (Syy - Syx Sxx^-1 Sxy)^-1``; the scales carry over unchanged. This
    reproduces the joint mixture's conditional density exactly.
    """
    C, S = joint.log_lambda.shape
    if dim_in + dim_out != joint.dim:
        raise ParameterError("dim_in + dim_out must equal the joint dimension")
    chol_K = np.zeros((C, dim_in, dim_in))
    chol_M = np.zeros((C, dim_out, dim_out))
    A = np.zeros((C, dim_out, dim_in))
    flags = []
    for c in range(C):
        Sig = joint.Sigma[c]
        Sxx = Sig[:dim_in, :dim_in]
        Sxy = Sig[:dim_in, dim_in:]
        Syy = Sig[dim_in:, dim_in:]
        if dim_in:
            if np.linalg.cond(Sxx) > 1e12:
                Sxx = Sxx + 1e-8 * np.trace(Sxx) / dim_in * np.eye(dim_in)
                flags.append(f"component {c}: regularized input covariance")
            Lx = np.linalg.cholesky(Sxx)
            Kc = cho_solve((Lx, True), np.eye(dim_in))
            chol_K[c] = np.linalg.cholesky((Kc + Kc.T) / 2)
            A[c] = cho_solve((Lx, True), Sxy).T
            cond = Syy - Sxy.T @ cho_solve((Lx, True), Sxy)
        else:
            cond = Syy
        Mc = np.linalg.inv((cond + cond.T) / 2)
        chol_M[c] = np.linalg.cholesky((Mc + Mc.T) / 2)
    return McgsmParams(chol_K, chol_M, A, joint.log_lambda.copy(), input_mean, output_mean,
                       meta={"init_flags": flags})
