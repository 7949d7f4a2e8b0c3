"""Maximum-likelihood training of an MCGSM.

Training runs EM on the joint distribution of inputs and outputs, converts
the result to conditional parameters and then refines them with a
quasi-Newton method on the average conditional log-likelihood.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericalError, ParameterError
from .gsm_init import em_fit, to_mcgsm
from .mcgsm import log_likelihood_and_gradient, pack, unpack
from .optimize import minimize_qn

__all__ = ["TrainConfig", "TrainTrace", "train", "refine"]

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    max_iters: int = 1000
    gtol: float = 1e-5
    history: int = 20
    c1: float = 1e-4
    c2: float = 0.9
    val_fraction: float = 0.1
    patience: int = 100
    seed: int = 0
    em_iters: int = 100
    em_tol: float = 1e-6
    em_restarts: int = 3
    dense: bool = False

    def __post_init__(self):
        if self.gtol <= 0 or self.em_tol <= 0:
            raise ParameterError("tolerances must be positive")
        if not 0 <= self.val_fraction < 1:
            raise ParameterError("val_fraction must lie in [0, 1)")
        if not 0 < self.c1 < self.c2 < 1:
            raise ParameterError("line search constants need 0 < c1 < c2 < 1")


@dataclass
class TrainTrace:
    objective: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    em_trace: list = field(default_factory=list)
    best_iter: int = 0
    status: str = ""
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _split(data, val_fraction, rng):
    n = len(data)
    n_val = int(round(val_fraction * n))
    if n_val == 0 or n - n_val == 0:
        return data, None
    perm = rng.permutation(n)
    return data.subset(np.sort(perm[n_val:])), data.subset(np.sort(perm[:n_val]))


def refine(params, train_data, config=None, val_data=None, trace=None):
    """Quasi-Newton ascent on the average log-likelihood starting at ``params``.

    Returns the parameters with the best validation log-likelihood (training
    log-likelihood when ``val_data`` is None) and the trace.
    """
    config = config or TrainConfig()
    trace = trace or TrainTrace()
    start = params.gauge_fixed()
    X, Y = _centered(start, train_data)
    Xv, Yv = _centered(start, val_data) if val_data is not None else (None, None)

    def objective(theta):
        p = unpack(theta, start)
        try:
            f, g = log_likelihood_and_gradient(p, X, Y)
        except (NumericalError, FloatingPointError, np.linalg.LinAlgError):
            return np.inf, np.full_like(theta, np.nan)
        return -f, -g

    def score(theta):
        if Xv is None:
            return None
        return log_likelihood_and_gradient(unpack(theta, start), Xv, Yv, with_grad=False)[0]

    theta0 = pack(start)
    f0, g0 = objective(theta0)
    if not np.isfinite(f0):
        # re-run to surface the offending block
        log_likelihood_and_gradient(start, X, Y)
        raise NumericalError("non-finite objective at the initial parameters")
    best = {"theta": None, "score": score(theta0) if Xv is not None else -f0, "iter": 0}
    trace.objective.append(-f0)
    trace.grad_norm.append(float(np.max(np.abs(g0))) if g0.size else 0.0)
    if Xv is not None:
        trace.validation.append(best["score"])

    def callback(k, theta, f, g):
        trace.objective.append(-f)
        trace.grad_norm.append(float(np.max(np.abs(g))))
        s = score(theta) if Xv is not None else -f
        if Xv is not None:
            trace.validation.append(s)
        if s > best["score"]:
            best.update(theta=theta.copy(), score=s, iter=k)
        return Xv is not None and k - best["iter"] >= config.patience

    if config.max_iters > 0:
        res = minimize_qn(objective, theta0, history=config.history, max_iters=config.max_iters,
                          gtol=config.gtol, c1=config.c1, c2=config.c2, callback=callback,
                          dense=config.dense)
        trace.status = res.status
        if res.restarts:
            trace.warnings.append(f"line search restarted {res.restarts} time(s)")
        if res.status == "line_search_failed":
            trace.warnings.append("line search failed twice; returning best parameters")
    else:
        trace.status = "max_iters"
    trace.best_iter = best["iter"]
    if best["theta"] is None:
        return params, trace
    out = unpack(best["theta"], start)
    return out, trace


def _centered(params, data):
    X = data.raw_inputs - params.input_mean
    Y = data.raw_outputs - params.output_mean
    return np.where(np.isnan(X), 0.0, X), Y


def train(data, C, S, config=None):
    """Fit an MCGSM with C components and S scales to a PatchDataset.

    Returns ``(params, trace)``.
    """
    config = config or TrainConfig()
    if len(data) == 0:
        raise ParameterError("empty dataset")
    if C < 1 or S < 1:
        raise ParameterError("C and S must be >= 1")
    rng = np.random.default_rng(config.seed)
    train_data, val_data = _split(data, config.val_fraction, rng)
    V = train_data.joint()
    joint = None
    for _ in range(max(1, config.em_restarts) if C * S > 1 else 1):
        fit = em_fit(V, C, S, config.em_iters, config.em_tol, rng=rng)
        if joint is None or fit.trace[-1] > joint.trace[-1]:
            joint = fit
    init = to_mcgsm(joint, data.inputs.shape[1], data.outputs.shape[1],
                    data.input_mean, data.output_mean)
    init.output_std = float(np.sqrt(np.mean(data.outputs ** 2)))
    trace = TrainTrace(em_trace=list(joint.trace), warnings=list(joint.warnings))
    trace.warnings += init.meta.get("init_flags", [])
    log.debug("EM finished after %d iterations, loglik %.5f", len(joint.trace) - 1, joint.trace[-1])
    params, trace = refine(init, train_data, config, val_data, trace)
    params.output_std = init.output_std
    params.meta = {"C": C, "S": S, "n_train": len(train_data),
                   "n_val": 0 if val_data is None else len(val_data), "status": trace.status}
    return params, trace
