"""Quasi-Newton minimization with a strong-Wolfe line search.

A small, dependency-free implementation of limited-memory BFGS (two-loop
recursion) and dense BFGS, following the standard textbook algorithms. The
line search treats non-finite objective values as overshoot and backs off.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["QNResult", "minimize_qn", "strong_wolfe"]


@dataclass
class QNResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    status: str
    fun_trace: list = field(default_factory=list)
    gnorm_trace: list = field(default_factory=list)
    n_evals: int = 0
    restarts: int = 0


def _cubic_min(a, fa, dfa, b, fb, dfb):
    # minimizer of the cubic interpolating (a, fa, dfa) and (b, fb, dfb)
    d1 = dfa + dfb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - dfa * dfb
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    t = b - (b - a) * (dfb + d2 - d1) / (dfb - dfa + 2 * d2)
    return t if np.isfinite(t) else None


def strong_wolfe(phi, f0, df0, alpha0=1.0, c1=1e-4, c2=0.9, max_evals=30, alpha_max=1e10):
    """Find a step satisfying the strong Wolfe conditions.

    ``phi(alpha)`` returns ``(value, slope, payload)``. Returns
    ``(alpha, value, payload, n_evals)`` or ``(None, ..)`` on failure.
    """
    a_prev, f_prev, d_prev = 0.0, f0, df0
    a = alpha0
    evals = 0

    def zoom(lo, flo, dlo, hi, fhi, dhi):
        nonlocal evals
        best = None
        while evals < max_evals:
            t = None
            if np.isfinite(fhi) and np.isfinite(dhi):
                t = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
            lo_b, hi_b = min(lo, hi), max(lo, hi)
            margin = 0.1 * (hi_b - lo_b)
            if t is None or not (lo_b + margin <= t <= hi_b - margin):
                t = 0.5 * (lo + hi)
            ft, dt, pay = phi(t)
            evals += 1
            if not np.isfinite(ft) or ft > f0 + c1 * t * df0 or ft >= flo:
                hi, fhi, dhi = t, ft, dt
            else:
                best = (t, ft, pay)
                if abs(dt) <= -c2 * df0:
                    return best
                if dt * (hi - lo) >= 0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo = t, ft, dt
            if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
                break
        return None

    while evals < max_evals:
        fa, da, pay = phi(a)
        evals += 1
        if not np.isfinite(fa) or fa > f0 + c1 * a * df0 or (evals > 1 and fa >= f_prev):
            res = zoom(a_prev, f_prev, d_prev, a, fa, da)
            return (*res, evals) if res else (None, None, None, evals)
        if abs(da) <= -c2 * df0:
            return a, fa, pay, evals
        if da >= 0:
            res = zoom(a, fa, da, a_prev, f_prev, d_prev)
            return (*res, evals) if res else (None, None, None, evals)
        a_prev, f_prev, d_prev = a, fa, da
        a = min(2 * a, alpha_max)
    return None, None, None, evals


def minimize_qn(fun, x0, *, history=20, max_iters=1000, gtol=1e-5, c1=1e-4, c2=0.9,
                callback=None, dense=False):
    """Minimize ``fun(x) -> (value, gradient)`` by (L-)BFGS.

    Parameters
    ----------
    history : int
        Number of correction pairs kept by L-BFGS.
    dense : bool
        Use full BFGS with a dense inverse-Hessian approximation instead.
    callback : callable, optional
        ``callback(iteration, x, value, grad)``; returning True stops early.

    The status is one of ``"converged"``, ``"max_iters"``, ``"callback"`` or
    ``"line_search_failed"``.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    n_evals = 1
    fun_trace, gnorm_trace = [f], [np.max(np.abs(g)) if g.size else 0.0]
    S, Y = [], []
    H = np.eye(len(x)) if dense else None
    restarts = 0
    status = "max_iters"
    k = 0
    steepest = False
    if gnorm_trace[0] <= gtol:
        return QNResult(x, f, g, 0, "converged", fun_trace, gnorm_trace, n_evals)
    while k < max_iters:
        if steepest or (not dense and not S):
            p = -g
        elif dense:
            p = -H @ g
        else:
            q = g.copy()
            alphas = []
            for s, y in zip(reversed(S), reversed(Y)):
                rho = 1.0 / (y @ s)
                a = rho * (s @ q)
                alphas.append((rho, a))
                q -= a * y
            gamma = (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
            r = gamma * q
            for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
                r += s * (a - rho * (y @ r))
            p = -r
        df0 = g @ p
        if df0 >= 0:
            p, df0 = -g, -(g @ g)
            S, Y = [], []
        alpha0 = 1.0
        if (not dense and not S) or steepest or (dense and k == 0):
            alpha0 = min(1.0, 1.0 / max(np.linalg.norm(g), 1e-12))

        def phi(a, x=x, p=p):
            fa, ga = fun(x + a * p)
            return fa, (ga @ p) if np.all(np.isfinite(ga)) else np.nan, ga

        alpha, f_new, g_new, ev = strong_wolfe(phi, f, df0, alpha0, c1, c2)
        n_evals += ev
        if alpha is None:
            if steepest:
                status = "line_search_failed"
                break
            # retry once along the steepest-descent direction with fresh memory
            steepest = True
            restarts += 1
            S, Y = [], []
            if dense:
                H = np.eye(len(x))
            continue
        steepest = False
        s = alpha * p
        y = g_new - g
        x = x + s
        f, g = f_new, g_new
        k += 1
        sy = s @ y
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            if dense:
                if k == 1:
                    H = np.eye(len(x)) * (sy / (y @ y))
                rho = 1.0 / sy
                Hy = H @ y
                H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)
            else:
                S.append(s)
                Y.append(y)
                if len(S) > history:
                    S.pop(0)
                    Y.pop(0)
        fun_trace.append(f)
        gnorm_trace.append(np.max(np.abs(g)))
        if callback is not None and callback(k, x, f, g):
            status = "callback"
            break
        if gnorm_trace[-1] <= gtol:
            status = "converged"
            break
    return QNResult(x, f, g, k, status, fun_trace, gnorm_trace, n_evals, restarts)
