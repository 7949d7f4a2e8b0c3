import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

from causalfield.optimize import minimize_qn, strong_wolfe


def rosenbrock(x):
    return rosen(x), rosen_der(x)


class TestQuasiNewton:
    @pytest.mark.parametrize("dense", [False, True])
    def test_rosenbrock(self, dense):
        res = minimize_qn(rosenbrock, np.array([-1.2, 1.0, -0.5, 0.8]), gtol=1e-8, dense=dense)
        assert res.status == "converged"
        np.testing.assert_allclose(res.x, 1.0, atol=1e-6)
        assert np.all(np.diff(res.fun_trace) <= 1e-12)

    def test_quadratic(self, rng):
        B = rng.standard_normal((6, 6))
        H = B @ B.T + np.eye(6)
        b = rng.standard_normal(6)
        res = minimize_qn(lambda x: (0.5 * x @ H @ x - b @ x, H @ x - b), np.zeros(6), gtol=1e-10)
        np.testing.assert_allclose(res.x, np.linalg.solve(H, b), atol=1e-8)

    def test_callback_stop(self):
        res = minimize_qn(rosenbrock, np.zeros(2), callback=lambda k, x, f, g: k >= 3)
        assert res.status == "callback" and res.n_iter == 3

    def test_max_iters(self):
        res = minimize_qn(rosenbrock, np.array([-1.2, 1.0]), max_iters=2)
        assert res.status == "max_iters"

    def test_bad_gradient_fails_gracefully(self):
        # gradient points uphill: no step can satisfy the Wolfe conditions
        res = minimize_qn(lambda x: (x @ x, -2 * x), np.ones(3))
        assert res.status == "line_search_failed" and res.restarts == 1
        assert res.fun <= 3.0

    def test_nonfinite_treated_as_overshoot(self):
        def f(x):
            if x[0] > 2:
                return np.inf, np.full(1, np.nan)
            return (x[0] - 1.9) ** 2, 2 * (x - 1.9)
        res = minimize_qn(f, np.array([-10.0]))
        assert res.status == "converged"
        assert res.x[0] == pytest.approx(1.9, abs=1e-5)


class TestLineSearch:
    def test_strong_wolfe_conditions(self):
        f = lambda a: ((a - 3) ** 2, 2 * (a - 3), None)
        f0, df0 = 9.0, -6.0
        a, fa, _, _ = strong_wolfe(f, f0, df0, alpha0=0.1, c1=1e-4, c2=0.1)
        _, da, _ = f(a)
        assert fa <= f0 + 1e-4 * a * df0
        assert abs(da) <= 0.1 * abs(df0)
