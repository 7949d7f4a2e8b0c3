"""Independent reference computations used by the tests.

Each oracle evaluates a quantity directly from its definition with scipy,
without going through the package's own vectorized code paths.
"""

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal


def dense_mcgsm_logpdf(params, x, y):
    """log p(y|x) by an explicit sum over (component, scale) with scipy normals."""
    C, S = params.log_lambda.shape
    K, M, lam = params.K, params.M, params.lambdas
    gate, joint = [], []
    for c in range(C):
        for s in range(S):
            g = multivariate_normal.logpdf(x, np.zeros(len(x)), np.linalg.inv(lam[c, s] * K[c])) \
                if len(x) else 0.0
            e = multivariate_normal.logpdf(y, params.A[c] @ x, np.linalg.inv(lam[c, s] * M[c]))
            gate.append(g)
            joint.append(g + e)
    return logsumexp(joint) - logsumexp(gate)


def joint_mixture_conditional(Sigmas, scales, x, y):
    """log p(y|x) for the equal-weight mixture of N(0, Sigma_c / scale_cs) over [x, y]."""
    v = np.concatenate([x, y])
    dx = len(x)
    num, den = [], []
    for c, Sig in enumerate(Sigmas):
        for lam in scales[c]:
            num.append(multivariate_normal.logpdf(v, np.zeros(len(v)), Sig / lam))
            den.append(multivariate_normal.logpdf(x, np.zeros(dx), Sig[:dx, :dx] / lam))
    return logsumexp(num) - logsumexp(den)


def gaussian_conditional(Sigma, x, y):
    """log N(y; Syx Sxx^-1 x, Syy - Syx Sxx^-1 Sxy) evaluated with explicit solves."""
    d = len(x)
    Sxx, Sxy, Syy = Sigma[:d, :d], Sigma[:d, d:], Sigma[d:, d:]
    mean = Sxy.T @ np.linalg.solve(Sxx, x)
    cov = Syy - Sxy.T @ np.linalg.solve(Sxx, Sxy)
    return multivariate_normal.logpdf(y, mean, cov)


def random_spd(rng, d, ridge=0.5):
    B = rng.standard_normal((d, d))
    return B @ B.T / d + ridge * np.eye(d)


def finite_difference(f, theta, h=1e-5):
    g = np.empty_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def gaussian_sem_logpdf(values, B, c, d):
    """Joint Gaussian log density of a linear structural equation model.

    ``v = c + B v + e`` with ``e ~ N(0, diag(d))`` and ``B`` strictly lower
    triangular in the variable order, so ``v ~ N((I-B)^-1 c, (I-B)^-1 D (I-B)^-T)``.
    """
    n = len(values)
    T = np.linalg.inv(np.eye(n) - B)
    mean = T @ c
    cov = T @ np.diag(d) @ T.T
    return multivariate_normal.logpdf(values, mean, cov)


def haar_forms(coarse_forms, detail_forms):
    """Inverse Haar step on linear forms.

    ``coarse_forms`` is (h, w, n) and ``detail_forms`` (3, h, w, n): every entry
    is a row vector over the n model variables. Returns (2h, 2w, n).
    """
    l, hr, vr, dg = coarse_forms, *detail_forms
    h, w, n = l.shape
    out = np.empty((2 * h, 2 * w, n))
    out[0::2, 0::2] = (l + hr + vr + dg) / 2
    out[0::2, 1::2] = (l - hr + vr - dg) / 2
    out[1::2, 0::2] = (l + hr - vr - dg) / 2
    out[1::2, 1::2] = (l - hr - vr + dg) / 2
    return out


def pyramid_gaussian_logpdf(model, image):
    """Exact image log density of a multiscale model whose levels all have C = S = 1.

    Every level is then linear-Gaussian given its inputs, so the pyramid
    coefficients form a linear structural equation model. Out-of-image
    neighbors take the model's input mean. The density is evaluated as one
    dense multivariate normal over all coefficients; the Haar transform is
    orthonormal, so this is also the image density.
    """
    H, W = image.shape
    M = model.levels
    h, w = H >> M, W >> M
    # variable layout: coarse pixels, then detail triples from coarse to fine
    sizes = [(h, w)] + [(3, H >> m, W >> m) for m in range(M, 0, -1)]
    counts = [int(np.prod(s)) for s in sizes]
    n = sum(counts)
    starts = np.cumsum([0] + counts)
    eye = np.eye(n)
    coarse_var = eye[starts[0]:starts[1]].reshape(h, w, n)
    detail_var = {m: eye[starts[i + 1]:starts[i + 2]].reshape(3, H >> m, W >> m, n)
                  for i, m in enumerate(range(M, 0, -1))}

    B = np.zeros((n, n))
    c = np.zeros(n)
    noise = np.zeros((n, n))

    def add_rows(level, out_idx, inputs):
        p = level.params
        A, xm, ym = p.A[0], p.input_mean, p.output_mean
        cov = np.linalg.inv(p.M[0] * p.lambdas[0, 0])
        for k, rows in enumerate(out_idx):
            c[rows] = ym
            for j, form in enumerate(inputs[k]):
                if form is None:
                    continue
                B[rows] += np.outer(A[:, j], form)
                c[rows] -= A[:, j] * xm[j]
            noise[np.ix_(rows, rows)] = cov

    def gather(level, grids, r, col):
        forms = []
        for dr, dc, ch in level.mask.offsets:
            g = grids[ch]
            rr, cc = r + dr, col + dc
            inside = 0 <= rr < g.shape[0] and 0 <= cc < g.shape[1]
            forms.append(g[rr, cc] if inside else None)
        return forms

    # coarse level
    lvl = model.coarse
    outs, ins = [], []
    for r in range(h):
        for col in range(w):
            outs.append([starts[0] + r * w + col])
            ins.append(gather(lvl, [coarse_var], r, col))
    add_rows(lvl, outs, ins)

    low = coarse_var
    for i, m in enumerate(range(M, 0, -1)):
        lvl = model.details[m - 1]
        det = detail_var[m]
        hh, ww = det.shape[1:3]
        grids = [low, det[0], det[1], det[2]]
        outs, ins = [], []
        base = starts[i + 1]
        for r in range(hh):
            for col in range(ww):
                outs.append([base + ch * hh * ww + r * ww + col for ch in range(3)])
                ins.append(gather(lvl, grids, r, col))
        add_rows(lvl, outs, ins)
        low = haar_forms(low, det)

    # observed coefficients in the same layout, via the oracle's own forward transform
    values = np.empty(n)
    x = np.asarray(image, dtype=float)
    coeffs = []
    for m in range(1, M + 1):
        a, b, cc, d = x[0::2, 0::2], x[0::2, 1::2], x[1::2, 0::2], x[1::2, 1::2]
        coeffs.append(np.stack([(a - b + cc - d) / 2, (a + b - cc - d) / 2, (a - b - cc + d) / 2]))
        x = (a + b + cc + d) / 2
    values[starts[0]:starts[1]] = x.ravel()
    for i, m in enumerate(range(M, 0, -1)):
        values[starts[i + 1]:starts[i + 2]] = coeffs[m - 1].ravel()

    T = np.linalg.inv(np.eye(n) - B)
    return multivariate_normal.logpdf(values, T @ c, T @ noise @ T.T)


def pixel_loop_logpdf(model, image):
    """Image log density by an explicit loop over positions with the dense mixture oracle."""
    from causalfield.pyramid import build_pyramid

    pyr = build_pyramid(image, model.levels)
    total = 0.0
    for m in range(model.levels + 1):
        lvl = model.level(m)
        p = lvl.params
        arr = pyr.coarse[None] if m == 0 else np.concatenate([pyr.lowres[m - 1][None], pyr.details[m - 1]])
        _, hh, ww = arr.shape
        for r in range(hh):
            for col in range(ww):
                x = np.array([arr[ch, r + dr, col + dc]
                              if 0 <= r + dr < hh and 0 <= col + dc < ww else p.input_mean[j]
                              for j, (dr, dc, ch) in enumerate(lvl.mask.offsets)])
                y = arr[list(lvl.mask.output_channels), r, col]
                total += dense_mcgsm_logpdf(p, x - p.input_mean, y - p.output_mean)
    return total


def gaussian_field_mir(params, mask, grid=512):
    """Exact MIR (bits) of the stationary Gaussian field of a C = S = 1 causal model.

    The field obeys ``x = sum_k a_k x_shift(k) + e`` with innovation variance
    ``1 / (lambda M)``; its spectral density is ``var_e / |1 - sum_k a_k e^{-i w.k}|^2``
    and the marginal variance is the spectral average.
    """
    a = params.A[0, 0]
    var_e = 1.0 / (params.M[0, 0, 0] * params.lambdas[0, 0])
    w = 2 * np.pi * np.arange(grid) / grid
    W1, W2 = np.meshgrid(w, w, indexing="ij")
    transfer = np.ones_like(W1, dtype=complex)
    for coef, (dr, dc, _) in zip(a, mask.offsets):
        transfer -= coef * np.exp(-1j * (W1 * dr + W2 * dc))
    var_x = np.mean(var_e / np.abs(transfer) ** 2)
    return 0.5 * np.log2(var_x / var_e)


class PerturbedRng:
    """Generator proxy that alters the k-th draw (counting every call)."""

    def __init__(self, seed, k=None):
        self.gen = np.random.default_rng(seed)
        self.k = k
        self.calls = 0

    def _hit(self):
        hit = self.calls == self.k
        self.calls += 1
        return hit

    def random(self, size=None):
        u = self.gen.random(size)
        return (u + 0.37) % 1.0 if self._hit() else u

    def standard_normal(self, size=None):
        z = self.gen.standard_normal(size)
        return z + 1.5 if self._hit() else z


def first_output_after(cfg, mask, k):
    """Raster index (in the returned crop) of the first pixel drawn at or after draw k."""
    H, W = cfg.size
    up, _, left, right = mask.extent()
    B = max(cfg.burn_in, up, left)
    cols = W + B + right
    calls = 0
    for r in range(H + B):
        for c in range(cols):
            band = r < up or c < left or c >= B + W
            used = 1 if band else 2
            if calls + used > k:
                if r >= B and B <= c < B + W:
                    return (r - B) * W + (c - B)
                # the perturbed draw belongs to a pixel outside the crop; the next crop pixel follows it
                rr, cc = (r, c + 1) if c + 1 < cols else (r + 1, 0)
                while not (rr >= B and B <= cc < B + W):
                    rr, cc = (rr, cc + 1) if cc + 1 < cols else (rr + 1, 0)
                    if rr >= H + B:
                        return H * W
                return (rr - B) * W + (cc - B)
            calls += used
    return H * W


def lp_radial_gamma_samples(rng, n, p, shape=2.0, scale=1.0):
    """Direction uniform on the L_p circle (via generalized normal), radius Gamma."""
    g = rng.gamma(1 / p, 1.0, size=(n, 2)) ** (1 / p) * rng.choice([-1, 1], size=(n, 2))
    u = g / ((np.abs(g) ** p).sum(axis=1) ** (1 / p))[:, None]
    return u * rng.gamma(shape, scale, size=n)[:, None]
