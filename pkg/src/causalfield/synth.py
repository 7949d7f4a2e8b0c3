"""Synthetic images: dead-leaves occlusion samples and phase-scrambled controls."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import NumericalError, ParameterError

__all__ = ["DeadLeavesConfig", "sample_radii", "generate_dead_leaves", "phase_scramble"]


@dataclass
class DeadLeavesConfig:
    """Disks with power-law radii in ``[r_min, r_max]`` and uniform intensities.

    ``noise_std`` is the standard deviation of additive white noise, in units of
    the intensity range [0, 1]. Without noise the MIR of the process is
    unbounded.
    """

    size: tuple = (256, 256)
    r_min: float = 2.0
    r_max: float = 64.0
    exponent: float = 3.0
    noise_std: float = 0.01
    seed: int = 0
    intensity: float = None

    def __post_init__(self):
        H, W = self.size
        if not 0 < self.r_min <= self.r_max <= min(H, W):
            raise ParameterError("need 0 < r_min <= r_max <= min(H, W)")
        if self.noise_std < 0:
            raise ParameterError("noise_std must be >= 0")

    def to_dict(self):
        return asdict(self)


def sample_radii(rng, n, r_min, r_max, exponent=3.0):
    """Inverse-CDF draws from the density ``r^-exponent`` truncated to [r_min, r_max]."""
    u = rng.random(n)
    if r_min == r_max:
        return np.full(n, float(r_min))
    if exponent == 1:
        return r_min * (r_max / r_min) ** u
    e = 1.0 - exponent
    return (r_min**e + u * (r_max**e - r_min**e)) ** (1.0 / e)


def generate_dead_leaves(cfg, max_disks=10_000_000):
    """Dead-leaves image of size ``cfg.size``.

    Disks are drawn front to back: each new disk only paints pixels that no
    earlier disk covered, which has the same distribution as painting back to
    front and stops exactly when the frame is covered.
    """
    rng = np.random.default_rng(cfg.seed)
    H, W = cfg.size
    img = np.full((H, W), np.nan)
    uncovered = np.ones((H, W), dtype=bool)
    n_left = H * W
    ys, xs = np.mgrid[0:H, 0:W]
    drawn = 0
    batch = 256
    pad = cfg.r_max
    while n_left:
        if drawn >= max_disks:
            raise NumericalError(f"frame not covered after {drawn} disks")
        cy = rng.uniform(-pad, H + pad, batch)
        cx = rng.uniform(-pad, W + pad, batch)
        rad = sample_radii(rng, batch, cfg.r_min, cfg.r_max, cfg.exponent)
        val = rng.random(batch) if cfg.intensity is None else np.full(batch, cfg.intensity)
        drawn += batch
        if n_left > 4096:
            for k in range(batch):
                r0, r1 = max(int(cy[k] - rad[k]), 0), min(int(cy[k] + rad[k]) + 2, H)
                c0, c1 = max(int(cx[k] - rad[k]), 0), min(int(cx[k] + rad[k]) + 2, W)
                if r0 >= r1 or c0 >= c1:
                    continue
                hit = ((ys[r0:r1, c0:c1] - cy[k]) ** 2 + (xs[r0:r1, c0:c1] - cx[k]) ** 2 <= rad[k] ** 2)
                hit &= uncovered[r0:r1, c0:c1]
                img[r0:r1, c0:c1][hit] = val[k]
                uncovered[r0:r1, c0:c1][hit] = False
        else:
            # few pixels left: first covering disk per pixel, same order as above
            pr, pc = np.nonzero(uncovered)
            inside = (pr[:, None] - cy) ** 2 + (pc[:, None] - cx) ** 2 <= rad**2
            first = np.argmax(inside, axis=1)
            any_hit = inside[np.arange(len(pr)), first]
            img[pr[any_hit], pc[any_hit]] = val[first[any_hit]]
            uncovered[pr[any_hit], pc[any_hit]] = False
            batch = min(4096, max(256, 2_000_000 // max(len(pr), 1)))
        n_left = int(uncovered.sum())
    if cfg.noise_std > 0:
        img += cfg.noise_std * rng.standard_normal((H, W))
    return img


def phase_scramble(image, rng=None):
    """Replace the Fourier phases with those of a white-noise image.

    The amplitude spectrum (and hence the circular autocorrelation) is kept
    exactly and the DC coefficient is left untouched, so the mean is
    preserved. The noise spectrum is Hermitian, so the output is real.
    """
    rng = np.random.default_rng(rng)
    x = np.asarray(image, dtype=float)
    F = np.fft.fft2(x)
    N = np.fft.fft2(rng.standard_normal(x.shape))
    phase = N / np.maximum(np.abs(N), 1e-300)
    G = np.abs(F) * phase
    G[0, 0] = F[0, 0]
    return np.fft.ifft2(G).real
