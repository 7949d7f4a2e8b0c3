"""Multiscale model: one MCGSM for the coarsest image plus one per detail level.

With ``M`` Haar levels the model holds ``M + 1`` conditional models. The
image log-likelihood splits exactly into the coarse image's log-likelihood
plus the conditional log-likelihood of every detail level given the
low-resolution image below it, because the transform has unit Jacobian.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParameterError
from .mcgsm import McgsmParams, centered, log_density
from .neighborhoods import NeighborhoodMask, PatchDataset, causal_mask, extract_pairs, superpixel_mask
from .pyramid import build_pyramid
from .trainer import TrainConfig, train

__all__ = [
    "Level",
    "MultiscaleModel",
    "level_data",
    "level_datasets",
    "train_multiscale",
    "image_log_likelihood",
]


@dataclass
class Level:
    params: McgsmParams
    mask: NeighborhoodMask
    trace: object = None


@dataclass
class MultiscaleModel:
    """``details[m - 1]`` models Y^m given X^m; ``coarse`` models X^M."""

    coarse: Level
    details: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def levels(self):
        return len(self.details)

    def level(self, m):
        """Model at level m: 0 is the coarse model, 1..M are detail models."""
        return self.coarse if m == 0 else self.details[m - 1]


def level_data(pyr, m):
    """Array a level-m model is applied to (m = 0: the coarse image)."""
    if m == 0:
        return pyr.coarse
    return pyr.superpixels(m).channels


def level_datasets(images, M, coarse_mask, fine_mask, max_samples=None, rng=None, pad=False):
    """Per-level PatchDatasets pooled over images.

    Returns a list ``[coarse, level 1, ..., level M]``. ``max_samples`` bounds
    the pooled size of every level; it is split evenly across images.
    """
    rng = np.random.default_rng(rng)
    images = list(images)
    if not images:
        raise ParameterError("no images given")
    per_image = None if max_samples is None else max(1, int(np.ceil(max_samples / len(images))))
    pools = [[] for _ in range(M + 1)]
    for img in images:
        pyr = build_pyramid(img, M)
        for m in range(M + 1):
            mask = coarse_mask if m == 0 else fine_mask
            pools[m].append(extract_pairs(level_data(pyr, m), mask, per_image, rng,
                                          pad=pad, center=False, scale=m))
    out = []
    for m, pool in enumerate(pools):
        d = PatchDataset.concatenate(pool)
        if max_samples is not None and len(d) > max_samples:
            d = d.subset(np.sort(rng.choice(len(d), max_samples, replace=False)))
        d.scale = m
        out.append(d)
    return out


def train_multiscale(images, M=3, C=8, S=4, coarse_mask=None, fine_mask=None,
                     config=None, max_samples=200000, seed=0):
    """Train the coarse model and the M detail models on a list of images."""
    coarse_mask = coarse_mask or causal_mask(3, 7)
    fine_mask = fine_mask or superpixel_mask(3)
    config = config or TrainConfig(seed=seed)
    datasets = level_datasets(images, M, coarse_mask, fine_mask, max_samples, seed)
    levels = []
    for m, data in enumerate(datasets):
        cfg = TrainConfig(**{**config.__dict__, "seed": config.seed + m})
        params, trace = train(data, C, S, cfg)
        levels.append(Level(params, coarse_mask if m == 0 else fine_mask, trace))
    return MultiscaleModel(levels[0], levels[1:], {"M": M, "C": C, "S": S, "seed": seed,
                                                   "max_samples": max_samples})


def _level_loglik(level, arr, pad):
    d = extract_pairs(arr, level.mask, pad=pad, center=False)
    X, Y = centered(level.params, d.raw_inputs, d.raw_outputs)
    return log_density(level.params, X, Y)


def image_log_likelihood(model, image, pad=True):
    """Log-likelihood of an image under the multiscale model (nats).

    With ``pad=True`` every pixel is modeled and neighbors outside the image
    take the model's mean, which makes this an exact density over the whole
    image. Returns ``(total, per_level)`` where ``per_level[m]`` is the array
    of per-position log-likelihoods at level m (0 = coarse).
    """
    image = np.asarray(image, dtype=float)
    M = model.levels
    if image.shape[0] % 2**M or image.shape[1] % 2**M:
        raise GeometryError(f"image {image.shape} not divisible by 2^{M}")
    pyr = build_pyramid(image, M)
    per_level = [_level_loglik(model.level(m), level_data(pyr, m), pad) for m in range(M + 1)]
    return float(sum(v.sum() for v in per_level)), per_level
