"""Causal sampling of images from trained models.

The coarsest image is generated by a raster scan: the top and left borders
(and a right margin the neighborhood reaches into) are filled with small
white noise, every other pixel is drawn from the conditional model given the
already generated pixels, and the bottom-right part of the canvas is kept
once the scan has had room to converge. Finer scales are generated by
sampling the detail channels of each superpixel given the full
low-resolution image and the already generated details, then inverting the
Haar transform.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ParameterError
from .mcgsm import ConditionalSampler
from .pyramid import SuperpixelImage, haar_inverse

__all__ = ["SampleConfig", "sample_coarse", "sample_details", "synthesize"]


@dataclass
class SampleConfig:
    """Sampling options.

    ``burn_in`` defaults to eight times the mask height and ``boundary_std`` to
    a tenth of the training outputs' standard deviation. ``detail_margin`` is
    the number of extra coarse pixels generated on the top and left of a
    multiscale sample and cropped away at the end.
    """

    size: tuple = (64, 64)
    burn_in: int = None
    boundary_std: float = None
    seed: int = 0
    detail_margin: int = 4

    def __post_init__(self):
        if self.burn_in is not None and self.burn_in < 0:
            raise ParameterError("burn_in must be >= 0")
        if self.boundary_std is not None and self.boundary_std < 0:
            raise ParameterError("boundary_std must be >= 0")


def _boundary_std(cfg, params):
    if cfg.boundary_std is not None:
        return cfg.boundary_std
    return 0.1 * (params.output_std if params.output_std else 1.0)


def sample_coarse(params, mask, cfg, rng=None):
    """Raster-scan sample of an H x W single-channel image.

    The generator is consumed pixel by pixel in raster order over the whole
    canvas, so the draw at a pixel never influences earlier pixels and two
    runs that differ only in H agree on their common rows.
    """
    if mask.n_channels != 1:
        raise GeometryError("sample_coarse needs a single-channel mask")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    H, W = cfg.size
    up, down, left, right = mask.extent()
    if down > 0:
        raise GeometryError("mask reaches below the current row")
    B = 8 * mask.height if cfg.burn_in is None else cfg.burn_in
    B = max(B, up, left)
    sigma = _boundary_std(cfg, params)
    rows, cols = H + B, W + B + right
    canvas = np.empty((rows, cols))
    dr = np.array([o[0] for o in mask.offsets], dtype=int)
    dc = np.array([o[1] for o in mask.offsets], dtype=int)
    draw = ConditionalSampler(params)
    xmean, ymean = params.input_mean, params.output_mean[0]
    for r in range(rows):
        for c in range(cols):
            if r < up or c < left or c >= B + W:
                canvas[r, c] = ymean + sigma * rng.standard_normal()
            else:
                x = canvas[r + dr, c + dc] - xmean
                canvas[r, c] = ymean + draw(x, rng)[0]
    return canvas[B:, B:B + W].copy()


def sample_details(params, mask, lowres, cfg, rng=None):
    """Sample the three detail channels for a given low-resolution image.

    Low-resolution values outside the image take the model's mean; detail
    values outside the image are small white noise around the model's mean.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    lowres = np.asarray(lowres, dtype=float)
    if lowres.ndim != 2:
        raise GeometryError("lowres must be a 2-D image")
    if mask.output_channels != (1, 2, 3):
        raise GeometryError("sample_details needs a superpixel mask")
    h, w = lowres.shape
    up, down, left, right = mask.extent()
    pad = max(up, down, left, right)
    sigma = _boundary_std(cfg, params)
    canvas = np.empty((4, h + 2 * pad, w + 2 * pad))
    low_dims = [j for j, o in enumerate(mask.offsets) if o[2] == 0]
    canvas[0] = params.input_mean[low_dims].mean() if low_dims else 0.0
    canvas[0, pad:pad + h, pad:pad + w] = lowres
    noise = rng.standard_normal((3,) + canvas.shape[1:])
    canvas[1:] = params.output_mean[:, None, None] + sigma * noise
    ch = np.array([o[2] for o in mask.offsets], dtype=int)
    dr = np.array([o[0] for o in mask.offsets], dtype=int)
    dc = np.array([o[1] for o in mask.offsets], dtype=int)
    draw = ConditionalSampler(params)
    xmean, ymean = params.input_mean, params.output_mean
    for r in range(pad, pad + h):
        for c in range(pad, pad + w):
            x = canvas[ch, r + dr, c + dc] - xmean
            canvas[1:, r, c] = ymean + draw(x, rng)
    return SuperpixelImage.from_parts(lowres, canvas[1:, pad:pad + h, pad:pad + w])


def synthesize(model, cfg):
    """Sample a full-resolution image from a multiscale model.

    ``cfg.size`` is the output size and must be divisible by ``2^M``.
    """
    M = model.levels
    H, W = cfg.size
    if H % 2**M or W % 2**M:
        raise GeometryError(f"size {cfg.size} not divisible by 2^{M}")
    rng = np.random.default_rng(cfg.seed)
    margin = cfg.detail_margin if M > 0 else 0
    coarse_cfg = SampleConfig((H // 2**M + margin, W // 2**M + margin), cfg.burn_in,
                              cfg.boundary_std, cfg.seed)
    img = sample_coarse(model.coarse.params, model.coarse.mask, coarse_cfg, rng)
    for m in range(M, 0, -1):
        level = model.details[m - 1]
        sp = sample_details(level.params, level.mask, img, cfg, rng)
        img = haar_inverse(sp)
    return img[img.shape[0] - H:, img.shape[1] - W:].copy()
