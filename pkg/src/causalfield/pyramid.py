"""Orthonormal 2x2 Haar superpixel transform and the multiscale pyramid.

For a 2x2 block ``(a, b; c, d)`` the four coefficients are::

    low  = (a + b + c + d) / 2
    hor  = (a - b + c - d) / 2
    ver  = (a + b - c - d) / 2
    diag = (a - b - c + d) / 2

The basis is orthonormal, so the transform is an isometry with unit Jacobian
determinant and log-likelihoods carry over between representations without
correction. The low channel is twice the block average.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

__all__ = [
    "SuperpixelImage",
    "Pyramid",
    "haar_forward",
    "haar_inverse",
    "build_pyramid",
    "collapse_pyramid",
]


@dataclass
class SuperpixelImage:
    """Four-channel image: ``channels[0]`` low resolution, ``channels[1:]`` details."""

    channels: np.ndarray

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=float)
        if self.channels.ndim != 3 or self.channels.shape[0] != 4:
            raise GeometryError("a superpixel image has shape (4, h, w)")

    @property
    def lowres(self):
        return self.channels[0]

    @property
    def details(self):
        return self.channels[1:]

    @classmethod
    def from_parts(cls, lowres, details):
        return cls(np.concatenate([np.asarray(lowres, float)[None], np.asarray(details, float)]))


def haar_forward(image):
    x = np.asarray(image, dtype=float)
    if x.ndim != 2:
        raise GeometryError("haar_forward expects a 2-D image")
    H, W = x.shape
    if H % 2 or W % 2:
        raise GeometryError(f"image dimensions must be even, got {H}x{W}")
    a = x[0::2, 0::2]
    b = x[0::2, 1::2]
    c = x[1::2, 0::2]
    d = x[1::2, 1::2]
    return SuperpixelImage(np.stack([
        (a + b + c + d) / 2,
        (a - b + c - d) / 2,
        (a + b - c - d) / 2,
        (a - b - c + d) / 2,
    ]))


def haar_inverse(sp):
    if not isinstance(sp, SuperpixelImage):
        sp = SuperpixelImage(sp)
    w0, w1, w2, w3 = sp.channels
    h, w = w0.shape
    out = np.empty((2 * h, 2 * w))
    # the basis matrix is symmetric and orthogonal, so it is its own inverse
    out[0::2, 0::2] = (w0 + w1 + w2 + w3) / 2
    out[0::2, 1::2] = (w0 - w1 + w2 - w3) / 2
    out[1::2, 0::2] = (w0 + w1 - w2 - w3) / 2
    out[1::2, 1::2] = (w0 - w1 - w2 + w3) / 2
    return out


@dataclass
class Pyramid:
    """Recursive Haar decomposition.

    ``details[m - 1]`` holds the 3-channel detail image Y^m and ``lowres[m - 1]``
    the low-resolution image X^m it is conditioned on, for m = 1..M (fine to
    coarse). ``coarse`` is X^M, or the image itself when M = 0.
    """

    coarse: np.ndarray
    details: list = field(default_factory=list)
    lowres: list = field(default_factory=list)

    @property
    def levels(self):
        return len(self.details)

    def superpixels(self, m):
        """Superpixel image at level m (1-based): X^m stacked with Y^m."""
        return SuperpixelImage.from_parts(self.lowres[m - 1], self.details[m - 1])

    def image_at(self, m):
        """The low-resolution image X^m (X^0 is rebuilt by collapsing)."""
        if m == 0:
            return collapse_pyramid(self)
        return self.lowres[m - 1]


def build_pyramid(image, M):
    x = np.asarray(image, dtype=float)
    if x.ndim != 2:
        raise GeometryError("build_pyramid expects a 2-D image")
    if M < 0:
        raise GeometryError("number of levels must be >= 0")
    H, W = x.shape
    if H % 2**M or W % 2**M:
        raise GeometryError(f"image {H}x{W} is not divisible by 2^{M}")
    details, lowres = [], []
    for _ in range(M):
        sp = haar_forward(x)
        details.append(sp.details.copy())
        x = sp.lowres.copy()
        lowres.append(x)
    return Pyramid(x.copy(), details, lowres)


def collapse_pyramid(p):
    x = np.asarray(p.coarse, dtype=float)
    for det in reversed(p.details):
        x = haar_inverse(SuperpixelImage.from_parts(x, det))
    return x
