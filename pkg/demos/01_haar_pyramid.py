"""Haar superpixels and the multiscale likelihood bookkeeping.

A 2x2 block of pixels is mapped to one low-resolution coefficient and three
detail coefficients by an orthonormal transform. Applying it recursively
gives a pyramid whose coefficients carry exactly the same information (and
the same density, since the Jacobian is one) as the image.
"""

import numpy as np

from causalfield import build_pyramid, collapse_pyramid, haar_forward
from causalfield.mcgsm import random_params
from causalfield.multiscale import Level, MultiscaleModel, image_log_likelihood
from causalfield.neighborhoods import causal_mask, superpixel_mask

rng = np.random.default_rng(0)
block = np.array([[1.0, 0.0], [0.0, 0.0]])
print("corner block ->", haar_forward(block).channels[:, 0, 0])

image = rng.standard_normal((64, 64))
pyr = build_pyramid(image, 3)
print("coarse image:", pyr.coarse.shape, " detail levels:", [d.shape for d in pyr.details])
print("energy before / after:", (image**2).sum(), (pyr.coarse**2).sum() + sum((d**2).sum() for d in pyr.details))
print("round-trip error:", np.abs(collapse_pyramid(pyr) - image).max())

# a random two-level model: the image log-likelihood is the sum over levels
coarse_mask, fine_mask = causal_mask(1, 3), superpixel_mask(3)
model = MultiscaleModel(
    Level(random_params(2, 2, coarse_mask.input_size, 1, rng), coarse_mask),
    [Level(random_params(2, 2, fine_mask.input_size, 3, rng), fine_mask) for _ in range(2)],
)
total, per_level = image_log_likelihood(model, image[:16, :16])
for m, ll in enumerate(per_level):
    print(f"level {m}: {ll.size:4d} positions, log-likelihood {ll.sum():9.3f} nats")
print(f"total: {total:.3f} nats")
