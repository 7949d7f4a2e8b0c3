"""How star-shaped are joint responses of a derivative filter?

Responses of a vertical Gaussian-derivative filter at two positions d pixels
apart are whitened and fitted with an L_p-spherically symmetric density. A
fitted p near 2 means elliptical (Gaussian-like) contours; smaller p means
the joint histogram is pinched toward the axes.
"""

import numpy as np

from causalfield import DeadLeavesConfig, generate_dead_leaves, lp_statistic_table

images = [generate_dead_leaves(DeadLeavesConfig((256, 256), seed=s)) for s in range(20)]
print("  d      p     SE")
for row in lp_statistic_table(images, [1, 2, 4, 8, 16, 25, 32, 48, 64]):
    print(f"{row.d:3d}  {row.p:5.2f}  {row.p_se:5.3f}")

rng = np.random.default_rng(0)
noise = [rng.standard_normal((256, 256)) for _ in range(20)]
print("white noise, d = 8: p =", round(lp_statistic_table(noise, [8])[0].p, 2))
