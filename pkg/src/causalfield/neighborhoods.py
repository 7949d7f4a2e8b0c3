"""Conditioning neighborhoods and extraction of (input, output) training pairs.

A :class:`NeighborhoodMask` lists the positions, relative to the pixel being
predicted, whose values are fed to a conditional model. Offsets are
``(d_row, d_col, channel)`` triples. Channels listed in
``strictly_causal_channels`` may only look at positions that come earlier in
raster order; other channels (the low-resolution channel of a superpixel
image) are assumed to be known in full before prediction starts.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParameterError

__all__ = [
    "NeighborhoodMask",
    "PatchDataset",
    "causal_mask",
    "superpixel_mask",
    "extract_pairs",
    "as_channels",
]


def _precedes(d_row, d_col):
    return d_row < 0 or (d_row == 0 and d_col < 0)


@dataclass(frozen=True)
class NeighborhoodMask:
    offsets: tuple
    output_channels: tuple = (0,)
    strictly_causal_channels: frozenset = frozenset({0})
    name: str = ""

    def __post_init__(self):
        offsets = tuple((int(r), int(c), int(ch)) for r, c, ch in self.offsets)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "output_channels", tuple(int(c) for c in self.output_channels))
        object.__setattr__(self, "strictly_causal_channels", frozenset(self.strictly_causal_channels))
        if len(set(offsets)) != len(offsets):
            raise ParameterError("mask offsets must be unique")
        for r, c, ch in offsets:
            if ch in self.strictly_causal_channels and not _precedes(r, c):
                raise ParameterError(f"offset {(r, c, ch)} violates raster causality")

    @property
    def input_size(self):
        return len(self.offsets)

    @property
    def output_size(self):
        return len(self.output_channels)

    @property
    def n_channels(self):
        chans = [ch for _, _, ch in self.offsets] + list(self.output_channels)
        return max(chans) + 1

    def extent(self):
        """Return ``(up, down, left, right)``, the reach of the mask around its center."""
        rows = [r for r, _, _ in self.offsets] + [0]
        cols = [c for _, c, _ in self.offsets] + [0]
        return -min(rows), max(rows), -min(cols), max(cols)

    @property
    def height(self):
        up, down, _, _ = self.extent()
        return up + down + 1

    def to_dict(self):
        return {
            "name": self.name,
            "offsets": [list(o) for o in self.offsets],
            "output_channels": list(self.output_channels),
            "strictly_causal_channels": sorted(self.strictly_causal_channels),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            offsets=tuple(tuple(o) for o in d["offsets"]),
            output_channels=tuple(d["output_channels"]),
            strictly_causal_channels=frozenset(d["strictly_causal_channels"]),
            name=d.get("name", ""),
        )


def causal_mask(rows_above, row_width):
    """Causal neighborhood of a single-channel image.

    Covers ``rows_above`` full rows of width ``row_width`` above the predicted
    pixel plus the pixels to its left on the same row. ``causal_mask(3, 7)`` is
    the upper half of a 7x7 window, 24 pixels.
    """
    if rows_above < 0 or row_width < 1 or row_width % 2 == 0:
        raise ParameterError("rows_above must be >= 0 and row_width odd and >= 1")
    half = (row_width - 1) // 2
    offsets = [(r, c, 0) for r in range(-rows_above, 0) for c in range(-half, half + 1)]
    offsets += [(0, c, 0) for c in range(-half, 0)]
    return NeighborhoodMask(tuple(offsets), (0,), frozenset({0}), name=f"causal({rows_above},{row_width})")


def superpixel_mask(window=3):
    """Neighborhood for predicting the three detail channels of a superpixel.

    The low-resolution channel 0 is visible over the whole ``window x window``
    square (it is sampled before any detail), while detail channels 1-3 are
    only visible at strictly causal positions of the same square.
    """
    if window < 1 or window % 2 == 0:
        raise ParameterError("window must be odd and >= 1")
    half = window // 2
    grid = [(r, c) for r in range(-half, half + 1) for c in range(-half, half + 1)]
    offsets = [(r, c, 0) for r, c in grid]
    offsets += [(r, c, ch) for r, c in grid if _precedes(r, c) for ch in (1, 2, 3)]
    return NeighborhoodMask(tuple(offsets), (1, 2, 3), frozenset({1, 2, 3}), name=f"superpixel({window})")


@dataclass
class PatchDataset:
    """Centered input/output pairs gathered under a mask.

    ``inputs + input_mean`` recovers the raw neighborhood values. In padded
    extraction, entries that fall outside the image are NaN.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    input_mean: np.ndarray
    output_mean: np.ndarray
    mask: NeighborhoodMask = None
    scale: int = 0
    positions: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ParameterError("inputs and outputs must have the same number of rows")

    def __len__(self):
        return self.outputs.shape[0]

    @property
    def raw_inputs(self):
        return self.inputs + self.input_mean

    @property
    def raw_outputs(self):
        return self.outputs + self.output_mean

    def subset(self, idx):
        pos = None if self.positions is None else self.positions[idx]
        return PatchDataset(self.inputs[idx], self.outputs[idx], self.input_mean,
                            self.output_mean, self.mask, self.scale, pos)

    def joint(self):
        """Rows ``[x, y]`` for fitting a joint density."""
        return np.hstack([self.inputs, self.outputs])

    @staticmethod
    def concatenate(datasets):
        """Stack datasets and re-center them on the pooled means."""
        datasets = list(datasets)
        if not datasets:
            raise ParameterError("nothing to concatenate")
        X = np.vstack([d.raw_inputs for d in datasets])
        Y = np.vstack([d.raw_outputs for d in datasets])
        xm = _column_means(X)
        ym = Y.mean(axis=0) if len(Y) else np.zeros(Y.shape[1])
        return PatchDataset(X - xm, Y - ym, xm, ym, datasets[0].mask, datasets[0].scale)


def _column_means(X):
    # NaN marks padded entries; fully padded columns get mean zero
    counts = np.sum(~np.isnan(X), axis=0)
    sums = np.nansum(X, axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)


def as_channels(image):
    """View a 2-D image as a ``(1, H, W)`` stack; pass 3-D stacks through."""
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        return image[None]
    if image.ndim != 3:
        raise GeometryError("expected a 2-D image or a (channels, H, W) stack")
    return image


def _gather(img, mask, rows, cols):
    H, W = img.shape[1:]
    k = mask.input_size
    X = np.empty((len(rows), k))
    for j, (dr, dc, ch) in enumerate(mask.offsets):
        r, c = rows + dr, cols + dc
        inside = (r >= 0) & (r < H) & (c >= 0) & (c < W)
        col = np.full(len(rows), np.nan)
        col[inside] = img[ch, r[inside], c[inside]]
        X[:, j] = col
    Y = np.stack([img[ch, rows, cols] for ch in mask.output_channels], axis=1) \
        if len(rows) else np.empty((0, mask.output_size))
    return X, Y


def extract_pairs(image, mask, max_samples=None, rng=None, *, pad=False, center=True, scale=0):
    """Gather (neighborhood, output) pairs from an image.

    Parameters
    ----------
    image : array, (H, W) or (channels, H, W)
    mask : NeighborhoodMask
    max_samples : int, optional
        Upper bound on the number of rows. Centers are drawn uniformly
        without replacement when more valid positions exist.
    rng : numpy Generator or seed
    pad : bool
        If False, positions whose neighborhood leaves the image are skipped.
        If True every position is used and missing neighbors are NaN.
    center : bool
        Subtract the column means (ignoring NaN) and record them.
    """
    img = as_channels(image)
    if img.shape[0] < mask.n_channels:
        raise GeometryError(f"mask needs {mask.n_channels} channels, image has {img.shape[0]}")
    H, W = img.shape[1:]
    up, down, left, right = mask.extent()
    if pad:
        r0, r1, c0, c1 = 0, H, 0, W
    else:
        r0, r1, c0, c1 = up, H - down, left, W - right
    if r1 <= r0 or c1 <= c0:
        raise GeometryError(f"image {H}x{W} is too small for mask extent {(up, down, left, right)}")
    n_valid = (r1 - r0) * (c1 - c0)
    idx = np.arange(n_valid)
    if max_samples is not None and max_samples < n_valid:
        rng = np.random.default_rng(rng)
        idx = np.sort(rng.choice(n_valid, size=max_samples, replace=False))
    rows = r0 + idx // (c1 - c0)
    cols = c0 + idx % (c1 - c0)
    X, Y = _gather(img, mask, rows, cols)
    if center and len(Y):
        xm = _column_means(X)
        ym = Y.mean(axis=0)
    else:
        xm, ym = np.zeros(X.shape[1]), np.zeros(Y.shape[1])
    return PatchDataset(X - xm, Y - ym, xm, ym, mask, scale, np.stack([rows, cols], axis=1))
