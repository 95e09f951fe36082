"""Color ramps for exporting scalar channels as RGB point clouds."""

import numpy as np

# Piecewise-linear perceptual ramp (dark purple -> teal -> yellow), anchor
# colors documented in the README so exported files are reproducible exactly.
RAMP_ANCHORS = np.array(
    [
        [68, 1, 84],
        [71, 44, 122],
        [59, 81, 139],
        [44, 113, 142],
        [33, 144, 141],
        [39, 173, 129],
        [92, 200, 99],
        [170, 220, 50],
        [253, 231, 37],
    ],
    dtype=np.float64,
)


def colorize(values, vmin: float = 0.0, vmax: float = 1.0) -> np.ndarray:
    """Map scalars to (N, 3) uint8 colors through the ramp."""
    v = np.asarray(values, dtype=np.float64)
    if vmax <= vmin:
        raise ValueError("vmax must exceed vmin")
    t = np.clip((v - vmin) / (vmax - vmin), 0.0, 1.0) * (len(RAMP_ANCHORS) - 1)
    lo = np.floor(t).astype(int)
    hi = np.minimum(lo + 1, len(RAMP_ANCHORS) - 1)
    frac = (t - lo)[:, None]
    rgb = RAMP_ANCHORS[lo] * (1.0 - frac) + RAMP_ANCHORS[hi] * frac
    return np.clip(np.round(rgb), 0, 255).astype(np.uint8)
