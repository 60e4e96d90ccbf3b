"""Minimal SVG scatter plots of clustered point clouds.

Self-contained emitter: one circle per point colored by cluster, one
square per center, mapped into a 600x600 viewBox with a 5% margin around
the joint bounding box of points and centers.  SVG y grows downward, so
the data y-axis is flipped to keep plots in the usual orientation.
"""

import numpy as np

VIEW = 600.0
MARGIN = 0.05

# 10-color qualitative palette, cycled when there are more clusters
PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
)


def _frame(points: np.ndarray, centers: np.ndarray):
    """Affine data->view transform covering both clouds plus margin."""
    both = np.vstack([points, centers])
    lo = both.min(axis=0)
    hi = both.max(axis=0)
    span = hi - lo
    # keep degenerate (flat) data drawable
    span = np.where(span > 0, span, 1.0)
    pad = MARGIN * span
    lo = lo - pad
    span = span + 2 * pad
    scale = VIEW / span

    def to_view(xy: np.ndarray):
        x = (xy[0] - lo[0]) * scale[0]
        y = VIEW - (xy[1] - lo[1]) * scale[1]
        return x, y

    return to_view


def scatter_svg(
    points: np.ndarray,
    labels: np.ndarray,
    centers: np.ndarray,
    point_radius: float = 3.0,
    center_size: float = 12.0,
) -> str:
    """Render points colored by label plus square center markers."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    centers = np.asarray(centers, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array")
    if centers.ndim != 2 or centers.shape[1] != 2:
        raise ValueError("centers must be a (k, 2) array")
    if labels.shape != (points.shape[0],):
        raise ValueError("labels must have one entry per point")

    to_view = _frame(points, centers)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEW:g} {VIEW:g}">',
        f'<rect width="{VIEW:g}" height="{VIEW:g}" fill="white"/>',
    ]
    for point, label in zip(points, labels):
        x, y = to_view(point)
        color = PALETTE[int(label) % len(PALETTE)]
        parts.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{point_radius:g}" '
            f'fill="{color}" fill-opacity="0.75"/>'
        )
    half = center_size / 2.0
    for j, center in enumerate(centers):
        x, y = to_view(center)
        color = PALETTE[j % len(PALETTE)]
        parts.append(
            f'<rect x="{x - half:.2f}" y="{y - half:.2f}" '
            f'width="{center_size:g}" height="{center_size:g}" '
            f'fill="{color}" stroke="black" stroke-width="1.5"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_scatter_svg(path, points, labels, centers, **kwargs) -> None:
    with open(path, "w") as fh:
        fh.write(scatter_svg(points, labels, centers, **kwargs))
