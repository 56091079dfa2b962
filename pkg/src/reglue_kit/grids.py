"""Two-chart raster machinery: grids, vectorized map iteration, flood fill.

The sphere is covered by the disks |z| <= 1.5 and |w| <= 1.5 in the z and
w = 1/z charts.  Infinity is encoded as complex(inf, 0) inside arrays; the
evaluation kernel switches to the reciprocal formula for |z| > 1 so nothing
overflows.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .sphere import QuadraticRationalMap, SpherePoint

CHART_EXTENT = 1.5
INF_C = complex(np.inf, 0.0)

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def chart_axis(resolution: int, extent: float = CHART_EXTENT) -> np.ndarray:
    step = 2.0 * extent / resolution
    return -extent + step * (np.arange(resolution) + 0.5)


def chart_grid(resolution: int, extent: float = CHART_EXTENT) -> np.ndarray:
    """Pixel-center coordinates (row = imaginary, col = real)."""
    ax = chart_axis(resolution, extent)
    return ax[None, :] + 1j * ax[:, None]


def active_mask(resolution: int, extent: float = CHART_EXTENT) -> np.ndarray:
    return np.abs(chart_grid(resolution, extent)) <= extent


def sphere_from_chart(coords: np.ndarray, chart: int) -> np.ndarray:
    """Map chart coordinates to z-plane values (chart 1 inverts; 0 -> inf)."""
    if chart == 0:
        return coords.astype(np.complex128)
    out = np.empty_like(coords, dtype=np.complex128)
    nz = coords != 0
    out[nz] = 1.0 / coords[nz]
    out[~nz] = INF_C
    return out


def pixel_index(value: complex, is_inf: bool, resolution: int,
                extent: float = CHART_EXTENT):
    """(chart, row, col) of the pixel containing a sphere point."""
    if is_inf or abs(value) > 1.0:
        chart = 1
        w = 0j if is_inf else 1.0 / value
    else:
        chart = 0
        w = value
    step = 2.0 * extent / resolution
    col = int(np.floor((w.real + extent) / step))
    row = int(np.floor((w.imag + extent) / step))
    col = min(max(col, 0), resolution - 1)
    row = min(max(row, 0), resolution - 1)
    return chart, row, col


def pixel_of_point(p: SpherePoint, resolution: int, extent: float = CHART_EXTENT):
    return pixel_index(p.z if not p.is_infinity else 0j, p.is_infinity,
                       resolution, extent)


def evaluate_array(m: QuadraticRationalMap, z: np.ndarray) -> np.ndarray:
    """Vectorized map evaluation with inf (= complex(inf, 0)) conventions."""
    n0, n1, n2 = m.num
    d0, d1, d2 = m.den
    z = np.asarray(z, dtype=np.complex128)
    finite = np.isfinite(z.real) & np.isfinite(z.imag)
    small = finite & (np.abs(z) <= 1.0)
    zs = np.where(small, z, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(finite & ~small, 1.0 / np.where(small | ~finite, 1, z), 0)
        num = np.where(small, n0 + zs * (n1 + zs * n2), n2 + u * (n1 + u * n0))
        den = np.where(small, d0 + zs * (d1 + zs * d2), d2 + u * (d1 + u * d0))
        out = num / den
    bad = (den == 0) | ~(np.isfinite(out.real) & np.isfinite(out.imag))
    out = np.where(bad, INF_C, out)
    return out


def chordal_to_point(z: np.ndarray, p: SpherePoint) -> np.ndarray:
    """Chordal distance from each array entry to a fixed sphere point."""
    z = np.asarray(z, dtype=np.complex128)
    finite = np.isfinite(z.real) & np.isfinite(z.imag)
    az = np.abs(np.where(finite, z, 0))
    if p.is_infinity:
        out = np.where(finite, 2.0 / np.sqrt(1.0 + az * az), 0.0)
        return out
    pz = p.z
    if abs(pz) > 1.0:
        # fold both through 1/z: chordal is inversion-invariant
        with np.errstate(divide="ignore", invalid="ignore"):
            zi = np.where(finite & (z != 0), 1.0 / np.where(z == 0, 1, z), 0)
        zi = np.where(finite, np.where(z == 0, INF_C, zi), 0)
        return chordal_to_point(zi, SpherePoint(1.0 / pz))
    num = 2.0 * np.abs(np.where(finite, z, 0) - pz)
    den = np.sqrt((1.0 + az * az) * (1.0 + abs(pz) ** 2))
    out = np.where(finite, num / den, 2.0 / np.sqrt(1.0 + abs(pz) ** 2))
    return np.minimum(out, 2.0)


class UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        while p != self.parent[p]:
            self.parent[p] = self.parent[self.parent[p]]
            p = self.parent[p]
        root = p
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # deterministic canonical representative
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx


_overlap_cache: dict = {}


def overlap_pairs(resolution: int, extent: float = CHART_EXTENT):
    """Flat indices (chart-0 pixel, matching chart-1 pixel) over the overlap annulus."""
    key = (resolution, extent)
    if key in _overlap_cache:
        return _overlap_cache[key]
    grid = chart_grid(resolution, extent)
    mask = (np.abs(grid) >= 1.0 / extent) & (np.abs(grid) <= extent)
    src = np.flatnonzero(mask)
    z = grid.ravel()[src]
    w = 1.0 / z
    step = 2.0 * extent / resolution
    col = np.floor((w.real + extent) / step).astype(int)
    row = np.floor((w.imag + extent) / step).astype(int)
    keep = (col >= 0) & (col < resolution) & (row >= 0) & (row < resolution)
    dst = row[keep] * resolution + col[keep]
    pairs = (src[keep], dst)
    _overlap_cache[key] = pairs
    return pairs


def label_components(targets0: np.ndarray, targets1: np.ndarray,
                     resolution: int, extent: float = CHART_EXTENT):
    """Connected components of equal-target pixels across both charts.

    ``targetsX`` are integer grids (-1 = unlabeled pixel).  Components use
    4-adjacency within a chart and are merged across charts wherever the
    overlap annulus identifies two converged pixels with the same target.
    Returns (labels0, labels1, canonical label set); labels are globally
    unique ints, -1 where unlabeled.
    """
    labels = []
    offset = 0
    for targets in (targets0, targets1):
        lab = -np.ones_like(targets, dtype=np.int64)
        for t in np.unique(targets[targets >= 0]):
            mask = targets == t
            comp, n = ndimage.label(mask, structure=_FOUR_CONN)
            lab[mask] = comp[mask] + offset
            offset += int(n)
        labels.append(lab)
    lab0, lab1 = labels
    uf = UnionFind()
    src, dst = overlap_pairs(resolution, extent)
    l0 = lab0.ravel()[src]
    l1 = lab1.ravel()[dst]
    t0 = targets0.ravel()[src]
    t1 = targets1.ravel()[dst]
    ok = (l0 >= 0) & (l1 >= 0) & (t0 == t1)
    for a, b in set(zip(l0[ok].tolist(), l1[ok].tolist())):
        uf.union(a, b)
    for arr in (lab0, lab1):
        flat = arr.ravel()
        present = np.unique(flat[flat >= 0])
        lut = {int(v): uf.find(int(v)) for v in present}
        for v, r in lut.items():
            if v != r:
                flat[flat == v] = r
    final = set(np.unique(lab0[lab0 >= 0]).tolist()) | set(np.unique(lab1[lab1 >= 0]).tolist())
    return lab0, lab1, final
