"""Binary occupancy masks of element geometry over a metric window, and mask IoU."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import CLASSES, ElementClass, Frame, Polyline

DEFAULT_THICKNESS = 0.5


@dataclass(frozen=True)
class GridSpec:
    """Pixel grid over x in [-half_width_m, half_width_m], y in [-half_length_m, half_length_m].

    Row 0 is the +y edge; column 0 is the -x edge.
    """

    width_px: int = 200
    height_px: int = 400
    half_width_m: float = 15.0
    half_length_m: float = 30.0

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("grid dimensions must be positive")
        if self.half_width_m <= 0 or self.half_length_m <= 0:
            raise ValueError("grid extents must be positive")

    @property
    def res_x(self) -> float:
        return 2.0 * self.half_width_m / self.width_px

    @property
    def res_y(self) -> float:
        return 2.0 * self.half_length_m / self.height_px

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height_px, self.width_px)

    def col_centers(self) -> np.ndarray:
        return -self.half_width_m + (np.arange(self.width_px) + 0.5) * self.res_x

    def row_centers(self) -> np.ndarray:
        return self.half_length_m - (np.arange(self.height_px) + 0.5) * self.res_y

    def doubled(self) -> GridSpec:
        """Same resolution, twice the half-extents."""
        return GridSpec(2 * self.width_px, 2 * self.height_px, 2 * self.half_width_m, 2 * self.half_length_m)


# the track-matching default: 0.15 m/px over twice the nominal perception window
MATCH_GRID = GridSpec().doubled()


@dataclass(frozen=True, eq=False)
class RasterMask:
    grid: GridSpec
    bits: np.ndarray  # bool, shape (height_px, width_px), row-major

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != self.grid.shape:
            raise ValueError(f"mask shape {bits.shape} does not match grid {self.grid.shape}")
        bits = bits.copy()
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    def __eq__(self, other):
        if not isinstance(other, RasterMask):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.bits, other.bits)

    def __or__(self, other: RasterMask) -> RasterMask:
        _check_grids(self, other)
        return RasterMask(self.grid, self.bits | other.bits)

    def count(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def empty(cls, grid: GridSpec) -> RasterMask:
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def from_indices(cls, grid: GridSpec, flat: np.ndarray) -> RasterMask:
        bits = np.zeros(grid.height_px * grid.width_px, dtype=bool)
        bits[flat] = True
        return cls(grid, bits.reshape(grid.shape))


def _check_grids(a: RasterMask, b: RasterMask):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def _segment_pixels(p0, p1, r: float, grid: GridSpec) -> np.ndarray:
    """Flat indices of pixels whose centers lie within r of segment p0-p1."""
    x0, y0 = p0
    x1, y1 = p1
    lo_x, hi_x = min(x0, x1) - r, max(x0, x1) + r
    lo_y, hi_y = min(y0, y1) - r, max(y0, y1) + r
    c0 = max(0, int(np.floor((lo_x + grid.half_width_m) / grid.res_x - 0.5)))
    c1 = min(grid.width_px - 1, int(np.ceil((hi_x + grid.half_width_m) / grid.res_x - 0.5)))
    r0 = max(0, int(np.floor((grid.half_length_m - hi_y) / grid.res_y - 0.5)))
    r1 = min(grid.height_px - 1, int(np.ceil((grid.half_length_m - lo_y) / grid.res_y - 0.5)))
    if c0 > c1 or r0 > r1:
        return np.empty(0, dtype=np.int64)
    cols = np.arange(c0, c1 + 1)
    rows = np.arange(r0, r1 + 1)
    cx = -grid.half_width_m + (cols + 0.5) * grid.res_x
    cy = grid.half_length_m - (rows + 0.5) * grid.res_y
    px = cx[None, :] - x0
    py = cy[:, None] - y0
    dx, dy = x1 - x0, y1 - y0
    ll = dx * dx + dy * dy
    if ll > 0:
        t = np.clip((px * dx + py * dy) / ll, 0.0, 1.0)
    else:
        t = np.zeros_like(px * py)
    ex = px - t * dx
    ey = py - t * dy
    hit = ex * ex + ey * ey <= r * r
    rr, cc = np.nonzero(hit)
    return (rows[rr] * grid.width_px + cols[cc]).astype(np.int64)


def _fill_pixels(pts: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Flat indices of pixel centers inside a polygon (even-odd rule)."""
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    cx = grid.col_centers()
    cy = grid.row_centers()
    cols = np.nonzero((cx >= lo[0]) & (cx <= hi[0]))[0]
    rows = np.nonzero((cy >= lo[1]) & (cy <= hi[1]))[0]
    if len(cols) == 0 or len(rows) == 0:
        return np.empty(0, dtype=np.int64)
    X, Y = np.meshgrid(cx[cols], cy[rows])
    inside = np.zeros(X.shape, dtype=bool)
    nxt = np.roll(pts, -1, axis=0)
    for (xa, ya), (xb, yb) in zip(pts, nxt):
        if ya == yb:
            continue
        crosses = (ya > Y) != (yb > Y)
        xint = xa + (Y - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (X < xint)
    rr, cc = np.nonzero(inside)
    return (rows[rr] * grid.width_px + cols[cc]).astype(np.int64)


def stroke_indices(points, closed: bool, thickness: float, grid: GridSpec, fill: bool = False) -> np.ndarray:
    """Sorted unique flat pixel indices covered by the stroked (optionally filled) curve."""
    if thickness <= 0:
        raise ValueError("thickness must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    r = 0.5 * thickness
    segs = list(zip(pts[:-1], pts[1:]))
    if closed and len(pts) > 2:
        segs.append((pts[-1], pts[0]))
    parts = [_segment_pixels(a, b, r, grid) for a, b in segs] or [np.empty(0, dtype=np.int64)]
    if fill and closed and len(pts) > 2:
        parts.append(_fill_pixels(pts, grid))
    return np.unique(np.concatenate(parts))


def rasterize(geometry: Polyline, thickness: float = DEFAULT_THICKNESS, grid: GridSpec = GridSpec(),
              fill: bool = False) -> RasterMask:
    """Pixels whose centers lie within thickness/2 of the curve; closed curves stroked along the seam."""
    return RasterMask.from_indices(grid, stroke_indices(geometry.points, geometry.closed, thickness, grid, fill))


def iou(a: RasterMask, b: RasterMask) -> float:
    _check_grids(a, b)
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(a.bits & b.bits)) / union


def index_iou(a: np.ndarray, b: np.ndarray) -> float:
    """IoU of two masks given as sorted unique flat index arrays."""
    if len(a) == 0 and len(b) == 0:
        return 0.0
    inter = len(np.intersect1d(a, b, assume_unique=True))
    return inter / (len(a) + len(b) - inter)


def rasterize_frame(frame: Frame, thickness: float = DEFAULT_THICKNESS, grid: GridSpec = GridSpec(),
                    fill_crossings: bool = False) -> dict[ElementClass, RasterMask]:
    """Per-class union of element masks."""
    flat = {c: [] for c in CLASSES}
    for el in frame.elements:
        fill = fill_crossings and el.cls is ElementClass.CROSSING
        flat[el.cls].append(stroke_indices(el.geometry.points, el.geometry.closed, thickness, grid, fill))
    return {
        c: RasterMask.from_indices(grid, np.concatenate(v) if v else np.empty(0, dtype=np.int64))
        for c, v in flat.items()
    }


def to_pgm(mask: RasterMask) -> bytes:
    """Binary PGM (P5), 255 for set pixels."""
    h, w = mask.grid.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + (mask.bits.astype(np.uint8) * 255).tobytes()
