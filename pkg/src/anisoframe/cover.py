"""Anisotropic homogeneous and inhomogeneous frequency covers.

Every member of a cover is the image ``T_i * cell`` of a base cell under
``T_i = A^i`` (homogeneous) or ``T_0 = I``, ``T_i = A^(i-1)`` (inhomogeneous).
Base cells are "radial" sets ``{r <= N(x) <= R}`` for a norm ``N`` (Euclidean
for annuli, sup-norm for boxes), which makes the intersection of two
members decidable along rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .dilation import ExpansiveMatrix, op_norm, power, sphere_points
from .errors import CellOutOfBox, LowCellMissesOrigin, OriginNotExcluded

CellKind = Literal["annulus", "centered-box", "box-minus-box"]
CELL_KINDS = ("annulus", "centered-box", "box-minus-box")
DEFAULT_SHRINK = 0.95
_TOUCH_TOL = 1e-12


@dataclass(frozen=True)
class BaseCell:
    """Closed radial cell ``{inner_radius <= N(x) <= outer_radius}``.

    ``shrink`` controls the inner set used for covering checks: the radial
    interval is contracted about its midpoint by that factor.
    """

    kind: CellKind
    inner_radius: float
    outer_radius: float
    shrink: float = DEFAULT_SHRINK

    def __post_init__(self):
        if self.kind not in CELL_KINDS:
            raise ValueError(f"unknown cell kind {self.kind!r}")
        if not 0.0 < self.shrink <= 1.0:
            raise ValueError("shrink must lie in (0, 1]")
        if self.outer_radius <= 0:
            raise ValueError("outer_radius must be positive")
        if self.kind != "centered-box" and not 0.0 <= self.inner_radius < self.outer_radius:
            raise ValueError("need 0 <= inner_radius < outer_radius")
        if self.outer_radius > 1.0 + 1e-15:
            raise CellOutOfBox(f"outer_radius {self.outer_radius} puts the cell outside [-1,1]^d")

    @property
    def origin_excluded(self) -> bool:
        return self.kind != "centered-box" and self.inner_radius > 0

    @property
    def radial_interval(self) -> tuple[float, float]:
        if self.kind == "centered-box":
            return 0.0, self.outer_radius
        return self.inner_radius, self.outer_radius

    @property
    def shrunk_interval(self) -> tuple[float, float]:
        lo, hi = self.radial_interval
        if self.kind == "centered-box":
            return 0.0, self.shrink * hi
        pad = 0.5 * (1.0 - self.shrink) * (hi - lo)
        return lo + pad, hi - pad

    @property
    def euclidean(self) -> bool:
        return self.kind == "annulus"

    def norm(self, y: np.ndarray) -> np.ndarray:
        """Cell norm of points ``y`` with shape ``(n, d)``."""
        if self.euclidean:
            return np.linalg.norm(y, axis=-1)
        return np.max(np.abs(y), axis=-1)

    def contains(self, y: np.ndarray, shrunk: bool = False) -> np.ndarray:
        lo, hi = self.shrunk_interval if shrunk else self.radial_interval
        n = self.norm(y)
        tol = _TOUCH_TOL * hi
        return (n >= lo - tol) & (n <= hi + tol)

    def euclidean_radii(self, dim: int) -> tuple[float, float]:
        """Bounds ``r <= |x| <= R`` valid for every point of the cell."""
        lo, hi = self.radial_interval
        if self.euclidean:
            return lo, hi
        return lo, hi * math.sqrt(dim)

    def volume(self, dim: int) -> float:
        lo, hi = self.radial_interval
        if self.euclidean:
            unit = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
            return unit * (hi**dim - lo**dim)
        return (2 * hi) ** dim - (2 * lo) ** dim

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
            "shrink": self.shrink,
            "origin_excluded": self.origin_excluded,
        }


def default_base_cell(m: ExpansiveMatrix, shrink: float = DEFAULT_SHRINK) -> BaseCell:
    """``{1/(2||A||) <= N(x) <= 1}``, with ``N`` the sup-norm (``|x|`` for d=1)."""
    a_norm = float(np.linalg.norm(m.entries, np.inf))
    return BaseCell("box-minus-box", 1.0 / (2.0 * a_norm), 1.0, shrink)


def default_low_cell(shrink: float = DEFAULT_SHRINK) -> BaseCell:
    return BaseCell("centered-box", 0.0, 1.0, shrink)


@dataclass(frozen=True)
class Cover:
    kind: Literal["homogeneous", "inhomogeneous"]
    matrix: ExpansiveMatrix
    base: BaseCell
    index_range: tuple[int, int]
    low_cell: BaseCell | None = None

    @property
    def dim(self) -> int:
        return self.matrix.dim

    @property
    def indices(self) -> range:
        return range(self.index_range[0], self.index_range[1] + 1)

    def exponent(self, i: int) -> int | None:
        """Power of ``A`` in ``T_i``; ``None`` for the low-pass member."""
        if self.kind == "homogeneous":
            return i
        return None if i == 0 else i - 1

    def transform(self, i: int) -> np.ndarray:
        e = self.exponent(i)
        return np.eye(self.dim) if e is None else power(self.matrix, e)

    def inverse_transform(self, i: int) -> np.ndarray:
        e = self.exponent(i)
        return np.eye(self.dim) if e is None else power(self.matrix, -e)

    def cell(self, i: int) -> BaseCell:
        if self.kind == "inhomogeneous" and i == 0:
            return self.low_cell
        return self.base

    def to_cell_coords(self, i: int, xi: np.ndarray) -> np.ndarray:
        return np.asarray(xi, dtype=float) @ self.inverse_transform(i).T

    def contains(self, i: int, xi: np.ndarray, shrunk: bool = False) -> np.ndarray:
        return self.cell(i).contains(self.to_cell_coords(i, xi), shrunk=shrunk)

    def describe(self) -> dict:
        out = {
            "kind": self.kind,
            "matrix": self.matrix.describe(),
            "base_cell": self.base.describe(),
            "index_range": list(self.index_range),
        }
        if self.low_cell is not None:
            out["low_cell"] = self.low_cell.describe()
        return out


def _check_box(cell: BaseCell) -> None:
    if cell.outer_radius > 1.0 + 1e-15:
        raise CellOutOfBox("cell must lie inside [-1,1]^d")


def build_homogeneous(m: ExpansiveMatrix, base: BaseCell | None = None, index_range=(-4, 4)) -> Cover:
    base = default_base_cell(m) if base is None else base
    if not base.origin_excluded:
        raise OriginNotExcluded("homogeneous base cell must exclude the origin")
    _check_box(base)
    lo, hi = int(index_range[0]), int(index_range[1])
    if lo > hi:
        raise ValueError("index_range must be ordered")
    return Cover("homogeneous", m, base, (lo, hi))


def build_inhomogeneous(m: ExpansiveMatrix, low: BaseCell | None = None, base: BaseCell | None = None,
                        index_range=(0, 5)) -> Cover:
    low = default_low_cell() if low is None else low
    base = default_base_cell(m) if base is None else base
    if low.origin_excluded:
        raise LowCellMissesOrigin("low-frequency cell must contain the origin")
    if not base.origin_excluded:
        raise OriginNotExcluded("annular base cell must exclude the origin")
    _check_box(low)
    _check_box(base)
    lo, hi = int(index_range[0]), int(index_range[1])
    if lo != 0 or hi < 0:
        raise ValueError("inhomogeneous index_range must be [0, i_max]")
    return Cover("inhomogeneous", m, base, (0, hi), low)


# ---------------------------------------------------------------------------
# intersections
# ---------------------------------------------------------------------------

def _ratio_range(c1: BaseCell, c2: BaseCell, d_mat: np.ndarray, dim: int):
    """Values taken by ``N2(D v) / N1(v)`` over directions ``v``.

    Returns ``(values, exact)`` where ``values`` is ``[min, max]`` for
    ``dim >= 2`` (connected sphere) or the two endpoint values for ``dim == 1``.
    """
    if dim == 1:
        v = np.array([[1.0], [-1.0]])
        vals = c2.norm(v @ d_mat.T) / c1.norm(v)
        return vals, True
    if c1.euclidean and c2.euclidean:
        sv = np.linalg.svd(d_mat, compute_uv=False)
        return np.array([sv.min(), sv.max()]), True
    if not c1.euclidean and not c2.euclidean and np.count_nonzero(d_mat - np.diag(np.diag(d_mat))) == 0:
        diag = np.abs(np.diag(d_mat))
        return np.array([diag.min(), diag.max()]), True
    v = sphere_points(dim, 64**dim if dim == 2 else 4096)
    vals = c2.norm(v @ d_mat.T) / c1.norm(v)
    return np.array([vals.min(), vals.max()]), False


def cells_intersect(c1: BaseCell, t1: np.ndarray, c2: BaseCell, t2: np.ndarray) -> tuple[bool, bool]:
    """Whether ``t1*c1`` and ``t2*c2`` (closed sets) intersect; second item is exactness."""
    r1, big1 = c1.radial_interval
    r2, big2 = c2.radial_interval
    if r1 == 0.0 and r2 == 0.0:
        return True, True
    dim = t1.shape[0]
    d_mat = np.linalg.solve(t2, t1)
    vals, exact = _ratio_range(c1, c2, d_mat, dim)
    lo = r2 / big1
    hi = math.inf if r1 == 0.0 else big2 / r1
    tol = 1 + _TOUCH_TOL
    if dim == 1:
        hit = any(lo / tol <= v <= hi * tol for v in vals)
    else:
        hit = vals[0] <= hi * tol and vals[1] >= lo / tol
    return bool(hit), exact


def members_intersect(c: Cover, i: int, j: int) -> bool:
    return cells_intersect(c.cell(i), c.transform(i), c.cell(j), c.transform(j))[0]


def _pair_key(c: Cover, i: int, j: int):
    if c.kind == "homogeneous":
        return ("h", abs(i - j))
    if i == 0 or j == 0:
        return ("low", max(i, j))
    return ("h", abs(i - j))


def intersection_table(c: Cover) -> dict[tuple[int, int], bool]:
    """All pairs ``(i, j)`` of the index range mapped to intersection flags."""
    cache: dict = {}
    table = {}
    for i in c.indices:
        for j in c.indices:
            key = _pair_key(c, i, j)
            if key not in cache:
                cache[key] = members_intersect(c, i, j)
            table[(i, j)] = cache[key]
    return table


def admissibility_report(c: Cover) -> dict:
    """Maximal overlap count plus the bound on ``||T_i^{-1} T_j||`` over
    intersecting pairs (the structured-cover constant)."""
    table = intersection_table(c)
    counts = {i: sum(table[(i, j)] for j in c.indices) for i in c.indices}
    exact = True
    t_norm = 0.0
    seen = set()
    for (i, j), hit in table.items():
        if not hit:
            continue
        key = (_pair_key(c, i, j), i == 0, j == 0, i <= j)
        if key in seen:
            continue
        seen.add(key)
        t_norm = max(t_norm, op_norm(c.inverse_transform(i) @ c.transform(j)))
        exact &= cells_intersect(c.cell(i), c.transform(i), c.cell(j), c.transform(j))[1]
    assert math.isfinite(t_norm)
    return {
        "admissibility_index": max(counts.values()),
        "structure_constant": t_norm,
        "intersection_exact": bool(exact),
    }


def admissibility_index(c: Cover) -> int:
    return admissibility_report(c)["admissibility_index"]


def neighbor_gap(c: Cover) -> int:
    """Smallest ``g`` with ``member_i`` and ``member_j`` disjoint whenever ``|i-j| > g``."""
    table = intersection_table(c)
    return max((abs(i - j) for (i, j), hit in table.items() if hit), default=0)


# ---------------------------------------------------------------------------
# covering
# ---------------------------------------------------------------------------

def default_region(c: Cover) -> tuple[float, float]:
    """Euclidean radii ``(rho_in, rho_out)`` of the region the truncated cover
    is expected to cover; ``rho_in >= rho_out`` means empty."""
    m = c.matrix
    base_lo, base_hi = c.base.euclidean_radii(c.dim)
    lo, hi = c.index_range
    if c.kind == "homogeneous":
        rho_in = base_hi * max(op_norm(power(m, j)) for j in range(lo - 10, lo + 1))
        rho_out = base_lo / max(op_norm(power(m, -j)) for j in range(hi, hi + 11))
        return rho_in, rho_out
    low_in = c.low_cell.radial_interval[1]
    if hi == 0:
        return 0.0, low_in
    rho_out = base_lo / max(op_norm(power(m, -j)) for j in range(hi - 1, hi + 10))
    return 0.0, max(low_in, rho_out)


def probe_points(dim: int, region: tuple[float, float], probe_grid: int) -> np.ndarray:
    rho_in, rho_out = region
    if rho_out <= rho_in or rho_out <= 0:
        return np.zeros((0, dim))
    axis = np.linspace(-rho_out, rho_out, probe_grid)
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    r = np.linalg.norm(grid, axis=1)
    return grid[(r >= rho_in) & (r <= rho_out)]


def covering_check(c: Cover, probe_grid: int = 4096, region: tuple[float, float] | None = None,
                   shrunk: bool = True) -> dict:
    """Probe whether the shrunken members cover ``region`` (Euclidean radii).

    Returns ``{"covered": bool, "witness": point or None, "region": ...}``.
    """
    region = default_region(c) if region is None else tuple(region)
    pts = probe_points(c.dim, region, probe_grid)
    hit = np.zeros(len(pts), dtype=bool)
    for i in c.indices:
        hit |= c.contains(i, pts, shrunk=shrunk)
    miss = np.flatnonzero(~hit)
    witness = None
    if miss.size:
        witness = pts[miss[miss.size // 2]].tolist()
    return {
        "covered": bool(miss.size == 0),
        "witness": witness,
        "region": [float(region[0]), float(region[1])],
        "probe_count": int(len(pts)),
    }
