"""Smooth partitions of unity subordinate to a cover, and moderate weights."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .cover import BaseCell, Cover, covering_check, intersection_table, neighbor_gap, probe_points
from .errors import CoverNotCovering, IndexOutOfRange, NegativeIndexForInhomogeneous

TRANSITION = 0.25

# sup_x |d^k/dx^k| of the two 1-D profiles for k = 0..4 (tabulated offline on a
# 2e6-point grid); the normalized bumps inherit bounds built from these.
MOLLIFIER_DERIVATIVE_SUP = (0.3679, 0.7984, 7.750, 186.4, 8316.0)
SMOOTH_STEP_DERIVATIVE_SUP = (1.0, 2.0, 9.841, 110.6, 2280.0)


def _mollifier(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    y = 1.0 - x
    b = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    return a / (a + b)


def raw_bump(cell: BaseCell, y: np.ndarray) -> np.ndarray:
    """Unnormalized bump in cell coordinates, positive exactly on the open cell."""
    lo, hi = cell.radial_interval
    if cell.kind == "annulus":
        t = (2.0 * np.linalg.norm(y, axis=-1) - (lo + hi)) / (hi - lo)
        return _mollifier(t)
    width = TRANSITION * (hi - lo)
    ay = np.abs(y)
    outer = np.prod(smooth_step((hi - ay) / width), axis=-1)
    if cell.kind == "centered-box":
        return outer
    inner = np.prod(smooth_step((lo + width - ay) / width), axis=-1)
    return outer * (1.0 - inner)


@dataclass(frozen=True)
class PartitionOfUnity:
    """Normalized family ``phi_i = beta_i / sum_j beta_j`` over the cover's
    index range, where ``beta_i(x) = beta(T_i^{-1} x)``."""

    cover: Cover
    normalized: bool = True

    def raw(self, i: int, xi: np.ndarray) -> np.ndarray:
        c = self.cover
        return raw_bump(c.cell(i), c.to_cell_coords(i, np.atleast_2d(xi)))

    def raw_all(self, xi: np.ndarray) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return np.stack([self.raw(i, xi) for i in self.cover.indices])

    def all(self, xi: np.ndarray) -> np.ndarray:
        """Array of shape ``(len(indices), n)`` holding every ``phi_i(xi)``."""
        raw = self.raw_all(xi)
        if not self.normalized:
            return raw
        total = raw.sum(axis=0)
        safe = np.where(total > 0, total, 1.0)
        return np.where(total > 0, raw / safe, 0.0)

    def phi(self, i: int, xi: np.ndarray) -> np.ndarray:
        if i not in self.cover.indices:
            raise IndexOutOfRange(f"index {i} outside {self.cover.index_range}")
        return self.all(xi)[i - self.cover.index_range[0]]

    def describe(self) -> dict:
        return {
            "bump": {"annulus": "mollifier exp(-1/(1-t^2)) of the radial coordinate",
                     "box": "tensor smooth steps", "transition": TRANSITION},
            "derivative_sup_mollifier": list(MOLLIFIER_DERIVATIVE_SUP),
            "derivative_sup_smooth_step": list(SMOOTH_STEP_DERIVATIVE_SUP),
            "normalized": self.normalized,
        }


def build_partition(c: Cover, probe_grid: int | None = None, region=None) -> PartitionOfUnity:
    """Build the normalized partition; probe the working region for a vanishing denominator."""
    if probe_grid is None:
        probe_grid = 1024 if c.dim == 1 else 128
    check = covering_check(c, probe_grid, region)
    p = PartitionOfUnity(c)
    pts = probe_points(c.dim, check["region"], probe_grid)
    if len(pts):
        total = p.raw_all(pts).sum(axis=0)
        bad = np.flatnonzero(total <= 0)
        if bad.size:
            w = pts[bad[0]].tolist()
            raise CoverNotCovering(f"no bump is positive at {w}", witness=w)
    return p


def phi_eval(p: PartitionOfUnity, i: int, xi) -> np.ndarray:
    return p.phi(i, xi)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSequence:
    kind: Literal["homogeneous", "inhomogeneous"]
    s: int
    abs_det: float

    def __call__(self, i: int) -> float:
        return weight(self, i)

    def exponent(self, i: int) -> int:
        if self.kind == "homogeneous":
            return self.s * i
        if i < 0:
            raise NegativeIndexForInhomogeneous(f"index {i} < 0")
        return 0 if i == 0 else self.s * (i - 1)


def weight(w: WeightSequence, i: int) -> float:
    return w.abs_det ** w.exponent(i)


def moderateness_constant(w: WeightSequence, c: Cover) -> float:
    """``|det A|^{|s| * gap}``, checked against every intersecting pair."""
    gap = neighbor_gap(c)
    const = w.abs_det ** (abs(w.s) * gap)
    for (i, j), hit in intersection_table(c).items():
        if hit:
            assert weight(w, i) <= const * weight(w, j) * (1 + 1e-12), (i, j)
    return const
