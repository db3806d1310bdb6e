"""Adaptive cubature over base cells, carried out in the log domain.

Cells are split into axis-aligned boxes (the ``3^d - 1`` outer boxes of a box
with a hole, polar coordinates for a planar annulus, two intervals for a
one-dimensional annulus). Each box carries a tensor Gauss-Legendre rule; the
error estimate per axis compares it with a lower-order rule along that axis,
and the boxes holding most of the estimated error are bisected along their
worst axis until the total estimate is small. Integrands are given as
logarithms so that very small or very large values neither underflow nor
overflow.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from .cover import BaseCell
from .errors import QuadratureUnderResolved

RESOLUTION_TOL = 0.01
TARGET_TOL = 1e-4
HIGH_ORDER = 6
LOW_ORDER = 3
MAX_BOXES = 40000

_RULES = {n: leggauss(n) for n in (HIGH_ORDER, LOW_ORDER)}


def cell_boxes(cell: BaseCell, dim: int) -> tuple[list, bool]:
    """Boxes (lists of per-axis bounds) tiling ``cell``; the flag marks
    polar coordinates ``(rho, angle)``."""
    lo, hi = cell.radial_interval
    if cell.kind == "centered-box" or lo == 0:
        return [[(-hi, hi)] * dim], False
    if cell.kind == "box-minus-box" or dim == 1:
        pieces = [(-hi, -lo), (-lo, lo), (lo, hi)]
        boxes = [[pieces[c] for c in combo] for combo in itertools.product(range(3), repeat=dim)
                 if not all(c == 1 for c in combo)]
        return boxes, False
    if dim == 2:
        return [[(lo, hi), (0.0, 2.0 * math.pi)]], True
    raise NotImplementedError("annular cells in dimension >= 3 use the masked rule")


def _rule_points(lo: np.ndarray, hi: np.ndarray, orders: list) -> tuple[np.ndarray, np.ndarray]:
    """Tensor rule on a batch of boxes: points ``(nb, n, d)``, log weights ``(nb, n)``."""
    d = lo.shape[1]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    rules = [_RULES[o] for o in orders]
    nodes = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1).reshape(-1, d)
    weights = np.stack(np.meshgrid(*[r[1] for r in rules], indexing="ij"), axis=-1).reshape(-1, d).prod(axis=1)
    pts = mid[:, None, :] + half[:, None, :] * nodes[None, :, :]
    logw = np.log(weights)[None, :] + np.sum(np.log(half), axis=1)[:, None]
    return pts, logw


def _box_estimates(log_f, lo, hi, polar):
    """High-order integral per box and per-axis error estimates, both scaled
    by ``exp(-shift)``; ``shift`` is returned first."""
    nb, d = lo.shape
    logs = []
    for axis in [None] + list(range(d)):
        orders = [LOW_ORDER if k == axis else HIGH_ORDER for k in range(d)]
        pts, logw = _rule_points(lo, hi, orders)
        flat = pts.reshape(-1, d)
        if polar:
            rho, ang = flat[:, 0], flat[:, 1]
            vals = log_f(np.stack([rho * np.cos(ang), rho * np.sin(ang)], axis=1)) + np.log(rho)
        else:
            vals = log_f(flat)
        logs.append(vals.reshape(nb, -1) + logw)
    shift = max(float(np.max(x)) for x in logs)
    if not math.isfinite(shift):
        return shift, np.zeros(nb), np.zeros((nb, d))
    with np.errstate(under="ignore"):
        sums = [np.exp(x - shift).sum(axis=1) for x in logs]
    err = np.stack([np.abs(sums[0] - s) for s in sums[1:]], axis=1)
    return shift, sums[0], err


def _rescale(val, err, shift, new_shift):
    if not math.isfinite(new_shift) or new_shift == shift:
        return val, err
    f = math.exp(shift - new_shift)
    return val * f, err * f


def _adaptive(cell: BaseCell, dim: int, log_f, initial: int) -> tuple[float, float]:
    boxes, polar = cell_boxes(cell, dim)
    lo_l, hi_l = [], []
    for box in boxes:
        edges = [np.linspace(a, b, initial + 1) for a, b in box]
        for idx in itertools.product(range(initial), repeat=dim):
            lo_l.append([edges[k][idx[k]] for k in range(dim)])
            hi_l.append([edges[k][idx[k] + 1] for k in range(dim)])
    lo, hi = np.array(lo_l), np.array(hi_l)
    shift, val, err = _box_estimates(log_f, lo, hi, polar)
    while True:
        if shift == -math.inf:
            return -math.inf, 0.0
        if not math.isfinite(shift):
            raise QuadratureUnderResolved("integrand is not finite on the cell")
        total = float(val.sum())
        box_err = err.max(axis=1)
        total_err = float(box_err.sum())
        if total_err <= TARGET_TOL * total or len(lo) >= MAX_BOXES:
            return shift + math.log(total), total_err / total
        order = np.argsort(-box_err, kind="stable")
        n_split = int(np.searchsorted(np.cumsum(box_err[order]), 0.5 * total_err)) + 1
        n_split = max(1, min(n_split, MAX_BOXES - len(lo)))
        pick = order[:n_split]
        rows = np.arange(n_split)
        axis = err[pick].argmax(axis=1)
        plo, phi = lo[pick], hi[pick]
        cut = 0.5 * (plo[rows, axis] + phi[rows, axis])
        left_hi, right_lo = phi.copy(), plo.copy()
        left_hi[rows, axis] = cut
        right_lo[rows, axis] = cut
        new_lo, new_hi = np.concatenate([plo, right_lo]), np.concatenate([left_hi, phi])
        s2, v2, e2 = _box_estimates(log_f, new_lo, new_hi, polar)
        keep = np.ones(len(lo), dtype=bool)
        keep[pick] = False
        lo, hi = np.concatenate([lo[keep], new_lo]), np.concatenate([hi[keep], new_hi])
        top = max(shift, s2)
        val, err = _rescale(val[keep], err[keep], shift, top)
        if math.isfinite(s2):
            v2, e2 = _rescale(v2, e2, s2, top)
        val, err, shift = np.concatenate([val, v2]), np.concatenate([err, e2]), top


def _masked(cell: BaseCell, dim: int, log_f, g: int) -> float:
    _, hi = cell.radial_interval
    h = 2 * hi / g
    axis = -hi + h * (np.arange(g) + 0.5)
    pts = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    pts = pts[cell.contains(pts)]
    vals = log_f(pts)
    if np.all(np.isneginf(vals)):
        return -math.inf
    top = float(vals.max())
    return top + math.log(float(np.exp(vals - top).sum()) * h**dim)


def log_cell_integral(cell: BaseCell, dim: int, log_f, grid: int = 32) -> tuple[float, float]:
    """``log`` of the integral of ``exp(log_f)`` over ``cell`` and its relative error estimate."""
    if cell.kind == "annulus" and dim >= 3:
        coarse, fine = _masked(cell, dim, log_f, grid), _masked(cell, dim, log_f, 2 * grid)
        if math.isinf(coarse) and math.isinf(fine):
            return -math.inf, 0.0
        return fine, math.expm1(abs(fine - coarse))
    return _adaptive(cell, dim, log_f, max(1, grid // 16))


def log_cell_average(cell: BaseCell, dim: int, log_f, grid: int = 32, strict: bool = True):
    """``log( (1/|cell|) * integral_cell exp(log_f) )``.

    ``grid`` sets the initial subdivision (``grid // 16`` boxes per axis and
    piece); refinement then proceeds adaptively.

    Returns
    -------
    float, or ``(float, float)`` when ``strict`` is False
        The log average; the non-strict form also returns the relative error
        estimate.

    Raises
    ------
    QuadratureUnderResolved
        In strict mode, when the error estimate stays above one percent.
    """
    value, err = log_cell_integral(cell, dim, log_f, grid)
    if strict and err > RESOLUTION_TOL:
        raise QuadratureUnderResolved(f"cell average error estimate {err:.3g} exceeds {RESOLUTION_TOL}")
    if not math.isinf(value):
        value -= math.log(cell.volume(dim))
    return value if strict else (value, err)
