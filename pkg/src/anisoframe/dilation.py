"""Expansive dilation matrices and their spectral constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidMargin, NotExpansive, NotSquare, NumericalFailure, SingularInverse

MARGIN_EPS = 1e-9
DEFAULT_MARGIN = 0.05
SAFETY_FACTOR = 1.1
INDEX_BOUND = 512


@dataclass(frozen=True)
class ExpansiveMatrix:
    """A validated expansive matrix together with the constants
    ``lambda_minus < min|eig| <= max|eig| < lambda_plus`` and the growth
    constant ``b`` bounding ``|A^j x|`` between the two geometric rates.
    """

    entries: np.ndarray
    moduli: np.ndarray
    lambda_minus: float
    lambda_plus: float
    growth_b: float
    _inverse: np.ndarray = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def min_modulus(self) -> float:
        return float(self.moduli.min())

    @property
    def max_modulus(self) -> float:
        return float(self.moduli.max())

    @property
    def det(self) -> float:
        a = self.entries
        # closed forms keep integer determinants exact
        if a.shape == (1, 1):
            return float(a[0, 0])
        if a.shape == (2, 2):
            return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
        return float(np.linalg.det(a))

    @property
    def abs_det(self) -> float:
        return abs(self.det)

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.entries == np.diag(np.diag(self.entries))))

    def describe(self) -> dict:
        return {
            "entries": self.entries.tolist(),
            "eigen_moduli": sorted(float(m) for m in self.moduli),
            "lambda_minus": self.lambda_minus,
            "lambda_plus": self.lambda_plus,
            "growth_b": self.growth_b,
            "abs_det": self.abs_det,
        }


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _eigen_moduli(a: np.ndarray) -> np.ndarray:
    try:
        eig = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalFailure(f"eigenvalue solver failed: {exc}") from exc
    if not np.all(np.isfinite(eig)):
        raise NumericalFailure("eigenvalue solver returned non-finite values")
    return np.abs(eig)


def validate_expansive(
    entries,
    lambda_minus: float | None = None,
    lambda_plus: float | None = None,
    margin: float = DEFAULT_MARGIN,
    j_max: int = 30,
    sphere_samples: int | None = None,
) -> ExpansiveMatrix:
    """Validate ``entries`` as an expansive matrix and attach its constants.

    Raises
    ------
    NotSquare
        If ``entries`` is not a square 2-D array of finite reals.
    NotExpansive
        If some eigenvalue has modulus ``<= 1 + MARGIN_EPS``.
    """
    a = np.asarray(entries, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise NotSquare(f"dilation must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotSquare("dilation entries must be finite")
    moduli = _eigen_moduli(a)
    if moduli.min() <= 1.0 + MARGIN_EPS:
        raise NotExpansive(f"eigenvalue modulus {moduli.min():.12g} is not > 1")
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - excluded by expansiveness
        raise SingularInverse(str(exc)) from exc
    lm, lp = spectral_margins_from_moduli(moduli, margin, lambda_minus, lambda_plus)
    m = ExpansiveMatrix(_frozen(a), _frozen(moduli), lm, lp, math.nan, _frozen(inv))
    b = growth_constant(m, j_max=j_max, sphere_samples=sphere_samples)
    return replace(m, growth_b=b)


def spectral_margins_from_moduli(moduli, margin=DEFAULT_MARGIN, lambda_minus=None, lambda_plus=None):
    if not 0.0 < margin < 1.0:
        raise InvalidMargin(f"margin must lie in (0, 1), got {margin}")
    lo, hi = float(np.min(moduli)), float(np.max(moduli))
    lm = math.sqrt(lo) if lambda_minus is None else float(lambda_minus)
    lp = (1.0 + margin) * hi if lambda_plus is None else float(lambda_plus)
    if not (1.0 < lm < lo):
        raise InvalidMargin(f"lambda_minus={lm} must satisfy 1 < lambda_minus < {lo}")
    if not (hi < lp):
        raise InvalidMargin(f"lambda_plus={lp} must exceed max modulus {hi}")
    return lm, lp


def spectral_margins(m: ExpansiveMatrix, margin: float = DEFAULT_MARGIN, lambda_minus=None, lambda_plus=None):
    """Return ``(lambda_minus, lambda_plus)`` for ``m`` (defaults or validated overrides)."""
    return spectral_margins_from_moduli(m.moduli, margin, lambda_minus, lambda_plus)


def with_margins(m: ExpansiveMatrix, lambda_minus=None, lambda_plus=None, margin=DEFAULT_MARGIN,
                 j_max: int = 30, sphere_samples: int | None = None) -> ExpansiveMatrix:
    """Copy of ``m`` with new spectral margins and a re-estimated growth constant."""
    lm, lp = spectral_margins(m, margin, lambda_minus, lambda_plus)
    out = replace(m, lambda_minus=lm, lambda_plus=lp, growth_b=math.nan)
    return replace(out, growth_b=growth_constant(out, j_max=j_max, sphere_samples=sphere_samples))


def sphere_points(dim: int, count: int | None = None) -> np.ndarray:
    """Deterministic unit vectors, shape ``(count, dim)``."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    count = max(100 * dim, 720) if count is None else count
    if dim == 2:
        theta = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    rng = np.random.default_rng(12345)
    pts = rng.standard_normal((count, dim))
    pts = np.vstack([np.eye(dim), -np.eye(dim), pts])
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def growth_constant(m: ExpansiveMatrix, j_max: int = 30, sphere_samples: int | None = None) -> float:
    """Sampled estimate of the growth constant ``b`` (times ``SAFETY_FACTOR``).

    Checks ``|A^j x| / lambda_minus^j``, ``lambda_plus^j / |A^j x|`` and the
    analogous ratios for ``A^{-j}`` for ``j = 0..j_max`` on sampled unit
    vectors; norms are propagated in log form so large ``j`` cannot overflow.
    """
    if j_max < 10:
        raise ValueError("j_max must be >= 10")
    xi = sphere_points(m.dim, sphere_samples)
    log_lm, log_lp = math.log(m.lambda_minus), math.log(m.lambda_plus)
    worst = 0.0  # log of the largest ratio seen
    for mat, slow, fast in ((m.entries, log_lm, log_lp), (m._inverse, -log_lp, -log_lm)):
        v = xi.T.copy()
        log_norm = np.zeros(v.shape[1])
        for j in range(j_max + 1):
            if j > 0:
                v = mat @ v
                n = np.linalg.norm(v, axis=0)
                log_norm += np.log(n)
                v /= n
            worst = max(worst, float(np.max(j * slow - log_norm)), float(np.max(log_norm - j * fast)))
    return SAFETY_FACTOR * max(1.0, math.exp(worst))


def power(m: ExpansiveMatrix, i: int) -> np.ndarray:
    """``A^i`` for integer ``i``; negative powers reuse the cached inverse."""
    i = int(i)
    if abs(i) > INDEX_BOUND:
        raise ValueError(f"|i| must not exceed {INDEX_BOUND}")
    base = m.entries if i >= 0 else m._inverse
    return np.linalg.matrix_power(base, abs(i))


def det_power(m: ExpansiveMatrix, i: int) -> float:
    return m.det ** int(i)


def abs_det_power(m: ExpansiveMatrix, i) -> float:
    return m.abs_det ** i


def dual_lattice_step(m: ExpansiveMatrix, i: int, delta: float) -> np.ndarray:
    """Generator ``delta * (A^i)^{-t}`` of the translation lattice at scale ``i``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return delta * power(m, -i).T


def op_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2))


def power_norm(m: ExpansiveMatrix, k: int) -> float:
    """Spectral norm ``||A^k||``."""
    return op_norm(power(m, k))
