"""Prototype functions: frequency profiles, time-domain values and exact
derivatives of their spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import hermite

from .dilation import ExpansiveMatrix, power
from .errors import PrototypeKindMismatch

FAMILIES = ("annular-hermite-gauss", "gauss-lowpass", "user-sampled")
PARSEVAL_SPAN = 60


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` non-negative ints summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial(n: int, ks) -> int:
    out = math.factorial(n)
    for k in ks:
        out //= math.factorial(k)
    return out


def _hermite_gauss_1d(l: int, width: float, t: np.ndarray) -> np.ndarray:
    """Inverse transform of ``(xi/w)^(2l) exp(-(xi/w)^2)`` in one variable."""
    u = math.pi * width * t
    coef = np.zeros(2 * l + 1)
    coef[-1] = 1.0
    return (-1) ** l * 4.0 ** (-l) * width * math.sqrt(math.pi) * hermite.hermval(u, coef) * np.exp(-u * u)


# ---------------------------------------------------------------------------
# polynomial times Gaussian: exact derivatives
# ---------------------------------------------------------------------------

Poly = dict  # exponent tuple -> coefficient


def _poly_mul_var(p: Poly, k: int, factor: float = 1.0) -> Poly:
    out: Poly = {}
    for e, c in p.items():
        e2 = list(e)
        e2[k] += 1
        e2 = tuple(e2)
        out[e2] = out.get(e2, 0.0) + factor * c
    return out


def _poly_gauss_derivative(p: Poly, k: int, width: float) -> Poly:
    """``d/dxi_k (P G) = (dP/dxi_k - 2 xi_k P / w^2) G`` with ``G = exp(-|xi|^2/w^2)``."""
    out: Poly = {}
    for e, c in p.items():
        if e[k] > 0:
            e2 = list(e)
            e2[k] -= 1
            e2 = tuple(e2)
            out[e2] = out.get(e2, 0.0) + c * e[k]
    for e, c in _poly_mul_var(p, k, -2.0 / width**2).items():
        out[e] = out.get(e, 0.0) + c
    return {e: c for e, c in out.items() if c != 0.0}


@dataclass
class PolyGaussFamily:
    """A list of polynomials ``P_j`` sharing the factor ``exp(-|xi|^2/w^2)``;
    evaluated together through one monomial table."""

    dim: int
    width: float
    polys: list

    @cached_property
    def _tables(self):
        exps = sorted({e for p in self.polys for e in p})
        coef = np.zeros((len(exps), len(self.polys)))
        pos = {e: n for n, e in enumerate(exps)}
        for j, p in enumerate(self.polys):
            for e, c in p.items():
                coef[pos[e], j] = c
        return np.array(exps, dtype=int).reshape(len(exps), self.dim), coef

    def _monomials(self, xi: np.ndarray) -> np.ndarray:
        exps = self._tables[0]
        top = int(exps.max()) if exps.size else 0
        mono = np.ones((xi.shape[0], exps.shape[0]))
        for k in range(self.dim):
            pw = np.ones((xi.shape[0], top + 1))
            for e in range(1, top + 1):
                pw[:, e] = pw[:, e - 1] * xi[:, k]
            mono *= pw[:, exps[:, k]]
        return mono

    def max_abs(self, xi: np.ndarray) -> np.ndarray:
        """``max_j |P_j(xi)| * G(xi)`` for points of shape ``(n, d)``."""
        xi = np.atleast_2d(xi)
        vals = np.abs(self._monomials(xi) @ self._tables[1]).max(axis=1)
        return vals * np.exp(-np.sum(xi**2, axis=1) / self.width**2)

    def log_max_abs(self, xi: np.ndarray) -> np.ndarray:
        """Natural log of :meth:`max_abs`, without underflow in the Gaussian."""
        xi = np.atleast_2d(xi)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self._monomials(xi) @ self._tables[1]).max(axis=1)) - np.sum(xi**2, axis=1) / self.width**2


# ---------------------------------------------------------------------------
# prototypes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Prototype:
    """A real, even, radial prototype given by its frequency profile.

    ``annular-hermite-gauss``: ``c |xi/w|^(2L) exp(-|xi/w|^2)`` with ``L = order``
    and ``c`` putting the peak at 1. ``gauss-lowpass``: ``exp(-|xi/w|^2)``.
    ``user-sampled``: linear interpolation of ``profile`` over ``radii``
    (zero beyond the last radius); ``role`` says whether it is annular or
    low-pass.
    """

    family: str
    dim: int = 1
    order: int = 2
    width: float = 1.0
    role: str | None = None
    radii: tuple = ()
    profile: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown prototype family {self.family!r}")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.family == "annular-hermite-gauss" and self.order < 0:
            raise ValueError("order must be >= 0")
        if self.family == "user-sampled":
            if self.role not in ("annular", "lowpass"):
                raise ValueError("user-sampled prototypes need role 'annular' or 'lowpass'")
            r = np.asarray(self.radii, dtype=float)
            if r.ndim != 1 or len(r) < 2 or len(r) != len(self.profile) or np.any(np.diff(r) <= 0) or r[0] < 0:
                raise ValueError("radii must be increasing, non-negative and match profile")
        else:
            role = "annular" if self.family == "annular-hermite-gauss" else "lowpass"
            object.__setattr__(self, "role", role)

    @property
    def analytic(self) -> bool:
        return self.family != "user-sampled"

    @property
    def peak_constant(self) -> float:
        n = self.order
        return 1.0 if n == 0 else (math.e / n) ** n

    @property
    def vanishing_order(self) -> int:
        """Order of the zero of the spectrum at the origin."""
        return 2 * self.order if self.family == "annular-hermite-gauss" else 0

    def spectrum(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        r2 = np.sum(xi**2, axis=1)
        if self.family == "gauss-lowpass":
            return np.exp(-r2 / self.width**2)
        if self.family == "annular-hermite-gauss":
            u = r2 / self.width**2
            return self.peak_constant * u**self.order * np.exp(-u)
        return np.interp(np.sqrt(r2), np.asarray(self.radii), np.asarray(self.profile), right=0.0)

    def spectral_extent(self) -> float:
        """Radius beyond which the spectrum is below roughly 1e-16 of its peak."""
        if self.family == "user-sampled":
            return float(self.radii[-1])
        return self.width * math.sqrt(40.0 + 4.0 * self.order + 4.0 * self.order * math.log1p(self.order))

    def time(self, t) -> np.ndarray:
        """Values of the prototype on points ``t`` of shape ``(n, d)``."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        w = self.width
        if self.family == "gauss-lowpass":
            return (w * math.sqrt(math.pi)) ** self.dim * np.exp(-(math.pi * w) ** 2 * np.sum(t**2, axis=1))
        if self.family == "annular-hermite-gauss":
            out = np.zeros(t.shape[0])
            cache = {}
            for ls in _compositions(self.order, self.dim):
                term = np.full(t.shape[0], float(_multinomial(self.order, ls)))
                for k, l in enumerate(ls):
                    key = (k, l)
                    if key not in cache:
                        cache[key] = _hermite_gauss_1d(l, w, t[:, k])
                    term = term * cache[key]
                out += term
            return self.peak_constant * out
        return numeric_time(self.spectrum, t, self.dim, self.spectral_extent())

    def _base_poly(self) -> Poly:
        d, w = self.dim, self.width
        if self.family == "gauss-lowpass":
            return {(0,) * d: 1.0}
        # c * w^(-2L) * (sum xi_k^2)^L
        scale = self.peak_constant * w ** (-2 * self.order)
        return {tuple(2 * l for l in ls): scale * _multinomial(self.order, ls)
                for ls in _compositions(self.order, d)}

    def _derivative_polys(self, start: Poly, max_order: int) -> list:
        d, w = self.dim, self.width
        level = {(0,) * d: start}
        polys = [start]
        for _ in range(max_order):
            nxt = {}
            for alpha, p in level.items():
                for k in range(d):
                    a2 = list(alpha)
                    a2[k] += 1
                    a2 = tuple(a2)
                    if a2 not in nxt:
                        nxt[a2] = _poly_gauss_derivative(p, k, w)
            polys.extend(q for q in nxt.values() if q)
            level = nxt
        return polys

    def derivative_families(self, max_order: int, gradient: bool) -> list:
        """One family per ``beta`` (``beta = 0`` first, then the unit vectors
        when ``gradient``), each holding ``d^alpha [(2 pi i xi)^beta psi_hat]``
        for ``|alpha| <= max_order``."""
        if not self.analytic:
            raise PrototypeKindMismatch("derivative envelopes need an analytic prototype")
        base = self._base_poly()
        starts = [base]
        if gradient:
            starts += [_poly_mul_var(base, k, 2.0 * math.pi) for k in range(self.dim)]
        return [PolyGaussFamily(self.dim, self.width, self._derivative_polys(s, max_order)) for s in starts]

    def derivative_family(self, max_order: int, gradient: bool) -> PolyGaussFamily:
        """All the polynomials of :meth:`derivative_families` in one family."""
        fams = self.derivative_families(max_order, gradient)
        return PolyGaussFamily(self.dim, self.width, [p for f in fams for p in f.polys])

    def describe(self) -> dict:
        out = {"family": self.family, "dim": self.dim, "width": self.width, "role": self.role}
        if self.family == "annular-hermite-gauss":
            out["order"] = self.order
            out["vanishing_order"] = self.vanishing_order
        if self.family == "user-sampled":
            out["radii"] = list(self.radii)
            out["profile"] = list(self.profile)
        return out


@dataclass(frozen=True)
class ParsevalPrototype:
    """``psi_hat / sqrt(sum_j |psi_hat(A^-j xi)|^2)``, ``|j| <= span``, so the
    dilates of the result have squared moduli summing to one."""

    base: Prototype
    matrix: ExpansiveMatrix
    span: int = PARSEVAL_SPAN
    _powers: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.base.role != "annular":
            raise PrototypeKindMismatch("Parseval mode needs an annular prototype")
        object.__setattr__(self, "_powers", tuple(power(self.matrix, -j) for j in range(-self.span, self.span + 1)))

    role = "annular"
    analytic = False

    @property
    def dim(self) -> int:
        return self.base.dim

    def calderon_sum(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        total = np.zeros(xi.shape[0])
        for p in self._powers:
            total += self.base.spectrum(xi @ p.T) ** 2
        return total

    def spectrum(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        num = self.base.spectrum(xi)
        den = self.calderon_sum(xi)
        return np.where(den > 0, num / np.sqrt(np.where(den > 0, den, 1.0)), 0.0)

    def spectral_extent(self) -> float:
        return self.base.spectral_extent()

    def time(self, t) -> np.ndarray:
        return numeric_time(self.spectrum, t, self.dim, self.spectral_extent())

    def describe(self) -> dict:
        return {"family": "parseval", "base": self.base.describe(), "span": self.span}


def numeric_time(spectrum, t, dim: int, extent: float, nodes: int | None = None) -> np.ndarray:
    """Inverse Fourier transform of a real even spectrum by the trapezoid rule
    on ``[-extent, extent]^d``."""
    t = np.atleast_2d(np.asarray(t, dtype=float))
    nodes = (16384 if dim == 1 else 384) if nodes is None else nodes
    axis = np.linspace(-extent, extent, nodes, endpoint=False) + extent / nodes
    step = 2.0 * extent / nodes
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    vals = spectrum(mesh)
    keep = np.abs(vals) > 0
    mesh, vals = mesh[keep], vals[keep] * step**dim
    out = np.empty(t.shape[0])
    chunk = max(1, 2_000_000 // max(1, len(vals)))
    for s in range(0, t.shape[0], chunk):
        phase = 2.0 * math.pi * (t[s:s + chunk] @ mesh.T)
        out[s:s + chunk] = np.cos(phase) @ vals
    return out


def check_role(proto, role: str) -> None:
    if proto.role != role:
        raise PrototypeKindMismatch(f"expected a {role} prototype, got {proto.role}")


__all__ = [
    "FAMILIES", "Prototype", "ParsevalPrototype", "PolyGaussFamily",
    "numeric_time", "check_role",
]
