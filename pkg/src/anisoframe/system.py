"""Anisotropic wavelet systems and their analysis / synthesis operators.

Atoms are ``psi_i(t - x)`` with ``psi_i(t) = |det T_i|^(1/2) psi(T_i^t t)`` and
translations ``x`` on the lattice ``delta * T_i^(-t) Z^d``. Signals live on a
period cell, so every operator works with periodized atoms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dilation import ExpansiveMatrix, power
from .errors import BandMismatch, DeltaNonPositive, IndexOutOfRange, PrototypeKindMismatch
from .prototypes import ParsevalPrototype, Prototype, check_role
from .signals import CoefficientArray, SampledSignal, grid_points

_CHUNK = 4_000_000  # entries of a (lattice x bins) phase block


@dataclass(frozen=True)
class WaveletSystem:
    """Homogeneous (scales ``i in Z``, ``T_i = A^i``) or inhomogeneous
    (``T_0 = I`` with the low-pass prototype, ``T_i = A^(i-1)`` for ``i >= 1``)
    system with lattice density ``delta``."""

    kind: str
    matrix: ExpansiveMatrix
    annular: Prototype | ParsevalPrototype
    delta: float
    scale_range: tuple[int, int]
    lowpass: Prototype | None = None

    @property
    def dim(self) -> int:
        return self.matrix.dim

    @property
    def scales(self) -> range:
        return range(self.scale_range[0], self.scale_range[1] + 1)

    def _check(self, i: int) -> None:
        if i not in self.scales:
            raise IndexOutOfRange(f"scale {i} outside {self.scale_range}")

    def exponent(self, i: int) -> int | None:
        if self.kind == "homogeneous":
            return i
        return None if i == 0 else i - 1

    def transform(self, i: int) -> np.ndarray:
        e = self.exponent(i)
        return np.eye(self.dim) if e is None else power(self.matrix, e)

    def inverse_transform(self, i: int) -> np.ndarray:
        e = self.exponent(i)
        return np.eye(self.dim) if e is None else power(self.matrix, -e)

    def abs_det(self, i: int) -> float:
        e = self.exponent(i)
        return 1.0 if e is None else self.matrix.abs_det ** e

    def prototype(self, i: int):
        if self.kind == "inhomogeneous" and i == 0:
            return self.lowpass
        return self.annular

    def generator(self, i: int) -> np.ndarray:
        """Lattice generator ``delta * T_i^(-t)``; translations are ``G @ k``."""
        return self.delta * self.inverse_transform(i).T

    def describe(self) -> dict:
        out = {
            "kind": self.kind,
            "delta": self.delta,
            "scale_range": list(self.scale_range),
            "annular_prototype": self.annular.describe(),
            "prototype_identification": "the prototype carrying the decay hypotheses is the generating function itself",
            "lattice": "k in Z^d",
        }
        if self.lowpass is not None:
            out["lowpass_prototype"] = self.lowpass.describe()
        return out


def make_system(kind: str, m: ExpansiveMatrix, annular, delta: float, scale_range,
                lowpass: Prototype | None = None, parseval: bool = False) -> WaveletSystem:
    """Build a wavelet system after checking prototype roles and ``delta``.

    Raises
    ------
    DeltaNonPositive
        If ``delta <= 0``.
    PrototypeKindMismatch
        If the prototypes do not fit ``kind`` (an inhomogeneous system needs
        a low-pass and an annular prototype).
    """
    if not delta > 0:
        raise DeltaNonPositive(f"delta must be positive, got {delta}")
    if kind not in ("homogeneous", "inhomogeneous"):
        raise ValueError(f"unknown system kind {kind!r}")
    lo, hi = (int(x) for x in scale_range)
    if lo > hi:
        raise ValueError("empty scale range")
    check_role(annular, "annular")
    if annular.dim != m.dim:
        raise PrototypeKindMismatch("prototype dimension differs from the matrix")
    if kind == "inhomogeneous":
        if lowpass is None:
            raise PrototypeKindMismatch("an inhomogeneous system needs a low-pass prototype")
        check_role(lowpass, "lowpass")
        if lo < 0:
            raise IndexOutOfRange("inhomogeneous scales start at 0")
    elif lowpass is not None:
        raise PrototypeKindMismatch("a homogeneous system takes no low-pass prototype")
    if parseval:
        if kind != "homogeneous":
            raise PrototypeKindMismatch("Parseval mode is available for homogeneous systems only")
        if not isinstance(annular, ParsevalPrototype):
            annular = ParsevalPrototype(annular, m)
    return WaveletSystem(kind, m, annular, float(delta), (lo, hi), lowpass)


def atom_spectrum(sys: WaveletSystem, i: int, xi) -> np.ndarray:
    """``|det T_i|^(-1/2) psi_hat(T_i^(-1) xi)``."""
    sys._check(i)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    return sys.prototype(i).spectrum(xi @ sys.inverse_transform(i).T) / math.sqrt(sys.abs_det(i))


def atom_eval(sys: WaveletSystem, i: int, k, t) -> np.ndarray:
    """``psi_i(t - delta T_i^(-t) k)`` on the real line / plane (not periodized)."""
    sys._check(i)
    t = np.atleast_2d(np.asarray(t, dtype=float))
    shift = sys.generator(i) @ np.asarray(k, dtype=float).reshape(sys.dim)
    y = (t - shift) @ sys.transform(i)  # rows: (T_i^t (t - x))^t
    return math.sqrt(sys.abs_det(i)) * sys.prototype(i).time(y)


def periodized_atom(sys: WaveletSystem, i: int, k, t, period: float, images: int = 1) -> np.ndarray:
    """Atom summed over its period translates ``t + period * n``, ``|n_j| <= images``."""
    t = np.atleast_2d(np.asarray(t, dtype=float))
    out = np.zeros(t.shape[0])
    for n in itertools.product(range(-images, images + 1), repeat=sys.dim):
        out += atom_eval(sys, i, k, t + period * np.asarray(n, dtype=float))
    return out


def lattice_window(sys: WaveletSystem, i: int, period: float) -> np.ndarray:
    """Integer ``k`` with ``delta T_i^(-t) k`` in ``[-period/2, period/2)^d``, sorted."""
    g = sys.generator(i)
    ginv = np.linalg.inv(g)
    corners = np.array(list(itertools.product([-period / 2, period / 2], repeat=sys.dim)))
    kc = corners @ ginv.T
    lo = np.floor(kc.min(axis=0)).astype(int) - 1
    hi = np.ceil(kc.max(axis=0)).astype(int) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    ks = grid_points(axes).astype(np.int64)
    x = ks @ g.T
    tol = 1e-9 * period
    keep = np.all((x >= -period / 2 - tol) & (x < period / 2 - tol), axis=1)
    return ks[keep]


def _on_grid_offsets(g: np.ndarray, spacing: float) -> np.ndarray | None:
    """Integer matrix ``g / spacing`` if the lattice sits on the sample grid."""
    ratio = g / spacing
    rounded = np.round(ratio)
    if np.all(np.abs(ratio - rounded) < 1e-9):
        return rounded.astype(np.int64)
    return None


def _scale_spectrum(sys: WaveletSystem, i: int, f: SampledSignal) -> np.ndarray:
    return atom_spectrum(sys, i, f.frequencies()).reshape(f.values.shape)


def analysis(sys: WaveletSystem, f: SampledSignal, scales=None) -> CoefficientArray:
    """Coefficients ``(psi~_i * f)(delta T_i^(-t) k)`` on each scale's lattice window.

    The band piece ``F^-1(psi_hat_i f_hat)`` is a trigonometric polynomial, so
    it is evaluated exactly at the lattice points: by FFT when they lie on the
    sample grid, by per-axis phase products when the lattice generator has one
    nonzero per row, and by a direct sum over the nonzero bins otherwise.
    """
    if f.dim != sys.dim:
        raise BandMismatch(f"signal dimension {f.dim} differs from system dimension {sys.dim}")
    scales = sys.scales if scales is None else scales
    spec = np.fft.fftn(f.values) * f.spacing ** f.dim  # continuous-transform samples
    freqs = f.frequencies()
    out = CoefficientArray(sys.kind, sys.dim)
    for i in scales:
        prod = _scale_spectrum(sys, i, f) * spec
        out.add(i, *_sample_band(sys, i, f, prod, freqs))
    return out


def _monomial_perm(g: np.ndarray):
    """``perm`` with ``g[j, perm[j]]`` the only nonzero of row ``j``, else None."""
    nz = np.abs(g) > 0
    if not (np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)):
        return None
    return np.argmax(nz, axis=1)


def _axis_window(step: float, period: float) -> np.ndarray:
    """Integers ``k`` with ``step * k`` in ``[-period/2, period/2)``."""
    tol = 1e-9 * period
    a, b = -period / 2 / step, (period / 2 - tol) / step
    lo, hi = (a, b) if step > 0 else (b, a)
    ks = np.arange(math.floor(lo) - 1, math.ceil(hi) + 2)
    x = step * ks
    return ks[(x >= -period / 2 - tol) & (x < period / 2 - tol)]


def _sample_band(sys, i, f: SampledSignal, prod: np.ndarray, freqs: np.ndarray):
    g = sys.generator(i)
    scale = 1.0 / f.period**f.dim
    offsets = _on_grid_offsets(g, f.spacing)
    if offsets is not None:
        ks = lattice_window(sys, i, f.period)
        piece = np.fft.ifftn(prod) * (f.grid_size**f.dim) * scale
        idx = (ks @ offsets.T) % f.grid_size
        return ks, piece[tuple(idx.T)]
    perm = _monomial_perm(g)
    if perm is not None:
        # x_j = g[j, perm[j]] * k[perm[j]]: the phase factorizes over axes
        axis_freq = np.fft.fftfreq(f.grid_size, f.spacing)
        kvals = [_axis_window(g[j, perm[j]], f.period) for j in range(sys.dim)]
        vals = prod * scale
        for j in range(sys.dim):
            e = np.exp(2j * math.pi * np.outer(g[j, perm[j]] * kvals[j], axis_freq))
            vals = np.moveaxis(np.tensordot(e, vals, axes=(1, j)), 0, j)
        cols = grid_points(kvals).astype(np.int64)
        ks = np.empty_like(cols)
        ks[:, perm] = cols
        order = np.lexsort(ks.T[::-1])
        return ks[order], vals.ravel()[order]
    ks = lattice_window(sys, i, f.period)
    flat = prod.ravel()
    nz = np.flatnonzero(np.abs(flat) > 0)
    xi, amp = freqs[nz], flat[nz] * scale
    x = ks @ g.T
    vals = np.empty(len(ks), dtype=complex)
    step = max(1, _CHUNK // max(1, len(nz)))
    for s in range(0, len(ks), step):
        vals[s:s + step] = np.exp(2j * math.pi * (x[s:s + step] @ xi.T)) @ amp
    return ks, vals


def _lattice_phase_sum(g: np.ndarray, ks: np.ndarray, vals: np.ndarray, grid_size: int, period: float,
                       freqs: np.ndarray, support: np.ndarray) -> np.ndarray:
    """``sum_k c_k exp(-2 pi i xi . G k)`` on all bins (flat, FFT order)."""
    dim = g.shape[0]
    perm = _monomial_perm(g)
    if perm is not None:
        lo = ks.min(axis=0)
        shape = tuple(ks.max(axis=0) - lo + 1)
        if np.prod(shape) <= 4 * len(ks) + 64:
            dense = np.zeros(shape, dtype=complex)
            np.add.at(dense, tuple((ks - lo).T), vals)
            dense = np.transpose(dense, perm)  # axis j now indexes k[perm[j]]
            axis_freq = np.fft.fftfreq(grid_size, period / grid_size)
            out = dense
            for j in range(dim):
                kv = np.arange(lo[perm[j]], lo[perm[j]] + shape[perm[j]])
                e = np.exp(-2j * math.pi * np.outer(axis_freq, g[j, perm[j]] * kv))
                out = np.moveaxis(np.tensordot(e, out, axes=(1, j)), 0, j)
            return out.ravel()
    total = np.zeros(freqs.shape[0], dtype=complex)
    x = ks @ g.T
    nz = np.flatnonzero(support)
    step = max(1, _CHUNK // max(1, len(ks)))
    for s in range(0, len(nz), step):
        sl = nz[s:s + step]
        total[sl] = np.exp(-2j * math.pi * (freqs[sl] @ x.T)) @ vals
    return total


def synthesis(sys: WaveletSystem, c: CoefficientArray, grid_size: int, period: float) -> SampledSignal:
    """Sum of ``c_k^(i) psi_i(. - delta T_i^(-t) k)`` sampled on the periodic grid.

    For each scale the lattice sum is formed in frequency first,
    ``psi_hat_i(xi) sum_k c_k exp(-2 pi i xi . x_k)``, then scales are added
    in increasing order.
    """
    proto = SampledSignal(np.zeros((grid_size,) * sys.dim), period)
    freqs = proto.frequencies()
    total = np.zeros(freqs.shape[0], dtype=complex)
    for i in c.indices():
        ks, vals = c.scales[i]
        if not np.any(vals):
            continue
        psi = atom_spectrum(sys, i, freqs)
        total += psi * _lattice_phase_sum(sys.generator(i), ks, vals, grid_size, period, freqs, psi != 0)
    spec = total.reshape((grid_size,) * sys.dim)
    values = np.fft.ifftn(spec) * (grid_size / period) ** sys.dim
    return SampledSignal(values, period)


def calderon_sum(sys: WaveletSystem, xi) -> np.ndarray:
    """``sum_i |det T_i| |atom_spectrum_i(xi)|^2`` over the scale range."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    total = np.zeros(xi.shape[0])
    for i in sys.scales:
        total += sys.abs_det(i) * atom_spectrum(sys, i, xi) ** 2
    return total


def random_band_signal(sys: WaveletSystem, grid_size: int, period: float, rng, level: float = 0.5) -> SampledSignal:
    """Random signal supported on bins where the system's squared-spectrum sum
    exceeds ``level`` times its maximum."""
    base = SampledSignal(np.zeros((grid_size,) * sys.dim), period)
    cal = calderon_sum(sys, base.frequencies())
    mask = cal >= level * cal.max()
    spec = (rng.standard_normal(cal.size) + 1j * rng.standard_normal(cal.size)) * mask
    return SampledSignal(np.fft.ifftn(spec.reshape(base.values.shape)), period)


def frame_ratio(sys: WaveletSystem, f: SampledSignal) -> float:
    c = analysis(sys, f)
    energy = sum(float(np.sum(np.abs(c.values(i)) ** 2)) for i in c.indices())
    return sys.delta**sys.dim * energy / f.l2_norm() ** 2


def empirical_frame_bounds(sys: WaveletSystem, trials: int, grid_size: int = 1024, period: float = 16.0,
                           seed: int = 0) -> tuple[float, float]:
    """Min and max of ``delta^d ||analysis(f)||^2 / ||f||^2`` over random band signals.

    Zero trials give ``(inf, 0.0)``, the bounds of an empty family.
    """
    rng = np.random.default_rng(seed)
    lo, hi = math.inf, 0.0
    for _ in range(int(trials)):
        r = frame_ratio(sys, random_band_signal(sys, grid_size, period, rng))
        lo, hi = min(lo, r), max(hi, r)
    return lo, hi


def roundtrip_error(sys: WaveletSystem, f: SampledSignal) -> float:
    """Relative L2 error of ``delta^d * synthesis(analysis(f))`` against ``f``."""
    g = synthesis(sys, analysis(sys, f), f.grid_size, f.period)
    return float(np.linalg.norm(sys.delta**sys.dim * g.values - f.values) / np.linalg.norm(f.values))
