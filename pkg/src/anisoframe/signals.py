"""Periodized sampled signals, FFT band pieces and (quasi-)norms."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dilation import ExpansiveMatrix
from .errors import InputUnreadable, InvalidExponent, SizeMismatch
from .partition import PartitionOfUnity, WeightSequence, weight

SIGNAL_MAGIC = b"ANSG"


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class SampledSignal:
    """Samples of an ``period``-periodic function on ``[-period/2, period/2)^d``.

    ``values`` has shape ``(n,) * d`` in FFT order: index ``j`` sits at the
    wrapped coordinate ``fftfreq(n, 1/period)[j]``.
    """

    values: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 0 or len(set(v.shape)) != 1:
            raise SizeMismatch(f"expected a cubic grid, got shape {v.shape}")
        if not _is_pow2(v.shape[0]):
            raise SizeMismatch(f"grid size {v.shape[0]} is not a power of two")
        if not self.period > 0:
            raise SizeMismatch("period must be positive")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def grid_size(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return self.period / self.grid_size

    def coordinates(self) -> list[np.ndarray]:
        return [np.fft.fftfreq(self.grid_size, 1.0 / self.period)] * self.dim

    def points(self) -> np.ndarray:
        """Sample positions, shape ``(n**d, d)`` in C order of ``values``."""
        return grid_points(self.coordinates())

    def frequencies(self) -> np.ndarray:
        return grid_points([np.fft.fftfreq(self.grid_size, self.spacing)] * self.dim)

    @property
    def band_limit(self) -> float:
        """Half-width of the representable band ``[-n/(2 period), n/(2 period))``."""
        return self.grid_size / (2.0 * self.period)

    def l2_norm(self) -> float:
        return lp_norm(self, 2.0)


def grid_points(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def sample(func, dim: int, grid_size: int, period: float) -> SampledSignal:
    """Sample ``func(points)`` (points of shape ``(n, d)``) on the periodic grid."""
    axes = [np.fft.fftfreq(grid_size, 1.0 / period)] * dim
    vals = np.asarray(func(grid_points(axes)), dtype=complex)
    return SampledSignal(vals.reshape((grid_size,) * dim), period)


def from_spectrum_function(func, dim: int, grid_size: int, period: float) -> SampledSignal:
    """Signal whose continuous Fourier transform is ``func`` on the grid bins.

    Uses ``g(t) ~ sum_xi ghat(xi) e^{2 pi i xi t} / period^d``.
    """
    freqs = grid_points([np.fft.fftfreq(grid_size, period / grid_size)] * dim)
    spec = np.asarray(func(freqs), dtype=complex).reshape((grid_size,) * dim)
    vals = np.fft.ifftn(spec) * (grid_size / period) ** dim
    return SampledSignal(vals, period)


@dataclass(frozen=True)
class Spectrum:
    """Unitary DFT coefficients of a sampled signal, same layout as ``values``."""

    coefficients: np.ndarray
    period: float


def forward_spectrum(g: SampledSignal) -> Spectrum:
    return Spectrum(np.fft.fftn(g.values, norm="ortho"), g.period)


def inverse_spectrum(s: Spectrum) -> SampledSignal:
    return SampledSignal(np.fft.ifftn(s.coefficients, norm="ortho"), s.period)


def continuous_spectrum(g: SampledSignal) -> np.ndarray:
    """Riemann approximation of the Fourier transform on the frequency bins."""
    return np.fft.fftn(g.values) * g.spacing ** g.dim


# ---------------------------------------------------------------------------
# band pieces
# ---------------------------------------------------------------------------

def member_meets_band(p: PartitionOfUnity, i: int, band_limit: float) -> tuple[bool, bool]:
    """``(meets, truncated)`` for member ``i`` against ``[-B, B]^d``.

    Uses the Euclidean bounding radii of the member, so ``meets`` may be a
    conservative yes.
    """
    c = p.cover
    cell = c.cell(i)
    t = c.transform(i)
    lo, hi = cell.euclidean_radii(c.dim)
    smin = float(np.linalg.svd(t, compute_uv=False).min())
    smax = float(np.linalg.svd(t, compute_uv=False).max())
    inner, outer = lo * smin, hi * smax
    return inner <= band_limit * math.sqrt(c.dim), outer > band_limit


def band_weights(g: SampledSignal, p: PartitionOfUnity) -> np.ndarray:
    """``phi_i`` on every frequency bin, shape ``(len(indices),) + grid``."""
    phi = p.all(g.frequencies())
    return phi.reshape((len(p.cover.indices),) + g.values.shape)


def band_piece(g: SampledSignal, p: PartitionOfUnity, i: int, details: dict | None = None,
               _weights=None) -> SampledSignal:
    """Inverse DFT of ``phi_i * ghat``.

    If ``details`` is given it receives ``band_truncation`` (True when the
    member reaches beyond the representable band).
    """
    lo = p.cover.index_range[0]
    if _weights is None:
        phi = p.phi(i, g.frequencies()).reshape(g.values.shape)
    else:
        phi = _weights[i - lo]
    if details is not None:
        details["band_truncation"] = member_meets_band(p, i, g.band_limit)[1]
    spec = np.fft.fftn(g.values)
    return SampledSignal(np.fft.ifftn(phi * spec), g.period)


def lp_norm(g: SampledSignal, p: float) -> float:
    """Riemann-sum ``L^p`` (quasi-)norm over one period; ``p = inf`` gives the max."""
    return grid_lp(g.values, p, g.spacing ** g.dim)


def grid_lp(values: np.ndarray, p: float, cell_volume: float = 1.0) -> float:
    p = float(p)
    if not p > 0:
        raise InvalidExponent(f"exponent must be positive, got {p}")
    a = np.abs(np.ravel(values))
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    top = a.max()
    if top == 0:
        return 0.0
    # scale by the max to avoid overflow for large p
    return float(top * (cell_volume * np.sum((a / top) ** p)) ** (1.0 / p))


def lq_combine(terms, q: float) -> float:
    return grid_lp(np.asarray(terms, dtype=float), q)


def active_indices(g: SampledSignal, p: PartitionOfUnity, weights=None) -> list[int]:
    """Indices whose ``phi_i`` is nonzero somewhere on the frequency grid."""
    weights = band_weights(g, p) if weights is None else weights
    lo = p.cover.index_range[0]
    return [lo + n for n in range(weights.shape[0]) if np.any(weights[n] > 0)]


def decomposition_norm(g: SampledSignal, p: PartitionOfUnity, w: WeightSequence,
                       p_exp: float, q_exp: float, details: dict | None = None) -> float:
    """``l^q`` over bands of ``w_i * ||band_piece(g, i)||_{L^p}``.

    Bands whose partition function vanishes on every bin are skipped. When
    ``details`` is given it receives a per-band table, the indices used and
    the spectral mass outside the covered bins.
    """
    for e in (p_exp, q_exp):
        if not float(e) > 0:
            raise InvalidExponent(f"exponent must be positive, got {e}")
    weights = band_weights(g, p)
    idx = active_indices(g, p, weights)
    spec = np.fft.fftn(g.values)
    rows = []
    terms = []
    for i in idx:
        piece = SampledSignal(np.fft.ifftn(weights[i - p.cover.index_range[0]] * spec), g.period)
        norm_i = lp_norm(piece, p_exp)
        w_i = weight(w, i)
        terms.append(w_i * norm_i)
        rows.append({"index": i, "weight": w_i, "lp_norm": norm_i,
                     "band_truncation": member_meets_band(p, i, g.band_limit)[1]})
    total = lq_combine(terms, q_exp) if terms else 0.0
    if details is not None:
        covered = weights.sum(axis=0)
        energy = float(np.sum(np.abs(spec) ** 2))
        outside = float(np.sum(np.abs(spec[covered <= 0]) ** 2))
        details.update({
            "indices": idx,
            "bands": rows,
            "excluded_mass": outside / energy if energy > 0 else 0.0,
        })
    return total


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------

@dataclass
class CoefficientArray:
    """Coefficients ``c_k^(i)``: per scale an integer lattice window ``ks``
    (shape ``(m, d)``) and complex ``values`` (shape ``(m,)``)."""

    kind: str
    dim: int
    scales: dict = field(default_factory=dict)

    def add(self, i: int, ks, values) -> None:
        ks = np.asarray(ks, dtype=np.int64).reshape(-1, self.dim)
        values = np.asarray(values, dtype=complex).ravel()
        if len(ks) != len(values):
            raise SizeMismatch("lattice points and values differ in length")
        self.scales[int(i)] = (ks, values)

    def values(self, i: int) -> np.ndarray:
        return self.scales[i][1]

    def indices(self) -> list[int]:
        return sorted(self.scales)

    def lookup(self, i: int) -> dict:
        ks, vals = self.scales[i]
        return {tuple(int(x) for x in k): v for k, v in zip(ks, vals)}

    def copy(self) -> "CoefficientArray":
        out = CoefficientArray(self.kind, self.dim)
        for i, (ks, v) in self.scales.items():
            out.scales[i] = (ks.copy(), v.copy())
        return out

    def __add__(self, other: "CoefficientArray") -> "CoefficientArray":
        out = self.copy()
        for i, (ks, v) in other.scales.items():
            if i in out.scales and np.array_equal(out.scales[i][0], ks):
                out.scales[i] = (ks, out.scales[i][1] + v)
            elif i in out.scales:
                merged = out.lookup(i)
                for k, val in zip(map(tuple, ks.tolist()), v):
                    merged[k] = merged.get(k, 0) + val
                keys = sorted(merged)
                out.add(i, keys, [merged[k] for k in keys])
            else:
                out.scales[i] = (ks.copy(), v.copy())
        return out


def scale_abs_det(m: ExpansiveMatrix, kind: str, i: int) -> float:
    """``|det T_i|`` with ``T_i = A^i`` or ``T_0 = I, T_i = A^(i-1)``."""
    if kind == "homogeneous":
        return m.abs_det ** i
    return 1.0 if i == 0 else m.abs_det ** (i - 1)


def coefficient_norm(c: CoefficientArray, m: ExpansiveMatrix, w: WeightSequence, p: float, q: float) -> float:
    """``l^q`` over scales of ``|det T_i|^(1/2 - 1/p) * w_i * ||c^(i)||_{l^p}``."""
    for e in (p, q):
        if not float(e) > 0:
            raise InvalidExponent(f"exponent must be positive, got {e}")
    terms = []
    for i in c.indices():
        factor = scale_abs_det(m, c.kind, i) ** (0.5 - 1.0 / p)
        terms.append(factor * weight(w, i) * grid_lp(c.values(i), p))
    return lq_combine(terms, q) if terms else 0.0


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def write_signal(g: SampledSignal, path, binary: bool = True) -> None:
    path = Path(path)
    flat = g.values.ravel()
    if binary:
        pairs = np.empty(2 * flat.size, dtype="<f8")
        pairs[0::2], pairs[1::2] = flat.real, flat.imag
        with path.open("wb") as fh:
            fh.write(SIGNAL_MAGIC + struct.pack("<iid", g.dim, g.grid_size, g.period))
            fh.write(pairs.tobytes())
        return
    lines = [f"{g.dim} {g.grid_size} {g.period!r}"]
    lines += [f"{float(v.real)!r} {float(v.imag)!r}" for v in flat]
    path.write_text("\n".join(lines) + "\n")


def read_signal(path) -> SampledSignal:
    """Read either the binary or the plain-text signal format."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputUnreadable(f"cannot read {path}: {exc}") from exc
    try:
        if raw.startswith(SIGNAL_MAGIC):
            d, n, period = struct.unpack_from("<iid", raw, len(SIGNAL_MAGIC))
            body = np.frombuffer(raw, dtype="<f8", offset=len(SIGNAL_MAGIC) + 16)
            if body.size != 2 * n**d:
                raise ValueError(f"expected {2 * n**d} floats, found {body.size}")
            vals = body[0::2] + 1j * body[1::2]
        else:
            rows = raw.decode().split("\n")
            d, n, period = rows[0].split()
            d, n, period = int(d), int(n), float(period)
            data = np.loadtxt(rows[1:], ndmin=2)
            if data.shape != (n**d, 2):
                raise ValueError(f"expected {n**d} rows of 're im', got {data.shape}")
            vals = data[:, 0] + 1j * data[:, 1]
        return SampledSignal(vals.reshape((n,) * d), period)
    except (ValueError, struct.error, UnicodeDecodeError, IndexError) as exc:
        raise InputUnreadable(f"malformed signal file {path}: {exc}") from exc


def write_coefficients(c: CoefficientArray, path) -> None:
    """CSV records ``i, k_1..k_d, re, im``."""
    head = ["i"] + [f"k{n + 1}" for n in range(c.dim)] + ["re", "im"]
    lines = ["# kind=" + c.kind, ",".join(head)]
    for i in c.indices():
        ks, vals = c.scales[i]
        for k, v in zip(ks.tolist(), vals):
            lines.append(",".join([str(i)] + [str(x) for x in k] + [repr(float(v.real)), repr(float(v.imag))]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_coefficients(path) -> CoefficientArray:
    path = Path(path)
    try:
        rows = path.read_text().splitlines()
    except OSError as exc:
        raise InputUnreadable(f"cannot read {path}: {exc}") from exc
    try:
        kind = rows[0].split("=", 1)[1].strip()
        dim = len(rows[1].split(",")) - 3
        groups: dict[int, tuple[list, list]] = {}
        for line in rows[2:]:
            if not line.strip():
                continue
            parts = line.split(",")
            i = int(parts[0])
            ks, vs = groups.setdefault(i, ([], []))
            ks.append([int(x) for x in parts[1:1 + dim]])
            vs.append(float(parts[-2]) + 1j * float(parts[-1]))
    except (ValueError, IndexError) as exc:
        raise InputUnreadable(f"malformed coefficient file {path}: {exc}") from exc
    out = CoefficientArray(kind, dim)
    for i, (ks, vs) in groups.items():
        out.add(i, ks, vs)
    return out
