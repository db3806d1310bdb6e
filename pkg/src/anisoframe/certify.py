"""Evaluation of the frame and atomic-decomposition conditions.

Everything here works on two kinds of scale-interaction matrices:

* the *direct* matrices, built from the prototypes' derivative magnitudes on
  the dilated cells, whose row and column sup-sums feed ``delta0``;
* the *envelope* matrices ``M[m, n]``, where the prototype bound is replaced
  by a power-law envelope so that the sums become geometric series with a
  closed-form bound.

Every quantity is computed in logarithms. The homogeneous envelope matrix is
``a^(tau (m-n)) (1 + ||A^(n-m)||)^sigma [avg over Q of env(A^(n-m) eta)]^tau``;
the inhomogeneous one has four cases depending on whether ``m`` or ``n`` is
the low-pass index 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .cover import BaseCell, build_homogeneous, build_inhomogeneous, default_base_cell, default_low_cell
from .dilation import ExpansiveMatrix, power, power_norm, sphere_points
from .errors import (
    ExponentOutOfRange, Inconclusive, NonPositiveConstant, PrototypeKindMismatch,
    QuadratureUnderResolved, ThresholdViolated,
)
from .partition import WeightSequence, moderateness_constant
from .prototypes import Prototype
from .quadrature import RESOLUTION_TOL, log_cell_average

CASES = ("homo-frame", "homo-atoms", "inhomo-frame", "inhomo-atoms")
CONVENTIONS = ("stated", "derived")
CONVERGENCE_TAIL = 1e-6
DIVERGENCE_GROWTH = 1.5
BOUND_TOL = 1.01
ENVELOPE_SAFETY = 1.01


def _split_case(case: str) -> tuple[str, str]:
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES}")
    kind, role = case.split("-")
    return ("homogeneous" if kind == "homo" else "inhomogeneous"), role


# ---------------------------------------------------------------------------
# exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoremParams:
    """Integrability exponents and the constants derived from them."""

    p: float
    q: float
    p0: float
    q0: float
    eps: float
    dim: int
    tau: float
    N: int
    sigma_frame: float
    sigma_atoms: float
    Lambda: float
    theta: float

    def sigma(self, role: str) -> float:
        return self.sigma_frame if role == "frame" else self.sigma_atoms

    def to_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, float) and math.isinf(v) else v) for k, v in asdict(self).items()}


def theorem_params(p: float, q: float, p0: float, q0: float, eps: float, dim: int) -> TheoremParams:
    """Derive ``tau``, ``N``, both ``sigma`` values, ``Lambda`` and ``theta``.

    Raises
    ------
    ExponentOutOfRange
        Unless ``p0, q0`` lie in ``(0, 1]``, ``p >= p0``, ``q >= q0`` and ``eps > 0``.
    """
    for name, v in (("p0", p0), ("q0", q0)):
        if not 0.0 < v <= 1.0:
            raise ExponentOutOfRange(f"{name}={v} must lie in (0, 1]")
    if not p >= p0:
        raise ExponentOutOfRange(f"p={p} must be at least p0={p0}")
    if not q >= q0:
        raise ExponentOutOfRange(f"q={q} must be at least q0={q0}")
    if not eps > 0:
        raise ExponentOutOfRange(f"eps={eps} must be positive")
    if dim < 1:
        raise ExponentOutOfRange("dimension must be positive")
    pm = min(1.0, p)
    tau = min(1.0, p, q)
    n = math.ceil((dim + eps) / pm)
    sigma_frame = tau * (n + dim / pm)
    if p >= 1:
        sigma_atoms = tau * (dim + 1)
    else:
        sigma_atoms = tau * (dim / p + math.ceil((dim + eps) / p))
    theta = max(1.0 / p - 1.0, 0.0)
    return TheoremParams(p, q, p0, q0, eps, dim, tau, n, sigma_frame, sigma_atoms, 1.0 + dim / pm, theta)


def det_exponent(case: str, s: float, theta: float, convention: str = "stated") -> float:
    """Power of ``|det A|`` that plays the role of ``a`` in the geometric series.

    The homogeneous cases are unambiguous. For the inhomogeneous ones the
    ``stated`` convention takes the exponents the hypotheses are written
    with (``s - theta`` for the frame, ``s`` for atoms); ``derived`` takes the
    ones that come out of bounding the direct matrices (``s`` for the frame,
    ``theta - s`` for atoms).
    """
    kind, role = _split_case(case)
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    if kind == "homogeneous" or convention == "derived":
        return s if role == "frame" else theta - s
    return s - theta if role == "frame" else s


def required_exponents(m: ExpansiveMatrix, log_a: float, tau: float, sigma: float) -> tuple[float, float]:
    """Strict lower bounds ``(L, N)``: ``lambda_-^L > a`` and ``a lambda_-^N > lambda_+^(sigma/tau)``."""
    ll = math.log(m.lambda_minus)
    return log_a / ll, (sigma / tau * math.log(m.lambda_plus) - log_a) / ll


@dataclass(frozen=True)
class Thresholds:
    case: str
    convention: str
    det_exponent: float
    log_a: float
    tau: float
    sigma: float
    L: float
    N: float
    K: float | None

    @property
    def a(self) -> float:
        return math.exp(self.log_a)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["a"] = self.a
        return out


def thresholds(case: str, m: ExpansiveMatrix, s: float, tp: TheoremParams,
               convention: str = "stated") -> Thresholds:
    """Required decay exponents for ``case``; ``K`` only for the inhomogeneous cases."""
    kind, role = _split_case(case)
    e = det_exponent(case, s, tp.theta, convention)
    log_a = e * math.log(m.abs_det)
    sigma = tp.sigma(role)
    L, N = required_exponents(m, log_a, tp.tau, sigma)
    return Thresholds(case, convention, e, log_a, tp.tau, sigma, L, N, N if kind == "inhomogeneous" else None)


# ---------------------------------------------------------------------------
# decay envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayEnvelope:
    """Radial power-law bound.

    ``annular``: ``C min(1, |xi|^L) (1 + |xi|)^-N``; ``lowpass``: ``C (1 + |xi|)^-K``.
    """

    C: float
    L: float = 0.0
    N: float = 0.0
    K: float = 0.0
    kind: str = "annular"

    def __post_init__(self):
        if self.kind not in ("annular", "lowpass"):
            raise ValueError("envelope kind must be 'annular' or 'lowpass'")
        if self.C < 0 or self.L < 0 or self.N < 0 or self.K < 0:
            raise ValueError("envelope constants must be non-negative")

    def log_value(self, radius: np.ndarray) -> np.ndarray:
        radius = np.asarray(radius, dtype=float)
        if self.C == 0:
            return np.full(radius.shape, -np.inf)
        out = math.log(self.C) - (self.N if self.kind == "annular" else self.K) * np.log1p(radius)
        if self.kind == "annular" and self.L > 0:
            with np.errstate(divide="ignore"):
                out = out + self.L * np.minimum(0.0, np.log(radius))
        return out

    def value(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return np.exp(self.log_value(np.linalg.norm(xi, axis=1)))

    def to_dict(self) -> dict:
        return asdict(self)


def _direction_set(dim: int) -> np.ndarray:
    return sphere_points(dim, 64 if dim == 2 else None)


def bound_function(proto: Prototype, role: str, tp: TheoremParams):
    """Log of the function an envelope has to dominate.

    ``frame``: the largest ``|d^alpha [(2 pi i xi)^beta psi_hat]|`` over
    ``|alpha| <= N``, ``|beta| <= 1``. ``atoms``: the largest
    ``|d^alpha psi_hat|`` over ``|alpha| <= N`` times ``(1 + |xi|)^(d + 1 + eps)``.
    """
    if not isinstance(proto, Prototype) or not proto.analytic:
        raise PrototypeKindMismatch("certification needs a built-in analytic prototype")
    fam = proto.derivative_family(tp.N, gradient=(role == "frame"))
    if role == "frame":
        return fam.log_max_abs
    lift = tp.dim + 1 + tp.eps
    return lambda xi: fam.log_max_abs(xi) + lift * np.log1p(np.linalg.norm(np.atleast_2d(xi), axis=1))


def natural_vanishing(proto: Prototype, tp: TheoremParams) -> float:
    """Order of the zero at the origin that survives ``N`` derivatives."""
    return float(max(0, proto.vanishing_order - tp.N))


def fit_envelope(log_bound, kind: str, dim: int, width: float, L: float = 0.0, decay: float = 0.0) -> DecayEnvelope:
    """Smallest ``C`` (times a 1% safety factor) making the envelope dominate
    ``exp(log_bound)`` on a radial verification grid."""
    dirs = _direction_set(dim)
    shape = DecayEnvelope(1.0, L, decay, decay, kind)
    r_max = width * (4.0 + 2.0 * math.sqrt(decay + L + 4.0 * dim + 40.0))
    for _ in range(8):
        radii = np.logspace(-4, math.log10(r_max), 400)
        pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
        ratio = (log_bound(pts) - shape.log_value(np.linalg.norm(pts, axis=1))).reshape(len(radii), -1).max(axis=1)
        if ratio[-1] < ratio.max() - math.log(1e8):
            break
        r_max *= 2.0
    else:
        raise QuadratureUnderResolved("envelope ratio does not decay on the verification grid")
    peak = float(ratio.max())
    C = 0.0 if math.isinf(peak) else ENVELOPE_SAFETY * math.exp(peak)
    return DecayEnvelope(C, L, decay, decay, kind)


# ---------------------------------------------------------------------------
# envelope interaction matrices
# ---------------------------------------------------------------------------

_NORM_CACHE: dict = {}


def _log1p_norm(m: ExpansiveMatrix, k: int) -> float:
    key = (m.entries.tobytes(), k)
    if key not in _NORM_CACHE:
        if len(_NORM_CACHE) > 100_000:
            _NORM_CACHE.clear()
        _NORM_CACHE[key] = math.log1p(power_norm(m, k))
    return _NORM_CACHE[key]


def _log_avg(cell: BaseCell, m: ExpansiveMatrix, k: int, log_env, grid: int) -> float:
    p = power(m, k)
    return log_cell_average(cell, m.dim, lambda x: log_env(np.linalg.norm(x @ p.T, axis=1)), grid)


class HomogeneousInteraction:
    """Envelope matrix ``M[m, n]`` for a homogeneous cover; depends on ``n - m`` only."""

    kind = "homogeneous"

    def __init__(self, m: ExpansiveMatrix, env: DecayEnvelope, log_a: float, tau: float, sigma: float,
                 cell: BaseCell | None = None, grid: int = 32):
        self.matrix, self.env, self.log_a, self.tau, self.sigma = m, env, log_a, tau, sigma
        self.cell = default_base_cell(m) if cell is None else cell
        self.grid = grid
        self._avg = lru_cache(maxsize=None)(self._avg_uncached)

    def _avg_uncached(self, k: int) -> float:
        return _log_avg(self.cell, self.matrix, k, self.env.log_value, self.grid)

    def prefetch(self, keys, threads: int = 1) -> None:
        _prefetch(self._avg, sorted(set(keys)), threads)

    def keys(self, T: int):
        return range(-T, T + 1)

    def log_value(self, m: int, n: int) -> float:
        k = n - m
        avg = self._avg(k)
        if math.isinf(avg):
            return -math.inf
        return self.tau * (m - n) * self.log_a + self.sigma * _log1p_norm(self.matrix, k) + self.tau * avg

    def __call__(self, m: int, n: int) -> float:
        return math.exp(self.log_value(m, n))


class InhomogeneousInteraction:
    """Four-case envelope matrix ``M[m, n]`` for ``m, n >= 0``; index 0 is the low-pass cell."""

    kind = "inhomogeneous"

    def __init__(self, m: ExpansiveMatrix, env_low: DecayEnvelope, env_ann: DecayEnvelope, log_a: float,
                 tau: float, sigma: float, low_cell: BaseCell | None = None, cell: BaseCell | None = None,
                 grid: int = 32):
        self.matrix, self.env_low, self.env_ann = m, env_low, env_ann
        self.log_a, self.tau, self.sigma = log_a, tau, sigma
        self.low_cell = default_low_cell() if low_cell is None else low_cell
        self.cell = default_base_cell(m) if cell is None else cell
        self.grid = grid
        self._avg = lru_cache(maxsize=None)(self._avg_uncached)

    def _avg_uncached(self, key) -> float:
        which, k = key
        cell = self.low_cell if which in ("low-low", "ann-low") else self.cell
        env = self.env_low if which in ("low-low", "low-ann") else self.env_ann
        return _log_avg(cell, self.matrix, k, env.log_value, self.grid)

    @staticmethod
    def _key(m: int, n: int):
        if m < 0 or n < 0:
            raise ValueError("inhomogeneous indices are non-negative")
        if m == 0 and n == 0:
            return ("low-low", 0)
        if n == 0:
            return ("ann-low", 1 - m)
        if m == 0:
            return ("low-ann", n - 1)
        return ("ann-ann", n - m)

    def keys(self, T: int):
        out = [("low-low", 0)]
        out += [("ann-low", 1 - m) for m in range(1, 2 * T + 1)]
        out += [("low-ann", n - 1) for n in range(1, 2 * T + 1)]
        out += [("ann-ann", k) for k in range(-T, T + 1)]
        return out

    def prefetch(self, keys, threads: int = 1) -> None:
        _prefetch(self._avg, sorted(set(keys)), threads)

    def log_value(self, m: int, n: int) -> float:
        key = self._key(m, n)
        avg = self._avg(key)
        if math.isinf(avg):
            return -math.inf
        which, k = key
        if which == "low-low":
            return self.sigma * math.log(2.0) + self.tau * avg
        if which == "ann-low":
            lead = self.tau * m * self.log_a
        elif which == "low-ann":
            lead = -self.tau * n * self.log_a
        else:
            lead = self.tau * (m - n) * self.log_a
        return lead + self.sigma * _log1p_norm(self.matrix, k) + self.tau * avg

    def __call__(self, m: int, n: int) -> float:
        return math.exp(self.log_value(m, n))


def _prefetch(fn, keys, threads: int) -> None:
    if threads <= 1:
        for k in keys:
            fn(k)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(fn, keys))


def mmn_homogeneous(m: ExpansiveMatrix, env: DecayEnvelope, a: float, tau: float, sigma: float,
                    cell: BaseCell | None, row: int, col: int, grid: int = 32) -> float:
    """One entry ``M[row, col]`` of the homogeneous envelope matrix."""
    return HomogeneousInteraction(m, env, math.log(a), tau, sigma, cell, grid)(row, col)


def mmn_inhomogeneous(m: ExpansiveMatrix, env_low: DecayEnvelope, env_ann: DecayEnvelope, a: float, tau: float,
                      sigma: float, low_cell: BaseCell | None, cell: BaseCell | None, row: int, col: int,
                      grid: int = 32) -> float:
    """One entry ``M[row, col]`` of the inhomogeneous envelope matrix."""
    return InhomogeneousInteraction(m, env_low, env_ann, math.log(a), tau, sigma, low_cell, cell, grid)(row, col)


# ---------------------------------------------------------------------------
# closed-form bounds
# ---------------------------------------------------------------------------

def _geometric(ratio: float, what: str) -> float:
    if not ratio < 1.0:
        raise ThresholdViolated(f"{what}: ratio {ratio:.6g} is not below 1")
    return 1.0 / (1.0 - ratio)


def analytic_bound_homo(m: ExpansiveMatrix, env: DecayEnvelope, a: float, tau: float, sigma: float,
                        r: float, R: float) -> float:
    """Closed-form bound on both sup-sums of the homogeneous envelope matrix.

    Raises
    ------
    ThresholdViolated
        When either geometric ratio is not below one.
    """
    lm, lp, b = m.lambda_minus, m.lambda_plus, m.growth_b
    small = _geometric((a / lm**env.L) ** tau, "vanishing order")
    large = _geometric(lp**sigma / (a * lm**env.N) ** tau, "decay order")
    lead = env.C**tau * (1 + b) ** sigma * (b * max(1.0 / r, R)) ** (max(env.L, env.N) * tau)
    return lead * (small + 2.0 * large)


def analytic_bounds_inhomo(m: ExpansiveMatrix, env_low: DecayEnvelope, env_ann: DecayEnvelope, a: float,
                           tau: float, sigma: float, r: float, R: float, R0: float) -> dict:
    """Closed-form bounds on ``sup_n sum_m`` (``rows``) and ``sup_m sum_n``
    (``columns``) of the inhomogeneous envelope matrix, split by whether the
    fixed index is 0; one shared ``C`` covers both envelopes.

    Raises
    ------
    ThresholdViolated
        When any geometric ratio is not below one.
    """
    lm, lp, b = m.lambda_minus, m.lambda_plus, m.growth_b
    C = max(env_low.C, env_ann.C)
    L, N, K = env_ann.L, env_ann.N, env_low.K
    g_small = _geometric((a / lm**L) ** tau, "vanishing order")
    g_large = _geometric(lp**sigma / (a * lm**N) ** tau, "decay order")
    g_low = _geometric(lp**sigma / (a * lm**K) ** tau, "low-pass decay order")
    Ct = C**tau
    rows_zero = 2**sigma * Ct + (1 + b) ** sigma * (b * lm * R0) ** (L * tau) * Ct * g_small
    rows_other = (Ct * (1 + b) ** sigma * (1 + b * lm / min(1.0, r)) ** (max(N, K) * tau)
                  * (1 + b * R) ** (L * tau) * (g_low + g_large + g_small))
    cols_zero = 2**sigma * Ct + Ct * ((1 + b) / lp) ** sigma * (b * lm / r) ** (K * tau) * g_low
    cols_other = (Ct * (1 + b) ** sigma * (b * lm * max(R, R0)) ** (L * tau)
                  * ((1 + b) / min(1.0, r)) ** (N * tau) * (g_large + 2.0 * g_small))
    return {
        "rows": max(rows_zero, rows_other), "rows_index_zero": rows_zero, "rows_index_nonzero": rows_other,
        "columns": max(cols_zero, cols_other), "columns_index_zero": cols_zero, "columns_index_nonzero": cols_other,
    }


# ---------------------------------------------------------------------------
# truncated sums
# ---------------------------------------------------------------------------

@dataclass
class SupSums:
    """Truncated ``sup_n sum_m M[m, n]`` (``rows``) and ``sup_m sum_n M[m, n]``
    (``columns``) with their half-radius values and last-ring shares."""

    T: int
    rows: float
    columns: float
    rows_half: float
    columns_half: float
    tail_rows: float
    tail_columns: float
    status: str = ""

    @property
    def growth(self) -> float:
        out = 1.0
        for full, half in ((self.rows, self.rows_half), (self.columns, self.columns_half)):
            if full > 0:
                out = max(out, math.inf if half == 0 else full / half)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["growth"] = self.growth
        return d


def _window(kind: str, T: int):
    """Fixed indices and, for each, the summed indices within distance ``T``."""
    if kind == "homogeneous":
        return [(n, range(n - T, n + T + 1)) for n in range(-T, T + 1)]
    return [(n, range(max(0, n - T), n + T + 1)) for n in range(0, T + 1)]


def _sup_sum(log_entry, kind: str, T: int) -> tuple[float, float]:
    """``log sup_fixed sum_summed`` and the largest last-ring share."""
    best, tail = -math.inf, 0.0
    for fixed, summed in _window(kind, T):
        vals = np.array([log_entry(j, fixed) for j in summed])
        ring = np.array([v for j, v in zip(summed, vals) if abs(j - fixed) == T])
        if np.all(np.isneginf(vals)):
            continue
        total = float(logsumexp(vals))
        best = max(best, total)
        if ring.size and not np.all(np.isneginf(ring)):
            tail = max(tail, math.exp(float(logsumexp(ring)) - total))
    return best, tail


def truncated_sup_sums(mmn, T: int = 64, threads: int = 1) -> SupSums:
    """Sup-sums of ``mmn`` over the window ``|m - n| <= T`` (fixed index in
    ``[-T, T]``, or ``[0, T]`` for inhomogeneous matrices) and a verdict.

    ``convergent`` when the terms at distance ``T`` carry less than ``1e-6``
    of every sum; ``divergent`` when a sup-sum grows by ``1.5`` or more from
    radius ``T/2`` to ``T``. The divergence test is a heuristic.

    Raises
    ------
    Inconclusive
        When neither criterion is met; the sums are attached as ``.result``.
    """
    if T < 8:
        raise ValueError("truncation radius must be at least 8")
    if hasattr(mmn, "prefetch"):
        mmn.prefetch(mmn.keys(T), threads)
    log_entry = mmn.log_value if hasattr(mmn, "log_value") else (lambda i, j: math.log(mmn(i, j)) if mmn(i, j) > 0 else -math.inf)
    kind = getattr(mmn, "kind", "homogeneous")
    rows, tail_r = _sup_sum(lambda m, n: log_entry(m, n), kind, T)
    cols, tail_c = _sup_sum(lambda n, m: log_entry(m, n), kind, T)
    rows_h, _ = _sup_sum(lambda m, n: log_entry(m, n), kind, T // 2)
    cols_h, _ = _sup_sum(lambda n, m: log_entry(m, n), kind, T // 2)
    out = SupSums(T, math.exp(rows), math.exp(cols), math.exp(rows_h), math.exp(cols_h), tail_r, tail_c)
    if max(tail_r, tail_c) < CONVERGENCE_TAIL:
        out.status = "convergent"
    elif out.growth >= DIVERGENCE_GROWTH:
        out.status = "divergent"
    else:
        out.status = "inconclusive"
        err = Inconclusive(f"tail share {max(tail_r, tail_c):.3g} and growth {out.growth:.3g} at T={T}")
        err.result = out
        raise err
    return out


# ---------------------------------------------------------------------------
# direct matrices and their reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertSetup:
    """Everything ``certify`` needs besides the truncation radius.

    ``margin`` is added to each required decay exponent when fitting the
    envelopes; ``L_cap`` caps the annular vanishing exponent (used to probe
    failing configurations).
    """

    case: str
    matrix: ExpansiveMatrix
    s: float
    params: TheoremParams
    annular: Prototype
    lowpass: Prototype | None = None
    base_cell: BaseCell | None = None
    low_cell: BaseCell | None = None
    convention: str = "stated"
    grid: int = 32
    margin: float = 1.0
    L_cap: float | None = None

    def __post_init__(self):
        kind, _ = _split_case(self.case)
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        for proto, role in ((self.annular, "annular"), (self.lowpass, "lowpass")):
            if proto is None:
                continue
            if not isinstance(proto, Prototype) or not proto.analytic:
                raise PrototypeKindMismatch("certification needs built-in analytic prototypes")
            if proto.role != role or proto.dim != self.matrix.dim:
                raise PrototypeKindMismatch(f"expected a {self.matrix.dim}-d {role} prototype")
        if kind == "inhomogeneous" and self.lowpass is None:
            raise PrototypeKindMismatch("inhomogeneous certification needs a low-pass prototype")
        if self.params.dim != self.matrix.dim:
            raise ValueError("exponent dimension does not match the matrix")
        object.__setattr__(self, "base_cell", self.base_cell or default_base_cell(self.matrix))
        if kind == "inhomogeneous":
            object.__setattr__(self, "low_cell", self.low_cell or default_low_cell())

    @property
    def kind(self) -> str:
        return _split_case(self.case)[0]

    @property
    def role(self) -> str:
        return _split_case(self.case)[1]


def _transform(kind: str, m: ExpansiveMatrix, i: int) -> np.ndarray:
    if kind == "homogeneous":
        return power(m, i)
    return np.eye(m.dim) if i == 0 else power(m, i - 1)


def _log_det(kind: str, m: ExpansiveMatrix, i: int) -> float:
    e = i if kind == "homogeneous" else max(i - 1, 0)
    return e * math.log(m.abs_det)


def _log_weight(kind: str, m: ExpansiveMatrix, s: float, i: int) -> float:
    return s * _log_det(kind, m, i)


class ReductionCheck:
    """Direct matrix entries and their envelope bounds for one setup.

    The direct entry for the frame case compares scale ``i`` against the
    dilated cell of scale ``j`` using the derivatives of ``(2 pi i xi)^beta``
    times the prototype (max over ``beta`` outside the integral); the atoms
    case uses the derivative bound lifted by ``(1 + |xi|)^(d + 1 + eps)``.
    The bound is ``2^d`` times a power of ``|det A|`` times the envelope
    matrix entry at the mapped indices. Entries are cached by the pair's
    scale offset where that determines them.
    """

    def __init__(self, setup: CertSetup, envelopes: dict | None = None):
        self.setup = setup
        tp, m = setup.params, setup.matrix
        self.envelopes = envelopes if envelopes is not None else fit_envelopes(setup)[0]
        self.a_exponent = det_exponent(setup.case, setup.s, tp.theta, "derived")
        log_a = self.a_exponent * math.log(m.abs_det)
        sigma = tp.sigma(setup.role)
        if setup.kind == "homogeneous":
            self.mmn = HomogeneousInteraction(m, self.envelopes["annular"], log_a, tp.tau, sigma,
                                              setup.base_cell, setup.grid)
            self.log_factor = 0.0
        else:
            self.mmn = InhomogeneousInteraction(m, self.envelopes["lowpass"], self.envelopes["annular"], log_a,
                                                tp.tau, sigma, setup.low_cell, setup.base_cell, setup.grid)
            shift = setup.s if setup.role == "frame" else setup.s - tp.theta
            self.log_factor = abs(shift) * tp.tau * math.log(m.abs_det)
        fams = {}
        for name in ("annular", "lowpass"):
            proto = getattr(setup, name)
            if proto is None:
                continue
            if setup.role == "frame":
                fams[name] = [f.log_max_abs for f in proto.derivative_families(tp.N, gradient=True)]
            else:
                fams[name] = [bound_function(proto, "atoms", tp)]
        self._families = fams
        self._direct = {}

    def _proto_name(self, i: int) -> str:
        return "lowpass" if self.setup.kind == "inhomogeneous" and i == 0 else "annular"

    def _cell(self, i: int) -> BaseCell:
        return self.setup.low_cell if self.setup.kind == "inhomogeneous" and i == 0 else self.setup.base_cell

    def mapped_indices(self, i: int, j: int) -> tuple[int, int]:
        if self.setup.role == "frame":
            return i, j
        return (-i, -j) if self.setup.kind == "homogeneous" else (j, i)

    def _direct_integral(self, i: int, j: int) -> tuple[float, float]:
        """``log`` of the cell-integral part (without the power ``tau``), the
        quadrature error estimate and the matrix norm; cached on the data the
        integral depends on."""
        s = self.setup
        m = s.matrix
        if s.role == "frame":
            cell_idx, fam_idx, mat = j, i, np.linalg.solve(_transform(s.kind, m, i), _transform(s.kind, m, j))
        else:
            cell_idx, fam_idx, mat = i, j, np.linalg.solve(_transform(s.kind, m, j), _transform(s.kind, m, i))
        name, cell = self._proto_name(fam_idx), self._cell(cell_idx)
        key = (name, cell, np.round(mat, 12).tobytes())
        if key not in self._direct:
            best, change = -math.inf, 0.0
            for log_f in self._families[name]:
                val, ch = log_cell_average(cell, m.dim, lambda x, f=log_f: f(x @ mat.T), s.grid,
                                           strict=False)
                if val > best:
                    best = val
                if not math.isinf(val):
                    change = max(change, ch)
            self._direct[key] = (best + math.log(cell.volume(m.dim)), change, float(np.linalg.norm(mat, 2)))
        return self._direct[key]

    def pair(self, i: int, j: int) -> dict:
        s, tp, m = self.setup, self.setup.params, self.setup.matrix
        if s.kind == "inhomogeneous" and (i < 0 or j < 0):
            raise ValueError("inhomogeneous indices are non-negative")
        log_int, change, mat_norm = self._direct_integral(i, j)
        lead = _log_weight(s.kind, m, s.s, i) - _log_weight(s.kind, m, s.s, j)
        if s.role == "atoms":
            lead += tp.theta * (_log_det(s.kind, m, j) - _log_det(s.kind, m, i))
        log_direct = tp.tau * lead + tp.sigma(s.role) * math.log1p(mat_norm) + tp.tau * log_int
        mi, mj = self.mapped_indices(i, j)
        log_reduced = m.dim * math.log(2.0) + self.log_factor + self.mmn.log_value(mi, mj)
        log_upper = log_direct + tp.tau * math.log1p(change)
        ok_upper = log_upper <= log_reduced + math.log(BOUND_TOL)
        ok_value = log_direct <= log_reduced + math.log(BOUND_TOL)
        if ok_value and not ok_upper and change > RESOLUTION_TOL:
            raise QuadratureUnderResolved(f"direct entry ({i}, {j}) too close to its bound to resolve")
        return {
            "i": i, "j": j, "m": mi, "n": mj,
            "direct": math.exp(log_direct), "reduced": math.exp(log_reduced),
            "log_margin": log_reduced - log_direct if not math.isinf(log_direct) else math.inf,
            "quadrature_error": change, "ok": bool(ok_value),
        }


def nij_reduction(setup: CertSetup, i: int, j: int) -> dict:
    """Direct entry ``(i, j)`` and its ``2^d`` envelope bound, computed independently.

    Returns a dict with ``direct``, ``reduced``, the mapped ``(m, n)`` and
    ``ok`` (``direct <= reduced`` within 1%).
    """
    return ReductionCheck(setup).pair(i, j)


# ---------------------------------------------------------------------------
# delta0 and the full report
# ---------------------------------------------------------------------------

def delta0(role: str, master_C: float, C_Qw: float, sums: tuple[float, float], tau: float) -> float:
    """Largest admissible lattice step.

    ``frame``: ``1 / (1 + C C_Qw^4 (S_a^(1/tau) + S_b^(1/tau))^2)``;
    ``atoms``: ``min(1, 1 / (C (S_a^(1/tau) + S_b^(1/tau))))``.

    Raises
    ------
    NonPositiveConstant
        When ``master_C``, ``C_Qw`` or ``tau`` is not positive.
    """
    if role not in ("frame", "atoms"):
        raise ValueError("role must be 'frame' or 'atoms'")
    if not master_C > 0:
        raise NonPositiveConstant(f"master constant {master_C} must be positive")
    if not C_Qw > 0:
        raise NonPositiveConstant(f"moderateness constant {C_Qw} must be positive")
    if not tau > 0:
        raise NonPositiveConstant("tau must be positive")
    sa, sb = sums
    if sa < 0 or sb < 0:
        raise NonPositiveConstant("sums must be non-negative")
    total = sa ** (1.0 / tau) + sb ** (1.0 / tau)
    if role == "frame":
        return 1.0 / (1.0 + master_C * C_Qw**4 * total**2)
    return 1.0 if total == 0 else min(1.0, 1.0 / (master_C * total))


def fit_envelopes(setup: CertSetup, th: Thresholds | None = None) -> tuple[dict, dict]:
    """Envelopes for the setup's prototypes with decay exponents
    ``required + margin`` under either convention; also returns the natural
    vanishing exponent."""
    tp = setup.params
    th = thresholds(setup.case, setup.matrix, setup.s, tp, setup.convention) if th is None else th
    natural = natural_vanishing(setup.annular, tp)
    L = natural if setup.L_cap is None else min(natural, setup.L_cap)
    # the decay exponents cover both conventions so that delta0 can always use the derived one
    thd = thresholds(setup.case, setup.matrix, setup.s, tp, "derived")
    decay = max(0.0, th.N + setup.margin, thd.N + setup.margin)
    envs = {"annular": fit_envelope(bound_function(setup.annular, setup.role, tp), "annular", tp.dim,
                                    setup.annular.width, L, decay)}
    if setup.kind == "inhomogeneous":
        envs["lowpass"] = fit_envelope(bound_function(setup.lowpass, setup.role, tp), "lowpass", tp.dim,
                                       setup.lowpass.width, 0.0, max(0.0, th.K + setup.margin, thd.K + setup.margin))
    return envs, {"natural_L": natural, "L_cap": setup.L_cap}


def json_ready(x):
    if isinstance(x, dict):
        return {str(k): json_ready(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_ready(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


@dataclass
class CertReport:
    case: str
    convention: str
    params: dict
    matrix: dict
    thresholds: list
    envelopes: dict
    sums: dict
    bounds: dict
    reductions: list
    delta0: dict
    verdict: str
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return json_ready(asdict(self))

    def to_text(self) -> str:
        lines = [f"case {self.case} ({self.convention} exponents): {self.verdict}"]
        for row in self.thresholds:
            mark = "ok" if row["ok"] else "VIOLATED"
            lines.append(f"  {row['name']}: provided {row['provided']:.6g} > required {row['required']:.6g}  {mark}")
        s = self.sums
        if s.get("status"):
            lines.append(f"  sums at T={s.get('T')}: rows {s.get('rows')} columns {s.get('columns')} ({s.get('status')})")
        if self.bounds:
            lines.append(f"  closed-form bounds: rows {self.bounds.get('rows')} columns {self.bounds.get('columns')}")
        ok = sum(r["ok"] for r in self.reductions)
        lines.append(f"  direct-vs-envelope checks: {ok}/{len(self.reductions)} pass")
        if self.delta0:
            lines.append(f"  delta0 = {self.delta0.get('value')} ({self.delta0.get('label')})")
        for f in self.failures:
            lines.append(f"  failed: {f}")
        return "\n".join(lines) + "\n"


def default_pairs(kind: str) -> list:
    idx = (-2, 0, 2) if kind == "homogeneous" else (0, 1, 3)
    return [(i, j) for i in idx for j in idx]


def certify(setup: CertSetup, T: int = 64, master_C: float | None = None, pairs=None,
            threads: int = 1) -> CertReport:
    """Evaluate every condition for ``setup`` and return the report.

    PASS requires every provided exponent to exceed its requirement, the
    truncated sums to converge and stay within 1% of the closed-form bounds,
    and every direct-vs-envelope spot check to hold.
    """
    tp, m = setup.params, setup.matrix
    th = thresholds(setup.case, m, setup.s, tp, setup.convention)
    envs, env_info = fit_envelopes(setup, th)
    failures = []

    ann = envs["annular"]
    rows = [{"name": "L", "what": "annular vanishing exponent", "required": th.L, "provided": ann.L},
            {"name": "N", "what": "annular decay exponent", "required": th.N, "provided": ann.N}]
    if setup.kind == "inhomogeneous":
        rows.append({"name": "K", "what": "low-pass decay exponent", "required": th.K, "provided": envs["lowpass"].K})
    for r in rows:
        r["ok"] = bool(r["provided"] > r["required"])
        if not r["ok"]:
            failures.append(f"{r['what']} {r['name']}={r['provided']:.6g} does not exceed {r['required']:.6g}")

    if setup.kind == "homogeneous":
        mmn = HomogeneousInteraction(m, ann, th.log_a, tp.tau, th.sigma, setup.base_cell, setup.grid)
    else:
        mmn = InhomogeneousInteraction(m, envs["lowpass"], ann, th.log_a, tp.tau, th.sigma,
                                       setup.low_cell, setup.base_cell, setup.grid)
    try:
        sums = truncated_sup_sums(mmn, T, threads)
    except Inconclusive as exc:
        sums = exc.result
    sums_d = sums.to_dict()
    if sums.status != "convergent":
        failures.append(f"truncated sums are {sums.status}")

    r_in, R_out = setup.base_cell.euclidean_radii(m.dim)
    try:
        if setup.kind == "homogeneous":
            b = analytic_bound_homo(m, ann, th.a, tp.tau, th.sigma, r_in, R_out)
            bounds = {"rows": b, "columns": b}
        else:
            R0 = setup.low_cell.euclidean_radii(m.dim)[1]
            bounds = analytic_bounds_inhomo(m, envs["lowpass"], ann, th.a, tp.tau, th.sigma, r_in, R_out, R0)
    except ThresholdViolated as exc:
        bounds = {}
        failures.append(f"closed-form bound undefined: {exc}")
    if bounds and sums.status == "convergent":
        for side in ("rows", "columns"):
            if not sums_d[side] <= bounds[side] * BOUND_TOL:
                failures.append(f"truncated {side} sup-sum {sums_d[side]:.6g} exceeds its bound {bounds[side]:.6g}")

    checker = ReductionCheck(setup, envs)
    reductions = [checker.pair(i, j) for i, j in (default_pairs(setup.kind) if pairs is None else pairs)]
    bad = [(r["i"], r["j"]) for r in reductions if not r["ok"]]
    if bad:
        failures.append(f"direct entries exceed their envelope bounds at {bad}")

    # delta0 needs sums that bound the direct matrix: those of the envelope
    # matrix with the derived exponent, scaled by 2^d and the boundary factor
    if setup.kind == "homogeneous" or setup.convention == "derived":
        dsums = sums
    else:
        try:
            dsums = truncated_sup_sums(checker.mmn, T, threads)
        except Inconclusive as exc:
            dsums = exc.result
    d0 = {"value": None, "reason": f"sums for the derived exponent are {dsums.status}"}
    if dsums.status == "convergent":
        scale = 2.0**m.dim * math.exp(checker.log_factor)
        theorem_sums = (scale * dsums.rows, scale * dsums.columns)
        weights = WeightSequence(setup.kind, setup.s, m.abs_det)
        cover = (build_homogeneous(m, setup.base_cell, (-4, 4)) if setup.kind == "homogeneous"
                 else build_inhomogeneous(m, setup.low_cell, setup.base_cell, (0, 8)))
        c_qw = moderateness_constant(weights, cover)
        C = 1.0 if master_C is None else master_C
        d0 = {
            "value": delta0(setup.role, C, c_qw, theorem_sums, tp.tau),
            "label": "relative (master constant defaulted to 1)" if master_C is None else "absolute",
            "master_C": C, "master_C_source": "default" if master_C is None else "user",
            "C_Qw": c_qw, "C_Qw_source": "weight moderateness constant over neighbouring cells",
            "scale_sums": list(theorem_sums), "sum_scale_factor": scale,
        }

    return CertReport(
        case=setup.case, convention=setup.convention, params=tp.to_dict(), matrix=m.describe(),
        thresholds=rows, envelopes={**{k: v.to_dict() for k, v in envs.items()}, **env_info,
                                    "a": th.a, "det_exponent": th.det_exponent, "sigma": th.sigma,
                                    "prototype_identification": "hypotheses are checked on the prototype that builds the atoms"},
        sums=sums_d, bounds=bounds, reductions=reductions, delta0=d0,
        verdict="PASS" if not failures else "FAIL", failures=failures,
    )

