import numpy as np
import pytest

from anisoframe.dilation import validate_expansive
from anisoframe.errors import BandMismatch, DeltaNonPositive, IndexOutOfRange, PrototypeKindMismatch
from anisoframe.prototypes import Prototype
from anisoframe.signals import CoefficientArray, SampledSignal
from oracles import direct_coefficient, large_coefficient_pairs, packet_signal
from anisoframe.system import (
    analysis, atom_eval, atom_spectrum, calderon_sum, empirical_frame_bounds, lattice_window, make_system,
    periodized_atom, random_band_signal, roundtrip_error, synthesis,
)

GRID = {1: (512, 16.0), 2: (128, 16.0)}


def hg(dim, order=2):
    return Prototype("annular-hermite-gauss", dim, order)


def test_make_system_checks():
    m = validate_expansive([[2.0]])
    with pytest.raises(DeltaNonPositive):
        make_system("homogeneous", m, hg(1), 0.0, (-1, 1))
    with pytest.raises(PrototypeKindMismatch):
        make_system("homogeneous", m, Prototype("gauss-lowpass", 1), 0.5, (-1, 1))
    with pytest.raises(PrototypeKindMismatch):
        make_system("inhomogeneous", m, hg(1), 0.5, (0, 2))
    with pytest.raises(PrototypeKindMismatch):
        make_system("homogeneous", m, hg(1), 0.5, (0, 2), lowpass=Prototype("gauss-lowpass", 1))
    with pytest.raises(PrototypeKindMismatch):
        make_system("homogeneous", m, hg(2), 0.5, (0, 2))
    with pytest.raises(IndexOutOfRange):
        make_system("inhomogeneous", m, hg(1), 0.5, (-1, 2), lowpass=Prototype("gauss-lowpass", 1))
    with pytest.raises(PrototypeKindMismatch):
        make_system("inhomogeneous", m, hg(1), 0.5, (0, 2), lowpass=Prototype("gauss-lowpass", 1), parseval=True)


def test_atom_time_and_frequency_agree():
    m = validate_expansive([[2.0]])
    sys = make_system("homogeneous", m, hg(1), 0.5, (-2, 2))
    # the Fourier transform of t -> atom_eval(i, 0, t) is atom_spectrum(i, .)
    t = np.linspace(-20, 20, 2**15, endpoint=False)[:, None]
    for i in (-1, 0, 2):
        vals = atom_eval(sys, i, [0], t)
        xi = np.array([[0.3], [1.1], [2.5]])
        ft = np.exp(-2j * np.pi * xi @ t.T) @ vals * (t[1, 0] - t[0, 0])
        assert np.allclose(ft, atom_spectrum(sys, i, xi), atol=1e-10)


def test_lattice_window_is_the_period(matrix):
    sys = make_system("homogeneous", matrix, hg(matrix.dim), 0.5, (-1, 2))
    for i in sys.scales:
        ks = lattice_window(sys, i, 8.0)
        x = ks @ sys.generator(i).T
        assert np.all(x >= -4.0 - 1e-9) and np.all(x < 4.0)
        cell = abs(np.linalg.det(sys.generator(i)))
        assert len(ks) == pytest.approx(8.0**matrix.dim / cell, rel=0.15)


def _system(matrix, kind="homogeneous", delta=0.5):
    low = Prototype("gauss-lowpass", matrix.dim) if kind == "inhomogeneous" else None
    rng = (-2, 2) if kind == "homogeneous" else (0, 3)
    return make_system(kind, matrix, hg(matrix.dim), delta, rng, low)


@pytest.mark.parametrize("kind", ["homogeneous", "inhomogeneous"])
def test_analysis_matches_riemann_inner_products(matrix, kind, rng):
    # valid only for atoms the grid resolves, hence the coarse scales
    sys = _system(matrix, kind)
    n, period = GRID[matrix.dim]
    f = random_band_signal(sys, n, period, rng)
    c = analysis(sys, f, scales=[i for i in sys.scales if i <= (0 if sys.kind == "inhomogeneous" else -1)])
    pts, h = f.points(), f.spacing**matrix.dim
    for i in c.indices():
        ks, v = c.scales[i]
        for j in rng.choice(np.flatnonzero(np.abs(v) >= 1e-2 * np.abs(v).max()), 2):
            direct = np.sum(f.values.ravel() * periodized_atom(sys, i, ks[j], pts, period, images=2)) * h
            assert abs(direct - v[j]) <= 1e-6 * abs(direct)


@pytest.mark.parametrize("kind", ["homogeneous", "inhomogeneous"])
def test_analysis_matches_packet_quadrature(matrix, kind, rng):
    sys = _system(matrix, kind)
    n = 512 if matrix.dim == 1 else 128
    func, f, band = packet_signal(matrix.dim, n, 16.0, rng)
    c = analysis(sys, f)
    for i, k, v in large_coefficient_pairs(c, rng, 8):
        direct = direct_coefficient(sys, i, k, func, band, 16.0)
        assert abs(direct - v) <= 1e-8 * abs(direct)


@pytest.mark.parametrize("kind", ["homogeneous", "inhomogeneous"])
def test_synthesis_is_adjoint_of_analysis(matrix, kind, rng):
    sys = _system(matrix, kind)
    n, period = GRID[matrix.dim]
    f = random_band_signal(sys, n, period, rng)
    a = analysis(sys, f)
    c = CoefficientArray(sys.kind, sys.dim)
    for i in a.indices():
        ks, v = a.scales[i]
        c.add(i, ks, rng.standard_normal(len(v)) + 1j * rng.standard_normal(len(v)))
    g = synthesis(sys, c, n, period)
    lhs = sum(np.vdot(c.values(i), a.values(i)) for i in a.indices())
    rhs = np.vdot(g.values, f.values) * f.spacing**sys.dim
    assert abs(lhs - rhs) <= 1e-9 * abs(rhs)


def test_analysis_rejects_dimension_mismatch():
    sys = _system(validate_expansive([[2.0]]))
    with pytest.raises(BandMismatch):
        analysis(sys, SampledSignal(np.zeros((8, 8)), 1.0))


def test_shift_covariance(matrix, rng):
    sys = _system(matrix)
    n, period = GRID[matrix.dim]
    f = random_band_signal(sys, n, period, rng)
    i0, k0 = 1, np.full(matrix.dim, 2)
    x0 = sys.generator(i0) @ k0
    phase = np.exp(-2j * np.pi * (f.frequencies() @ x0)).reshape(f.values.shape)
    shifted = SampledSignal(np.fft.ifftn(np.fft.fftn(f.values) * phase), period)
    before, after = analysis(sys, f, [i0]).lookup(i0), analysis(sys, shifted, [i0]).lookup(i0)
    top = max(abs(v) for v in before.values())
    shared = [k for k in after if tuple(np.subtract(k, k0)) in before]
    assert len(shared) > 0.5 * len(after)
    assert max(abs(after[k] - before[tuple(np.subtract(k, k0))]) for k in shared) <= 1e-12 * top


def test_parseval_calderon_and_roundtrip(rng):
    m = validate_expansive([[2.0]])
    sys = make_system("homogeneous", m, hg(1), 0.125, (-4, 5), parseval=True)
    f = random_band_signal(sys, 1024, 16.0, rng)
    xi = np.linspace(0.2, 6.0, 50)[:, None]
    assert np.allclose(calderon_sum(sys, xi), 1.0, atol=1e-6)
    assert roundtrip_error(sys, f) < 0.05
    lo, hi = empirical_frame_bounds(sys, 3, seed=1)
    assert 0.9 <= lo <= hi <= 1.1
    assert empirical_frame_bounds(sys, 0) == (float("inf"), 0.0)
