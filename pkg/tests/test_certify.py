import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from anisoframe import certify as cert
from anisoframe.cover import BaseCell
from anisoframe.dilation import validate_expansive, with_margins
from anisoframe.errors import (
    ExponentOutOfRange, Inconclusive, NonPositiveConstant, PrototypeKindMismatch, ThresholdViolated,
)
from anisoframe.prototypes import Prototype


def scalar2():
    return validate_expansive([[2.0]])


def test_theorem_params_banach_range():
    tp = cert.theorem_params(2.0, 2.0, 1.0, 1.0, 0.5, 1)
    assert (tp.tau, tp.N, tp.sigma_frame, tp.sigma_atoms, tp.Lambda, tp.theta) == (1.0, 2, 3.0, 2.0, 2.0, 0.0)


def test_theorem_params_quasi_banach_range():
    tp = cert.theorem_params(0.5, 1.0, 0.5, 1.0, 1.0, 2)
    assert tp.tau == 0.5 and tp.N == 6
    assert tp.sigma_frame == pytest.approx(0.5 * (6 + 4))
    assert tp.sigma_atoms == pytest.approx(0.5 * (4 + 6))
    assert tp.Lambda == 5.0 and tp.theta == 1.0


def test_theorem_params_infinite_exponents():
    tp = cert.theorem_params(math.inf, math.inf, 1.0, 1.0, 1.0, 2)
    assert tp.tau == 1.0 and tp.theta == 0.0 and tp.N == 3
    assert tp.to_dict()["p"] == "inf"


@pytest.mark.parametrize("args", [(2, 2, 0.0, 1, 1, 1), (2, 2, 1, 1.5, 1, 1), (0.5, 2, 1, 1, 1, 1),
                                  (2, 0.5, 1, 1, 1, 1), (2, 2, 1, 1, 0.0, 1)])
def test_theorem_params_rejects(args):
    with pytest.raises(ExponentOutOfRange):
        cert.theorem_params(*args)


def test_threshold_hand_example():
    m = with_margins(validate_expansive([[2.0, 0.0], [0.0, 2.0]]), 1.9, 2.1)
    L, N = cert.required_exponents(m, math.log(4.0), 1.0, 5.0)
    assert L == pytest.approx(math.log(4) / math.log(1.9), rel=1e-12)
    assert L == pytest.approx(2.1596, abs=1e-3)  # the hand value is rounded
    assert N == pytest.approx((5 * math.log(2.1) - math.log(4)) / math.log(1.9), rel=1e-12)
    assert N == pytest.approx(3.6195, abs=1e-3)
    tp = cert.theorem_params(1, 1, 1, 1, 1, 2)
    th = cert.thresholds("homo-frame", m, 1.0, tp)
    assert th.sigma == 5.0 and th.a == pytest.approx(4.0)
    assert (th.L, th.N) == pytest.approx((L, N))


def test_det_exponents():
    assert cert.det_exponent("homo-frame", 1.5, 0.5) == 1.5
    assert cert.det_exponent("homo-atoms", 1.5, 0.5) == -1.0
    assert cert.det_exponent("inhomo-frame", 1.5, 0.5) == 1.0
    assert cert.det_exponent("inhomo-atoms", 1.5, 0.5) == 1.5
    assert cert.det_exponent("inhomo-frame", 1.5, 0.5, "derived") == 1.5
    assert cert.det_exponent("inhomo-atoms", 1.5, 0.5, "derived") == -1.0
    with pytest.raises(ValueError):
        cert.det_exponent("homo-frame", 1, 0, "other")


def test_envelope_values():
    env = cert.DecayEnvelope(2.0, L=3, N=4)
    r = np.array([0.5, 1.0, 3.0])
    assert np.allclose(np.exp(env.log_value(r)), 2.0 * np.minimum(1, r**3) * (1 + r) ** -4)
    low = cert.DecayEnvelope(1.5, K=2, kind="lowpass")
    assert np.allclose(np.exp(low.log_value(r)), 1.5 * (1 + r) ** -2)
    assert np.all(np.isneginf(cert.DecayEnvelope(0.0).log_value(r)))
    with pytest.raises(ValueError):
        cert.DecayEnvelope(1.0, kind="box")


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-12, 12), y=st.floats(-12, 12), role=st.sampled_from(["frame", "atoms"]))
def test_fitted_envelope_dominates(x, y, role):
    proto = Prototype("annular-hermite-gauss", 2, 6)
    tp = cert.theorem_params(1, 1, 1, 1, 1, 2)
    log_bound = cert.bound_function(proto, role, tp)
    env = cert.fit_envelope(log_bound, "annular", 2, 1.0, cert.natural_vanishing(proto, tp), 12.0)
    pt = np.array([[x, y]])
    assert log_bound(pt)[0] <= env.log_value(np.linalg.norm(pt, axis=1))[0] + 1e-9


def test_bound_function_needs_analytic_prototype():
    tp = cert.theorem_params(1, 1, 1, 1, 1, 1)
    user = Prototype("user-sampled", 1, role="annular", radii=(0.0, 1.0), profile=(0.0, 1.0))
    with pytest.raises(PrototypeKindMismatch):
        cert.bound_function(user, "frame", tp)


@pytest.mark.parametrize("row,col", [(0, 3), (3, 0), (0, 0), (2, -5)])
def test_homogeneous_entries_against_scipy(row, col):
    m = scalar2()
    cell = BaseCell("box-minus-box", 0.25, 1.0)
    env = cert.DecayEnvelope(1.0, 3, 4)
    f = lambda x: min(1, abs(x) ** 3) * (1 + abs(x)) ** -4
    k = col - row
    avg = 2 * integrate.quad(lambda x: f(2.0**k * x), 0.25, 1, limit=200, epsabs=0, epsrel=1e-12)[0] / 1.5
    tau, sigma, a = 0.5, 2.0, 2.0
    oracle = a ** (tau * (row - col)) * (1 + 2.0**k) ** sigma * avg**tau
    assert cert.mmn_homogeneous(m, env, a, tau, sigma, cell, row, col) == pytest.approx(oracle, rel=1e-8)


def test_inhomogeneous_entry_cases():
    m = scalar2()
    low, ann = cert.DecayEnvelope(1.0, K=3, kind="lowpass"), cert.DecayEnvelope(1.0, 2, 3)
    cell, low_cell = BaseCell("box-minus-box", 0.25, 1.0), BaseCell("centered-box", 0.0, 1.0)
    mm = cert.InhomogeneousInteraction(m, low, ann, math.log(2.0), 1.0, 1.0, low_cell, cell)
    # low-low: 2^sigma times the average of the low-pass envelope over [-1, 1]
    avg = integrate.quad(lambda x: (1 + x) ** -3, 0, 1)[0]
    assert mm(0, 0) == pytest.approx(2.0 * avg, rel=1e-8)
    # ann-low at m = 2 uses A^(1 - m) on the low-pass cell and the annular envelope
    g = lambda x: min(1, abs(x / 2) ** 2) * (1 + abs(x / 2)) ** -3
    avg = integrate.quad(g, 0, 1, epsrel=1e-12)[0]
    assert mm(2, 0) == pytest.approx(2.0**2 * (1 + 0.5) * avg, rel=1e-8)
    with pytest.raises(ValueError):
        mm(-1, 0)


class Geometric:
    kind = "homogeneous"

    def __init__(self, rate):
        self.rate = rate

    def log_value(self, m, n):
        return -self.rate * abs(m - n)


def test_sup_sums_convergent_closed_form():
    res = cert.truncated_sup_sums(Geometric(math.log(2.0)), 64)
    assert res.status == "convergent"
    assert res.rows == pytest.approx(1 + 2 * (1 - 2.0**-64), rel=1e-12)
    assert res.tail_rows == pytest.approx(2 * 2.0**-64 / res.rows, rel=1e-9)


def test_sup_sums_divergent():
    res = cert.truncated_sup_sums(Geometric(0.0), 64)
    assert res.status == "divergent"
    assert res.growth == pytest.approx(129 / 65)


def test_sup_sums_inconclusive():
    class Power(Geometric):
        def log_value(self, m, n):
            return -2.0 * math.log1p(abs(m - n))

    with pytest.raises(Inconclusive) as info:
        cert.truncated_sup_sums(Power(0.0), 64)
    assert info.value.result.status == "inconclusive"
    with pytest.raises(ValueError):
        cert.truncated_sup_sums(Geometric(1.0), 4)


def test_analytic_bound_requires_thresholds():
    m = with_margins(scalar2(), 1.9, 2.1)
    env = cert.DecayEnvelope(1.0, L=1.0, N=5.0)
    with pytest.raises(ThresholdViolated):
        cert.analytic_bound_homo(m, env, 2.0, 1.0, 2.0, 0.25, 1.0)  # a / lambda_-^L > 1
    assert cert.analytic_bound_homo(m, cert.DecayEnvelope(1.0, 2.0, 5.0), 2.0, 1.0, 2.0, 0.25, 1.0) > 0


def test_delta0_formulas():
    assert cert.delta0("frame", 1.0, 1.0, (1.0, 1.0), 1.0) == 0.2
    assert cert.delta0("atoms", 2.0, 1.0, (1.0, 1.0), 1.0) == 0.25
    assert cert.delta0("atoms", 0.1, 1.0, (1.0, 1.0), 1.0) == 1.0
    assert cert.delta0("frame", 1.0, 2.0, (1.0, 0.0), 0.5) == pytest.approx(1 / 17)
    for bad in ((0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0)):
        with pytest.raises(NonPositiveConstant):
            cert.delta0("frame", bad[0], bad[1], (1.0, 1.0), bad[2])


def test_setup_validation():
    m = scalar2()
    tp = cert.theorem_params(2, 2, 1, 1, 0.5, 1)
    ann = Prototype("annular-hermite-gauss", 1, 6)
    with pytest.raises(PrototypeKindMismatch):
        cert.CertSetup("inhomo-frame", m, 0.0, tp, ann)
    with pytest.raises(PrototypeKindMismatch):
        cert.CertSetup("homo-frame", m, 0.0, tp, Prototype("gauss-lowpass", 1))
    with pytest.raises(ValueError):
        cert.CertSetup("homo-frame", m, 0.0, cert.theorem_params(2, 2, 1, 1, 0.5, 2), ann)


@pytest.mark.parametrize("case", cert.CASES)
def test_certify_passes_for_smooth_prototype(case):
    m = scalar2()
    tp = cert.theorem_params(2, 2, 1, 1, 0.5, 1)
    low = Prototype("gauss-lowpass", 1) if case.startswith("inhomo") else None
    rep = cert.certify(cert.CertSetup(case, m, 1.0, tp, Prototype("annular-hermite-gauss", 1, 6), low), T=32)
    assert rep.verdict == "PASS", rep.failures
    assert rep.delta0["value"] is not None and 0 < rep.delta0["value"] <= 1
    json.dumps(rep.to_dict())
    assert rep.to_text().startswith(f"case {case}")


def test_certify_fails_below_vanishing_threshold():
    m = scalar2()
    tp = cert.theorem_params(2, 2, 1, 1, 0.5, 1)
    setup = cert.CertSetup("homo-frame", m, 2.0, tp, Prototype("annular-hermite-gauss", 1, 6), L_cap=0.0)
    rep = cert.certify(setup, T=32)
    assert rep.verdict == "FAIL"
    assert any("vanishing" in f for f in rep.failures)


def test_reduction_pairs_hold():
    m = validate_expansive([[2.0, 0.0], [0.0, 3.0]])
    tp = cert.theorem_params(1, 1, 1, 1, 1, 2)
    setup = cert.CertSetup("homo-atoms", m, 0.0, tp, Prototype("annular-hermite-gauss", 2, 6))
    res = cert.nij_reduction(setup, 1, -2)
    assert res["ok"] and (res["m"], res["n"]) == (-1, 2)
    assert res["direct"] <= res["reduced"] * 1.01


def test_json_ready():
    out = cert.json_ready({"a": (1.0, math.inf), 2: np.float64(-math.inf), "n": np.int64(3), "x": math.nan})
    assert out == {"a": [1.0, "inf"], "2": "-inf", "n": 3, "x": "nan"}
