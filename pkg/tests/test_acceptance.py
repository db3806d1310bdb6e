"""Acceptance suite: one test and one printed PASS/FAIL line per criterion."""

import json
import math
import time

import numpy as np
import pytest

from oracles import direct_coefficient, large_coefficient_pairs, packet_signal

from anisoframe import certify as cert
from anisoframe import cli
from anisoframe.cover import (
    build_homogeneous, build_inhomogeneous, covering_check, default_base_cell, default_low_cell,
    intersection_table, neighbor_gap, probe_points,
)
from anisoframe.dilation import validate_expansive, with_margins
from anisoframe.errors import Inconclusive, ThresholdViolated
from anisoframe.partition import WeightSequence, build_partition, weight
from anisoframe.prototypes import Prototype
from anisoframe.signals import SampledSignal, band_piece, band_weights
from anisoframe.system import (
    analysis, empirical_frame_bounds, make_system, random_band_signal, roundtrip_error,
)

MATS = {"A=2": [[2.0]], "diag(2,3)": [[2.0, 0.0], [0.0, 3.0]], "[[0,2],[1,0]]": [[0.0, 2.0], [1.0, 0.0]]}
# matrices whose eigenvalues share one modulus, so lambda_- and lambda_+ can both be tight
EQUAL_MODULI = ("A=2", "[[0,2],[1,0]]")


def mat(name):
    return validate_expansive(np.array(MATS[name]))


def hg(dim, order=6):
    return Prototype("annular-hermite-gauss", dim, order)


def test_01_partition_of_unity(acceptance):
    t0 = time.perf_counter()
    worst, lo, hi, count = 0.0, 1.0, 0.0, 0
    for name in MATS:
        m = mat(name)
        grid = 10_000 if m.dim == 1 else 100
        for c in (build_homogeneous(m, index_range=(-4, 4)), build_inhomogeneous(m, index_range=(0, 8))):
            p = build_partition(c, grid)
            pts = probe_points(m.dim, covering_check(c, grid)["region"], grid)
            phis = p.all(pts)
            worst = max(worst, float(np.max(np.abs(phis.sum(axis=0) - 1.0))))
            lo, hi, count = min(lo, phis.min()), max(hi, phis.max()), max(count, len(pts))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and lo >= 0.0 and hi <= 1.0 and elapsed < 10.0
    assert acceptance(1, ok, f"sup|sum phi - 1| = {worst:.2e} (< 1e-10), phi in [{lo:.3g}, {hi:.3g}], "
                             f"up to {count} probes per cover, {elapsed:.1f}s (< 10s)")


def test_02_moderateness(acceptance):
    worst_ratio, violations, pairs = 0.0, 0, 0
    for name in MATS:
        m = mat(name)
        c = build_homogeneous(m, index_range=(-6, 6))
        gap = neighbor_gap(c)
        table = intersection_table(c)
        for s in range(-2, 3):
            w = WeightSequence("homogeneous", s, m.abs_det)
            C = m.abs_det ** (abs(s) * gap)
            for (i, j), hit in table.items():
                if not hit:
                    continue
                pairs += 1
                exact = m.abs_det ** (s * (i - j))
                worst_ratio = max(worst_ratio, abs(weight(w, i) / weight(w, j) / exact - 1.0))
                violations += not weight(w, i) <= C * weight(w, j)
    ok = worst_ratio < 1e-12 and violations == 0
    assert acceptance(2, ok, f"max relative ratio error {worst_ratio:.1e} (< 1e-12), "
                             f"{violations} bound violations over {pairs} intersecting pairs, s in -2..2")


def _band_signals(p, n, dim, count, rng, drop_dc):
    wts = band_weights(SampledSignal(np.zeros((n,) * dim), 1.0), p)
    full = np.abs(wts.sum(axis=0) - 1.0) < 1e-12
    if drop_dc:
        full.flat[0] = False
    worst = 0.0
    for _ in range(count):
        spec = (rng.standard_normal(full.shape) + 1j * rng.standard_normal(full.shape)) * full
        g = SampledSignal(np.fft.ifftn(spec), 1.0)
        total = sum(band_piece(g, p, i, _weights=wts).values for i in p.cover.indices)
        worst = max(worst, float(np.linalg.norm(total - g.values) / np.linalg.norm(g.values)))
    return worst, float(full.mean())


def test_03_band_reconstruction(acceptance):
    rng = np.random.default_rng(3)
    m1, m2 = mat("A=2"), mat("diag(2,3)")
    e1, f1 = _band_signals(build_partition(build_homogeneous(m1, index_range=(-2, 11))), 1024, 1, 20, rng, True)
    e2, f2 = _band_signals(build_partition(build_homogeneous(m2, index_range=(-2, 7))), 256, 2, 20, rng, True)
    ok = max(e1, e2) < 1e-8
    assert acceptance(3, ok, f"relative L2 error d=1 {e1:.1e} ({f1:.0%} of bins), d=2 {e2:.1e} "
                             f"({f2:.0%} of bins) over 20 signals each (< 1e-8)")


def _interaction(kind, m, tp, th, dL, dN, dK):
    ann = cert.DecayEnvelope(1.0, th.L + dL, th.N + dN)
    if kind == "homo":
        return cert.HomogeneousInteraction(m, ann, th.log_a, tp.tau, th.sigma, default_base_cell(m)), ann, None
    low = cert.DecayEnvelope(1.0, K=th.K + dK, kind="lowpass")
    return (cert.InhomogeneousInteraction(m, low, ann, th.log_a, tp.tau, th.sigma, default_low_cell(),
                                          default_base_cell(m)), ann, low)


def _sums(mm):
    try:
        return cert.truncated_sup_sums(mm, 64, threads=4)
    except Inconclusive as exc:
        return exc.result


def test_04_summability(acceptance):
    t0 = time.perf_counter()
    above_ok, below_ok, n_above, n_below, notes = True, True, 0, 0, []
    for name in MATS:
        m0 = mat(name)
        m = with_margins(m0, 0.995 * m0.min_modulus, 1.005 * m0.max_modulus)
        tp = cert.theorem_params(1, 1, 1, 1, 1, m.dim)
        cell, low = default_base_cell(m), default_low_cell()
        r, R = cell.euclidean_radii(m.dim)
        R0 = low.euclidean_radii(m.dim)[1]
        for case, s in (("homo-frame", 1), ("homo-atoms", -1), ("inhomo-frame", 1), ("inhomo-atoms", 1)):
            kind = case.split("-")[0]
            th = cert.thresholds(case, m, s, tp)
            mm, ann, lowenv = _interaction(kind, m, tp, th, 0.5, 0.5, 0.5)
            ss = _sums(mm)
            if kind == "homo":
                b = cert.analytic_bound_homo(m, ann, th.a, tp.tau, th.sigma, r, R)
                bounds = (b, b)
            else:
                bd = cert.analytic_bounds_inhomo(m, lowenv, ann, th.a, tp.tau, th.sigma, r, R, R0)
                bounds = (bd["rows"], bd["columns"])
            good = (ss.status == "convergent" and max(ss.tail_rows, ss.tail_columns) < 1e-6
                    and ss.rows <= bounds[0] and ss.columns <= bounds[1])
            above_ok &= good
            n_above += 1
            if not good:
                notes.append(f"{name} {case} above: {ss.status}")
            probes = [(-0.1, 0.5, 0.5)]
            if name in EQUAL_MODULI:
                probes.append((0.5, -0.1, 0.5))
                if kind == "inhomo":
                    probes.append((0.5, 0.5, -0.1))
            for probe in probes:
                ss = _sums(_interaction(kind, m, tp, th, *probe)[0])
                n_below += 1
                if ss.status != "divergent":
                    below_ok = False
                    notes.append(f"{name} {case} probe {probe}: {ss.status}")
    elapsed = time.perf_counter() - t0
    ok = above_ok and below_ok and elapsed < 60.0
    detail = (f"{n_above} sets 0.5 above threshold convergent within bounds: {above_ok}; "
              f"{n_below} probes 0.1 below divergent: {below_ok}; {elapsed:.1f}s (< 60s)")
    assert acceptance(4, ok, detail + ("; " + "; ".join(notes) if notes else ""))


def test_04b_decay_side_probe_is_not_sharp_for_unequal_moduli():
    # with eigenvalue moduli 2 and 3 the decay threshold uses lambda_+ = 3 while
    # the sums decay at the slower rate; 0.1 under the threshold still converges
    m0 = mat("diag(2,3)")
    m = with_margins(m0, 0.995 * m0.min_modulus, 1.005 * m0.max_modulus)
    tp = cert.theorem_params(1, 1, 1, 1, 1, 2)
    th = cert.thresholds("homo-frame", m, 1, tp)
    assert _sums(_interaction("homo", m, tp, th, 0.5, -0.1, 0.5)[0]).status == "convergent"


def test_05_reduction_soundness(acceptance):
    t0 = time.perf_counter()
    worst, total, bad = math.inf, 0, []
    for name in MATS:
        m = mat(name)
        tp = cert.theorem_params(1, 1, 1, 1, 1, m.dim)
        for case in ("homo-frame", "homo-atoms"):
            for s in (-1, 1):
                rc = cert.ReductionCheck(cert.CertSetup(case, m, s, tp, hg(m.dim)))
                for i in range(-5, 6):
                    for j in range(-5, 6):
                        res = rc.pair(i, j)
                        total += 1
                        worst = min(worst, res["log_margin"])
                        if not res["ok"]:
                            bad.append((name, case, s, i, j))
    elapsed = time.perf_counter() - t0
    ok = not bad
    assert acceptance(5, ok, f"{total - len(bad)}/{total} direct entries <= 2^d reduced bound (1% tolerance), "
                             f"smallest margin factor {math.exp(worst):.3g}, {elapsed:.1f}s")


def test_06_analysis_consistency(acceptance):
    rng = np.random.default_rng(6)
    worst, count = 0.0, 0
    for name, n in (("A=2", 1024), ("diag(2,3)", 256), ("[[0,2],[1,0]]", 256)):
        m = mat(name)
        sys = make_system("homogeneous", m, hg(m.dim, 2), 0.5, (-3, 4))
        func, f, band = packet_signal(m.dim, n, 16.0, rng)
        c = analysis(sys, f)
        for i, k, v in large_coefficient_pairs(c, rng, 50):
            direct = direct_coefficient(sys, i, k, func, band, 16.0)
            worst = max(worst, abs(direct - v) / abs(direct))
            count += 1
    ok = worst < 1e-6
    assert acceptance(6, ok, f"max relative error {worst:.1e} (< 1e-6) over {count} (i, k) pairs, "
                             f"50 per matrix, against direct quadrature")


def test_07_shift_covariance(acceptance):
    rng = np.random.default_rng(7)
    worst, shared_total = 0.0, 0
    for name, n in (("A=2", 1024), ("diag(2,3)", 128), ("[[0,2],[1,0]]", 128)):
        m = mat(name)
        sys = make_system("homogeneous", m, hg(m.dim, 2), 0.5, (-2, 2))
        f = random_band_signal(sys, n, 16.0, rng)
        for i0 in sys.scales:
            k0 = np.arange(1, m.dim + 1) * 2
            x0 = sys.generator(i0) @ k0
            phase = np.exp(-2j * np.pi * (f.frequencies() @ x0)).reshape(f.values.shape)
            shifted = SampledSignal(np.fft.ifftn(np.fft.fftn(f.values) * phase), f.period)
            before, after = analysis(sys, f, [i0]).lookup(i0), analysis(sys, shifted, [i0]).lookup(i0)
            top = max(abs(v) for v in before.values())
            for k, v in after.items():
                src = tuple(int(a - b) for a, b in zip(k, k0))
                if src in before:
                    worst = max(worst, abs(v - before[src]) / top)
                    shared_total += 1
    ok = worst < 1e-12
    assert acceptance(7, ok, f"max |c(f shifted)_k - c(f)_(k-k0)| / max|c| = {worst:.1e} (< 1e-12) "
                             f"on {shared_total} shared lattice points")


def test_08_frame_proxy(acceptance):
    t0 = time.perf_counter()
    m = mat("A=2")
    rng = np.random.default_rng(8)
    rows = []
    for delta in (0.5, 0.25, 0.125):
        sys = make_system("homogeneous", m, hg(1, 2), delta, (-4, 5), parseval=True)
        lo, hi = empirical_frame_bounds(sys, 20, 1024, 16.0, seed=8)
        err = roundtrip_error(sys, random_band_signal(sys, 1024, 16.0, rng))
        rows.append((delta, lo, hi, hi / lo, err))
    ratios = [r[3] for r in rows]
    monotone = all(b <= a * 1.05 for a, b in zip(ratios, ratios[1:]))
    d8 = rows[-1]
    elapsed = time.perf_counter() - t0
    ok = d8[3] <= 1.2 and monotone and d8[4] < 0.05 and 0.9 <= d8[1] and d8[2] <= 1.1 and elapsed < 120
    table = ", ".join(f"delta={r[0]}: B/A={r[3]:.4f} err={r[4]:.3g}" for r in rows)
    assert acceptance(8, ok, f"{table}; at 1/8 A={d8[1]:.4f} B={d8[2]:.4f}; ratio non-increasing: {monotone}; "
                             f"{elapsed:.1f}s (< 120s)")


def test_09_delta0(acceptance):
    vals = (cert.delta0("frame", 1.0, 1.0, (1.0, 1.0), 1.0), cert.delta0("atoms", 2.0, 1.0, (1.0, 1.0), 1.0),
            cert.delta0("atoms", 0.1, 1.0, (1.0, 1.0), 1.0))
    ok = vals == (0.2, 0.25, 1.0)
    assert acceptance(9, ok, f"frame {vals[0]!r} (1/5), atoms {vals[1]!r} (1/4), atoms clamp {vals[2]!r} (1)")


def test_10_determinism(acceptance, tmp_path):
    from importlib import resources
    data = resources.files("anisoframe") / "data"
    same = {}
    for command, cfg in (("certify", "homo_certify.json"), ("roundtrip", "roundtrip.json")):
        outs = []
        for run in range(2):
            out = tmp_path / f"{command}{run}"
            code = cli.main([command, "--config", str(data / cfg), "--out", str(out)])
            assert code == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same[command] = outs[0] == outs[1] and bool(outs[0])
    report = json.loads((tmp_path / "certify0" / "certify_report.json").read_text())
    ok = all(same.values())
    assert acceptance(10, ok, f"byte-identical repeated reports: certify {same['certify']}, "
                              f"roundtrip {same['roundtrip']} (certify verdict {report['result']['verdict']})")


def test_threshold_violation_is_reported_by_the_closed_form():
    m = with_margins(mat("A=2"), 1.99, 2.01)
    tp = cert.theorem_params(1, 1, 1, 1, 1, 1)
    th = cert.thresholds("homo-frame", m, 1, tp)
    with pytest.raises(ThresholdViolated):
        cert.analytic_bound_homo(m, cert.DecayEnvelope(1.0, th.L - 0.1, th.N + 0.5), th.a, 1, th.sigma, 0.25, 1)
