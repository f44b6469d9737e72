"""Acceptance suite, one test per criterion.

Each test records a PASS/FAIL line with the measured quantity next to its
tolerance; the lines are printed in the terminal summary.  Criterion 8 runs
the full 32^3 Maxwell sweep and takes about half an hour on one core.

    pytest tests/test_acceptance.py -v
"""

import math
import sys
import time

import numpy as np
import pytest

from cgolab import bounds
from cgolab.cgo_scalar import cdot, cgo_remainder, faddeev_solve, zeta_pair_schrodinger
from cgolab.cli import load_config, read_csv, run
from cgolab.maxwell_cgo import amplitude, cgo_Ystar, cgo_Z, zeta_pair_maxwell
from cgolab.maxwell_recon import eps_power, pairing_maxwell, reconstruct_sigma_mode, stability_sweep_maxwell
from cgolab.maxwell_reduce import band_limited_field, derive_medium, verify_factorization
from cgolab.schro_recon import assemble_q, reconstruct_mode, truth_spectrum
from cgolab.spectral_field import (
    GridSpec,
    ScalarField,
    SpectrumField,
    bump_with_norm,
    forward,
    lattice_modes,
    mode_index,
    sobolev_norm,
    synth_bump,
)

from test_cgo_scalar import dense_faddeev
from test_cli import CONFIGS, small

S = 2.0


def record(log, number, ok, text):
    log.append((number, bool(ok), text))
    return ok


def maxwell_sigmas(grid):
    return (bump_with_norm(grid, [0.1, 0, 0], 0.6, 0.1, 2 * S + 2),
            bump_with_norm(grid, [-0.1, 0.1, 0], 0.5, 0.08, 2 * S + 2))


def slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def test_criterion_01_zeta_algebra(acceptance_log):
    rng = np.random.default_rng(2024)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(1000):
        xi = rng.normal(size=3) * 4
        om = rng.uniform(1.1, 20)
        R = np.linalg.norm(xi) + rng.uniform(0.5, 10)
        scale = R * R + om * om
        ps, pm = zeta_pair_schrodinger(xi, om, R), zeta_pair_maxwell(xi, om, R)
        errs = [abs(np.sum(ps.zeta1 + ps.zeta2 + xi)), abs(np.sum(pm.zeta1 - pm.zeta2.conj() + xi)),
                abs(cdot(pm.b2.conj(), pm.b1))]
        for z in (ps.zeta1, ps.zeta2, pm.zeta1, pm.zeta2):
            errs += [abs(cdot(z, z) - om * om) / scale, abs(np.sum(np.abs(z) ** 2) - scale) / scale]
        for z, b in ((pm.zeta1, pm.b1), (pm.zeta2, pm.b2)):
            zb = cdot(z, b)
            assert zb.real > 0
            errs.append(abs(zb.imag) / abs(zb))
        worst = max(worst, max(errs))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    record(acceptance_log, 1, ok, f"zeta relations worst {worst:.2e} (tol 1e-12), {elapsed:.2f} s (limit 1 s)")
    assert worst <= 1e-12
    assert elapsed < 1.0


def test_criterion_02_faddeev_oracle(acceptance_log):
    g = GridSpec(8)
    rng = np.random.default_rng(7)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(20):
        xi = rng.normal(size=3) * 2
        zeta = zeta_pair_schrodinger(xi, rng.uniform(1.5, 6), np.linalg.norm(xi) + rng.uniform(0.5, 6)).zeta1
        rhs = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
        sol = faddeev_solve(zeta, ScalarField(g, rhs))
        want = np.linalg.solve(dense_faddeev(zeta, g, sol.theta), rhs.ravel()).reshape(g.shape)
        worst = max(worst, np.linalg.norm(sol.samples - want) / np.linalg.norm(want))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 30
    record(acceptance_log, 2, ok, f"Faddeev vs dense relative error {worst:.2e} (tol 1e-10), {elapsed:.1f} s")
    assert worst <= 1e-10
    assert elapsed < 30


def test_criterion_03_cgo_decay(acceptance_log):
    g = GridSpec(32)
    sizes = [8.0, 16.0, 32.0, 64.0]
    t0 = time.perf_counter()
    q = ScalarField(g, synth_bump(g, [0, 0, 0], 0.9, 0.5).samples)
    scalar = []
    for z in sizes:
        om = z / math.sqrt(2)
        sol = cgo_remainder(q, zeta_pair_schrodinger([0.0, 0, 0], om, om).zeta1, s=S)
        psi = sol.psi
        scalar.append(sobolev_norm(SpectrumField(g, forward(psi.samples, g, psi.theta), psi.theta), 2 * S))
    # vector remainder at a fixed frequency, |zeta| grown through R
    om = 2.0
    med = derive_medium(bump_with_norm(g, [0, 0, 0], 0.9, 0.1, 2 * S + 2), om)
    vector = []
    for z in sizes:
        pair = zeta_pair_maxwell(np.zeros(3), om, math.sqrt(z * z - om * om))
        Z = cgo_Z(med, pair.zeta1, amplitude(pair.zeta1, np.zeros(3), pair.b1, "A", om), S)
        vector.append(Z.remainder_norm_2s)
    elapsed = time.perf_counter() - t0
    k_s, k_v = slope(sizes, scalar), slope(sizes, vector)
    ok = k_s <= -0.9 and k_v <= -0.9 and elapsed < 300
    record(acceptance_log, 3, ok, f"H^{2 * S:g} decay slope scalar {k_s:.3f}, vector {k_v:.3f} (need <= -0.9), "
                                  f"{elapsed:.0f} s")
    assert k_s <= -0.9
    assert k_v <= -0.9
    assert elapsed < 300


def test_criterion_04_factorization(acceptance_log):
    t0 = time.perf_counter()
    res = {}
    for n in (16, 32):
        g = GridSpec(n)
        med = derive_medium(bump_with_norm(g, [0.1, 0, 0], 0.8, 0.1, 2 * S + 2), 8.0)
        assert med.norm_2s2 <= 0.1 * (1 + 1e-12)
        Y = band_limited_field(g, np.random.default_rng(0))
        res[n] = [verify_factorization(med, i, Y) for i in (1, 2, 3)]
    elapsed = time.perf_counter() - t0
    gain = min(a / b for a, b in zip(res[16], res[32]))
    worst = max(res[32])
    ok = worst <= 1e-6 and gain >= 4 and elapsed < 300
    record(acceptance_log, 4, ok, f"factorization residual {worst:.2e} on 32^3 (tol 1e-6), "
                                  f"16->32 gain {gain:.1f}x (need 4x)")
    assert worst <= 1e-6
    assert gain >= 4
    assert elapsed < 300


def test_criterion_05_pairing_consistency(acceptance_log):
    g = GridSpec(32)
    om = 8.0
    t0 = time.perf_counter()
    s1, s2 = maxwell_sigmas(g)
    m1, m2 = derive_medium(s1, om), derive_medium(s2, om)
    worst = 0.0
    for xi in ([1, 0, 1], [2, -1, 0]):
        pair = zeta_pair_maxwell(np.array(xi) * g.dk, om, 5.0)
        Z = cgo_Z(m1, pair.zeta1, amplitude(pair.zeta1, np.zeros(3), pair.b1, "A", om))
        Ys = cgo_Ystar(m2, pair.zeta2, pair.b2)
        worst = max(worst, pairing_maxwell(m1, m2, Z, Ys).discrepancy)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 120
    record(acceptance_log, 5, ok, f"volume vs commutator pairing {worst:.2e} relative (tol 1e-8), {elapsed:.0f} s")
    assert worst <= 1e-8
    assert elapsed < 120


def test_criterion_06_exact_mode_recovery(acceptance_log):
    g = GridSpec(32)
    om = 4.0
    t0 = time.perf_counter()
    sig1 = synth_bump(g, [0.1, 0, 0], 0.6, 0.05)
    sig2 = synth_bump(g, [-0.1, 0.1, 0], 0.5, 0.03)
    c1 = synth_bump(g, [0, 0, 0.1], 0.7, 0.2)
    p1 = assemble_q(sig1, c1, om)
    p2 = assemble_q(sig2, ScalarField(g, np.zeros(g.shape)), om)
    qt = truth_spectrum(p1, p2)
    s1, s2 = maxwell_sigmas(g)
    m1, m2 = derive_medium(s1, om), derive_medium(s2, om)
    st = forward(m2.sigma.samples - m1.sigma.samples, g)
    worst_q = worst_s = 0.0
    for m in lattice_modes(g, 2 * g.dk):
        xi = m * g.dk
        want = qt.coeffs[mode_index(g, xi)]
        got = reconstruct_mode(p1, p2, xi, om, 0.0, 1.0, force_zero_remainder=True).noisy_value / g.volume
        worst_q = max(worst_q, abs(got - want) / abs(want))
        want = st[tuple(m % g.n)]
        got = reconstruct_sigma_mode(m1, m2, xi, om, 0.0, 2.0, force_zero_remainder=True).sigma_hat_est / g.volume
        worst_s = max(worst_s, abs(got - want) / abs(want))
    elapsed = time.perf_counter() - t0
    ok = max(worst_q, worst_s) <= 1e-10 and elapsed < 60
    record(acceptance_log, 6, ok, f"exact recovery scalar {worst_q:.1e}, Maxwell {worst_s:.1e} (tol 1e-10), "
                                  f"{elapsed:.0f} s")
    assert worst_q <= 1e-10
    assert worst_s <= 1e-10
    assert elapsed < 60


def test_criterion_07_scalar_stability(acceptance_log, tmp_path):
    cfg = load_config(CONFIGS / "schrodinger.yaml")
    cfg["output"].pop("plot")
    t0 = time.perf_counter()
    rows = read_csv(run(cfg, tmp_path).csv_path)
    elapsed = time.perf_counter() - t0
    err = {float(r["omega"]): float(r["err_minus_s"]) for r in rows}
    ratio = err[16.0] / err[2.0]
    C = float(rows[0]["fitted_C"])
    covered = all(float(r["err_minus_s"]) <= C * float(r["bound_value"]) * (1 + 1e-12) for r in rows)
    ok = ratio <= 0.5 and covered and elapsed < 1200
    record(acceptance_log, 7, ok, f"scalar err(16)/err(2) = {ratio:.3f} (need <= 0.5), "
                                  f"all below fitted_C x bound: {covered}, {elapsed:.0f} s")
    assert ratio <= 0.5
    assert covered
    assert elapsed < 1200


@pytest.mark.slow
def test_criterion_08_maxwell_stability(acceptance_log):
    g = GridSpec(32)
    eps0, omegas = 1e-8, [2.0, 4.0, 8.0, 16.0]
    s1, s2 = maxwell_sigmas(g)

    def media_of(w):
        return derive_medium(s1, w, S), derive_medium(s2, w, S)

    cache = {}
    t0 = time.perf_counter()
    curve = stability_sweep_maxwell(media_of, omegas, [eps0], S, cache=cache)
    scan = stability_sweep_maxwell(media_of, [8.0], [1e-6, 1e-8, 1e-10], S, cache=cache)
    elapsed = time.perf_counter() - t0
    w_opt = bounds.maxwell_optimal_omega(eps0, S)
    pre = sorted((r.omega, r.err_minus_s) for r in curve.rows if r.omega < w_opt)
    errs = [e for _, e in pre]
    decreasing = len(errs) >= 2 and all(b < a for a, b in zip(errs, errs[1:]))
    pts = sorted((r.epsilon, r.err_minus_s) for r in scan.rows)
    power = eps_power([p[0] for p in pts], [p[1] for p in pts])
    ok = decreasing and abs(power - 0.5) <= 0.15 and elapsed < 3600
    shown = ", ".join(f"{w:g}:{e:.2e}" for w, e in pre)
    record(acceptance_log, 8, ok, f"Maxwell errors below omega*={w_opt:.1f} [{shown}] decreasing: {decreasing}; "
                                  f"eps power {power:.3f} (need 0.5 +- 0.15), {elapsed / 60:.0f} min")
    assert abs(power - 0.5) <= 0.15
    assert elapsed < 3600
    assert decreasing


def test_criterion_09_optimal_frequency(acceptance_log):
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        eps = 10 ** rng.uniform(-10, -2)
        s = rng.uniform(2.6, 6.0)
        opt = bounds.optimal_frequency(eps, s)
        g = bounds.golden_minimum(eps, s, 10 * max(opt.t_star, 1.0))
        if opt.case == "b":
            worst = max(worst, abs(g - opt.t_star) / opt.t_star)
        else:
            # the unconstrained minimizer lies left of t = 1, so the constrained one is t = 1
            assert g <= 1.0 + 1e-6
    holds = True
    for s in (3.0, 4.0, 5.0):
        C, theta = bounds.holder_constant(s), bounds.holder_exponent(s)
        for k in range(2, 11):
            eps = 10.0**-k
            holds &= bounds.optimal_frequency(eps, s).F_min <= C * eps**theta
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and holds and elapsed < 1
    record(acceptance_log, 9, ok, f"t* vs golden section {worst:.1e} relative (tol 1e-6), "
                                  f"Holder bound holds: {holds}, {elapsed:.2f} s")
    assert worst <= 1e-6
    assert holds
    assert elapsed < 1


def test_criterion_10_determinism(acceptance_log, tmp_path):
    cfgs = [small("schrodinger"), small("maxwell"), small("reduce_verify", grid={"n": 16}),
            load_config(CONFIGS / "bounds_table.toml")]
    same = []
    for i, cfg in enumerate(cfgs):
        a = run(cfg, tmp_path / f"{i}a").csv_path.read_bytes()
        b = run(cfg, tmp_path / f"{i}b").csv_path.read_bytes()
        same.append(a == b)
    record(acceptance_log, 10, all(same), f"byte-identical CSV on re-run for {sum(same)}/{len(same)} problems")
    assert all(same)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
