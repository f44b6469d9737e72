import math

import numpy as np
import pytest

from cgolab import bounds
from cgolab.errors import PreconditionError
from cgolab.maxwell_cgo import amplitude, cgo_Ystar, cgo_Z, zeta_pair_maxwell
from cgolab.maxwell_recon import (
    MaxwellCurve,
    eps_power,
    half_space,
    leading_coefficient,
    pairing_maxwell,
    pairing_volume,
    q_difference,
    reconstruct_sigma,
    reconstruct_sigma_mode,
    stability_sweep_maxwell,
)
from cgolab.maxwell_reduce import assemble_Q, derive_medium
from cgolab.schro_recon import RANDOM
from cgolab.spectral_field import GridSpec, ScalarField, bump_with_norm, forward, lattice_modes, synth_bump


def media(grid, omega=4.0, scale=1.0):
    s1 = bump_with_norm(grid, [0.1, 0, 0], 0.6, 0.1, 6).samples.real
    s2 = bump_with_norm(grid, [-0.1, 0.1, 0], 0.5, 0.08, 6).samples.real
    return (derive_medium(ScalarField(grid, scale * s1), omega),
            derive_medium(ScalarField(grid, scale * s2), omega))


def solutions(m1, m2, xi, R):
    om = m1.omega
    pair = zeta_pair_maxwell(xi, om, R)
    A = amplitude(pair.zeta1, np.zeros(3), pair.b1, "A", om)
    return pair, cgo_Z(m1, pair.zeta1, A), cgo_Ystar(m2, pair.zeta2, pair.b2)


class TestPairing:
    def test_identical_media_pair_to_zero(self):
        g = GridSpec(16)
        m1, _ = media(g)
        twin = derive_medium(m1.sigma, m1.omega)
        _, Z, Ys = solutions(m1, twin, np.array([1.0, 0, 0]) * g.dk, 3.0)
        assert pairing_volume(q_difference(m1, twin), Z, Ys) == 0

    def test_volume_against_dense_quadrature(self):
        g = GridSpec(16)
        m1, m2 = media(g, scale=1e6)
        pair, Z, Ys = solutions(m1, m2, np.array([1.0, -1.0, 0]) * g.dk, 4.0)
        dQ = assemble_Q(m1).entries - assemble_Q(m2).entries
        x = np.stack(np.broadcast_arrays(*g.coords()))
        e1 = np.exp(1j * np.einsum("i,i...->...", pair.zeta1, x))
        e2 = np.exp(1j * np.einsum("i,i...->...", pair.zeta2, x))
        G1 = Z.field.samples() * e1
        G2 = Ys.field.samples() * e2
        want = np.einsum("i...,ij...,j...->...", G2.conj(), dQ, G1).sum() * g.cell
        got = pairing_volume(q_difference(m1, m2), Z, Ys)
        assert abs(got - want) <= 1e-10 * abs(want)

    def test_commutator_form_is_close(self):
        g = GridSpec(16)
        m1, m2 = media(g, scale=1e6)
        _, Z, Ys = solutions(m1, m2, np.array([1.0, 0, 1.0]) * g.dk, 5.0)
        rep = pairing_maxwell(m1, m2, Z, Ys)
        assert abs(rep.volume) > 0
        assert rep.discrepancy < 1e-2

    def test_media_must_match(self):
        g = GridSpec(8)
        m1 = derive_medium(ScalarField(g, np.zeros(g.shape)), 2.0)
        m2 = derive_medium(ScalarField(g, np.zeros(g.shape)), 3.0)
        with pytest.raises(PreconditionError):
            q_difference(m1, m2)


class TestModeEstimator:
    def test_exact_recovery_without_remainders(self):
        g = GridSpec(16)
        for scale in (1.0, 1e6):
            m1, m2 = media(g, scale=scale)
            truth = forward(m2.sigma.samples - m1.sigma.samples, g)
            for m in lattice_modes(g, 3 * g.dk)[:10]:
                meas = reconstruct_sigma_mode(m1, m2, m * g.dk, 4.0, 0.0, 2.0, force_zero_remainder=True)
                want = truth[tuple(m % g.n)]
                assert abs(meas.sigma_hat_est / g.volume - want) <= 1e-10 * abs(want)

    def test_leading_coefficient(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            xi = rng.normal(size=3) * 2
            om = rng.uniform(1.5, 12)
            pair = zeta_pair_maxwell(xi, om, np.linalg.norm(xi) + rng.uniform(0.5, 6))
            c = leading_coefficient(pair, om)
            # (zeta1.b1)(conj(zeta2.b2)) is real and positive, leaving i omega times a positive factor
            assert abs(c.real) < 1e-12 * abs(c)
            assert c.imag > 0

    def test_noise_is_sharp(self):
        g = GridSpec(8)
        m1, m2 = media(g)
        xi = np.array([1.0, 0, 0]) * g.dk
        clean = reconstruct_sigma_mode(m1, m2, xi, 4.0, 0.0, 2.0)
        noisy = reconstruct_sigma_mode(m1, m2, xi, 4.0, 1e-3, 2.0)
        assert noisy.true_pairing == clean.true_pairing
        dev = abs(noisy.noisy_pairing - noisy.true_pairing)
        assert dev == pytest.approx(1e-3 * noisy.y1_norm1 * noisy.y2_norm1, rel=1e-12)


def test_half_space():
    g = GridSpec(8)
    modes = lattice_modes(g, 2.5 * g.dk)
    half = half_space(modes)
    present = {tuple(m) for m in modes}
    keyed = {tuple(m) for m in half}
    for m in modes:
        if tuple(-m) in present and np.any(m):
            assert (tuple(m) in keyed) != (tuple(-m) in keyed)
        else:
            assert tuple(m) in keyed
    interior = lattice_modes(g, 3 * g.dk)
    assert len(half_space(interior)) == (len(interior) + 1) // 2


class TestReconstruction:
    def test_hermitian_fill(self):
        g = GridSpec(8)
        m1, m2 = media(g, scale=1e6)
        r = reconstruct_sigma(m1, m2, 1e-2)
        c = r.sigma_tilde_est.coeffs
        modes = lattice_modes(g, r.T_used)
        present = {tuple(m) for m in modes}
        for m in modes:
            if tuple(-m) not in present or not np.any(m):
                continue
            assert c[tuple(-m % g.n)] == np.conj(c[tuple(m % g.n)])
        full = reconstruct_sigma(m1, m2, 1e-2, hermitian_fill=False)
        assert full.err_minus_s == pytest.approx(r.err_minus_s, rel=0.05)

    def test_deterministic_random_noise(self):
        g = GridSpec(8)
        m1, m2 = media(g)
        a = reconstruct_sigma(m1, m2, 1e-3, mode=RANDOM, seed=9)
        b = reconstruct_sigma(m1, m2, 1e-3, mode=RANDOM, seed=9)
        assert np.array_equal(a.sigma_tilde_est.coeffs, b.sigma_tilde_est.coeffs)

    def test_error_grows_with_eps(self):
        g = GridSpec(8)
        m1, m2 = media(g)
        errs = [reconstruct_sigma(m1, m2, e).err_minus_s for e in (1e-2, 1e-4)]
        assert errs[0] > errs[1]


def test_eps_power():
    eps = [1e-2, 1e-4, 1e-6]
    assert eps_power(eps, [math.sqrt(e) for e in eps]) == pytest.approx(0.5)
    assert math.isnan(eps_power([1e-2], [1.0]))


def test_sweep():
    g = GridSpec(8)
    sig1 = bump_with_norm(g, [0.1, 0, 0], 0.6, 0.1, 6)
    sig2 = bump_with_norm(g, [-0.1, 0.1, 0], 0.5, 0.08, 6)

    def media_of(w):
        return derive_medium(sig1, w), derive_medium(sig2, w)

    cache = {}
    curve = stability_sweep_maxwell(media_of, [2.0, 4.0], [1e-2, 1e-3], cache=cache)
    assert len(curve.rows) == 4 and len(cache) == 4
    for r in curve.rows:
        t = bounds.bound_maxwell(r.omega, r.epsilon, 2.0)
        assert (r.bound_term1, r.bound_term2, r.bound_term3) == t[:3]
        assert r.err_minus_s <= curve.fitted_C * t[3] * (1 + 1e-12)
    assert set(curve.eps_powers) == {2.0, 4.0}
    again = stability_sweep_maxwell(None, [2.0, 4.0], [1e-2, 1e-3], cache=cache)
    assert again.rows == curve.rows
    assert len(MaxwellCurve.COLUMNS) == 12
    with pytest.raises(PreconditionError):
        stability_sweep_maxwell(media_of, [], [1e-3])
