import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from flywheel import (DiagonalState, characteristic_from_radial,
                      coherent_ring_profile, diagonal_state_profile,
                      mean_occupation, populations_via_characteristic,
                      populations_via_overlap, read_populations_csv,
                      reconstruct_populations, thermal_profile, vacuum_profile,
                      weighted_laguerre, write_populations_csv)
from flywheel.errors import ConsistencyError, QuadratureError, TruncationError


def geometric_populations(nbar, n_max):
    n = np.arange(n_max + 1)
    return nbar**n / (nbar + 1.0) ** (n + 1)


def poisson_populations(mean, n_max):
    n = np.arange(n_max + 1)
    logp = n * np.log(mean) - mean - np.array([math.lgamma(k + 1) for k in n])
    return np.exp(logp)


def test_characteristic_of_vacuum():
    chi = characteristic_from_radial(vacuum_profile(du=0.01))
    r = np.linspace(0.0, 3.0, 31)
    assert np.max(np.abs(chi(r) - np.exp(-0.5 * r**2))) < 1e-4
    assert chi.chi0 == pytest.approx(1.0, abs=1e-3)


def test_characteristic_of_vacuum_against_direct_quadrature():
    # independent continuous-integral oracle for the Hankel transform
    from scipy.special import j0
    for r in (0.0, 0.7, 1.9):
        val, _ = quad(lambda u: 2 * np.pi * u * (2 / np.pi) * np.exp(-2 * u * u)
                      * j0(2 * r * u), 0, 10, limit=200)
        assert val == pytest.approx(np.exp(-0.5 * r * r), abs=1e-10)


def test_characteristic_of_thermal():
    nbar = 2.0
    chi = characteristic_from_radial(thermal_profile(nbar, du=0.01))
    r = np.linspace(0.0, 1.5, 16)
    assert np.max(np.abs(chi(r) - np.exp(-(2 * nbar + 1) * r**2 / 2))) < 1e-4


def test_characteristic_requires_normalization():
    with pytest.raises(ValueError):
        # profile type itself rejects mis-normalized data
        prof = vacuum_profile(du=0.02)
        type(prof)(prof.u, prof.values * 0.9, prof.bin_width)
    prof = vacuum_profile(du=0.02)
    prof.values = prof.values * 0.9  # bypass construction-time validation
    with pytest.raises(QuadratureError):
        characteristic_from_radial(prof)


def test_vacuum_reconstruction():
    state = reconstruct_populations(vacuum_profile(), omega0=0.2)
    assert state.populations[0] == pytest.approx(1.0, abs=1e-3)
    assert np.all(state.populations[1:] < 1e-3)
    assert mean_occupation(state) == pytest.approx(0.0, abs=2e-3)


def test_thermal_reconstruction_oracle():
    nbar = 2.0
    state = reconstruct_populations(thermal_profile(nbar), omega0=0.2)
    expected = geometric_populations(nbar, 20)
    assert np.max(np.abs(state.populations[:21] - expected)) < 1e-3
    assert mean_occupation(state) == pytest.approx(nbar, rel=2e-3)


def test_coherent_ring_reconstruction_oracle():
    alpha_sq = 4.0
    state = reconstruct_populations(coherent_ring_profile(alpha_sq), omega0=0.2)
    expected = poisson_populations(alpha_sq, 20)
    assert np.max(np.abs(state.populations[:21] - expected)) < 5e-3
    assert mean_occupation(state) == pytest.approx(alpha_sq, rel=5e-3)


def test_round_trip_diagonal_states():
    cases = [
        geometric_populations(1.3, 40),
        poisson_populations(3.0, 40),
        np.array([0.55, 0.25, 0.2]),  # low-order dominated mixture
    ]
    for p in cases:
        p = p / p.sum()
        prof = diagonal_state_profile(p, du=0.02)
        state = reconstruct_populations(prof, omega0=0.2)
        m = min(p.size, state.populations.size)
        assert np.max(np.abs(state.populations[:m] - p[:m])) < 1e-3


def test_two_routes_agree_on_rough_profile():
    # random positive normalized profile: both routes integrate the same
    # discrete measure and must agree to quadrature precision
    rng = np.random.default_rng(8)
    du = 0.05
    u = (np.arange(200) + 0.5) * du
    vals = np.exp(-((u - 3.0) / 1.4) ** 2) * (1.0 + 0.3 * rng.standard_normal(200)) ** 2
    vals /= 2 * np.pi * np.sum(u * vals) * du
    from flywheel import RadialProfile
    prof = RadialProfile(u, vals, du)
    a = populations_via_characteristic(prof, 96)
    b = populations_via_overlap(prof, 96)
    assert np.max(np.abs(a - b)) < 1e-6


def test_negative_mass_clipped_and_recorded():
    rng = np.random.default_rng(3)
    du = 0.02
    base = thermal_profile(1.5, du=du)
    ripple = 1.0 + 0.05 * rng.standard_normal(base.values.size)
    vals = base.values * ripple
    vals /= 2 * np.pi * np.sum(base.u * vals) * du
    from flywheel import RadialProfile
    prof = RadialProfile(base.u, vals, du)
    state = reconstruct_populations(prof, omega0=0.2, tail_tol=1e-2)
    assert state.clipped_mass >= 0.0
    assert state.populations.sum() == pytest.approx(1.0, abs=1e-12)
    assert state.raw_populations is not None


def test_truncation_error_when_n_max_too_small():
    with pytest.raises(TruncationError):
        reconstruct_populations(thermal_profile(5.0), n_max=16, omega0=0.2)


def test_auto_truncation_grows():
    state = reconstruct_populations(thermal_profile(5.0), omega0=0.2)
    assert state.n_max >= 128  # geometric tail of nbar=5 crosses 1e-6 near n=79


def test_asymmetry_gate():
    prof = thermal_profile(1.0)
    prof.eta = 0.5
    with pytest.raises(ConsistencyError):
        reconstruct_populations(prof, omega0=0.2)
    state = reconstruct_populations(prof, omega0=0.2, require_symmetry=False)
    assert state.populations[0] > 0.4


def test_weighted_laguerre_against_exact_rationals():
    def exact(n, s_float):
        s = Fraction(s_float)
        prev, curr = Fraction(1), 1 - s
        for k in range(1, n):
            prev, curr = curr, ((2 * k + 1 - s) * curr - k * prev) / (k + 1)
        return curr if n >= 1 else Fraction(1)

    for s in (0.5, 12.5, 64.0):
        got = weighted_laguerre(60, np.array([s]))[:, 0]
        scale = math.exp(-s / 2)
        for n in (1, 7, 23, 41, 60):
            want = float(exact(n, s)) * scale
            assert got[n] == pytest.approx(want, rel=1e-9)


def test_weighted_laguerre_deep_forbidden_region():
    # magnitude survives initialization far beyond the overflow range
    def exact_log(n, s_float):
        s = Fraction(s_float)
        prev, curr = Fraction(1), 1 - s
        for k in range(1, n):
            prev, curr = curr, ((2 * k + 1 - s) * curr - k * prev) / (k + 1)
        sign = 1 if curr > 0 else -1
        return sign, math.log(abs(curr.numerator)) - math.log(curr.denominator) - s_float / 2

    for n, s in ((404, 1600.0), (512, 2304.0)):
        sign, logm = exact_log(n, s)
        got = weighted_laguerre(n, np.array([s]))[n, 0]
        assert np.sign(got) == sign
        assert math.log(abs(got)) == pytest.approx(logm, abs=1e-9)


def test_diagonal_state_invariants():
    with pytest.raises(ValueError):
        DiagonalState(np.array([0.5, 0.6]), 0.2, 1, True, 0.0)
    with pytest.raises(ValueError):
        DiagonalState(np.array([0.9, -0.1, 0.2]), 0.2, 2, True, 0.0)


def test_populations_csv_round_trip(tmp_path):
    state = reconstruct_populations(thermal_profile(2.0), omega0=0.2)
    path = write_populations_csv(state, tmp_path / "pops.csv", {"voltage": 1.0})
    back = read_populations_csv(path)
    assert np.allclose(back.populations, state.populations)
    assert back.omega0 == state.omega0
    assert back.n_max == state.n_max
