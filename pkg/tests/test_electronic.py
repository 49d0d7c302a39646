import numpy as np
import pytest

from flywheel import (DeviceParams, check_sum_rule, damping, diffusion,
                      excess_occupation, green_function, noise_spectrum,
                      self_energy, spectral_density, spectral_function)
from flywheel.electronic import fermi, integration_window
from flywheel.errors import ConsistencyError, QuadratureError


def simpson_sum_rule(x, params, half_width=4000.0, n=800001):
    """Independent fixed-grid oracle for the spectral sum rule."""
    w = np.linspace(-half_width, half_width, n)
    a = spectral_function(w, x, params)
    k = spectral_density(w, params.left) + spectral_density(w, params.right)
    from scipy.integrate import simpson
    return simpson(a * k, x=w) / (2.0 * np.pi)


def test_spectral_density_peak_and_symmetry(device):
    lead = device.left  # center 0.5, width 1, coupling 2
    assert spectral_density(0.5, lead) == pytest.approx(2.0, abs=1e-15)
    assert spectral_density(1.5, lead) == pytest.approx(1.0, abs=1e-15)
    assert spectral_density(-0.5, lead) == pytest.approx(1.0, abs=1e-15)
    w = np.linspace(-30, 30, 301)
    assert np.all(spectral_density(w, lead) > 0)
    assert np.allclose(spectral_density(0.5 + w, lead), spectral_density(0.5 - w, lead))


def test_self_energy_closed_form(device):
    lead = device.left
    assert self_energy(0.5, lead) == pytest.approx(0.0 - 1.0j, abs=1e-15)
    assert self_energy(1.5, lead) == pytest.approx(0.5 - 0.5j, abs=1e-15)
    rng = np.random.default_rng(3)
    w = rng.uniform(-20, 20, 50)
    assert np.allclose(np.imag(self_energy(w, lead)),
                       -0.5 * spectral_density(w, lead), atol=1e-14)
    # real part odd about the band center
    assert np.allclose(np.real(self_energy(0.5 + w, lead)),
                       -np.real(self_energy(0.5 - w, lead)), atol=1e-14)


def test_spectral_function_nonnegative(device):
    rng = np.random.default_rng(5)
    for _ in range(100):
        w = rng.uniform(-50, 50)
        x = rng.uniform(-40, 40)
        assert spectral_function(w, x, device) >= 0.0


def test_resonant_pole_in_weak_coupling_limit():
    p = DeviceParams.symmetric(0.0, coupling=1e-8)
    x = 2.0
    eps_x = p.dot_energy - p.force * x
    g = green_function(eps_x, x, p)
    # at the bare level the real part of 1/G vanishes as coupling -> 0
    assert abs(np.real(1.0 / g)) < 1e-7


def test_sum_rule_against_independent_quadrature(device):
    val = check_sum_rule(0.0, device, tol=1e-6)
    oracle = simpson_sum_rule(0.0, device)
    assert val == pytest.approx(1.0, abs=1e-6)
    assert oracle == pytest.approx(1.0, abs=1e-5)
    assert val == pytest.approx(oracle, abs=1e-5)


def test_sum_rule_random_positions(device):
    rng = np.random.default_rng(11)
    xs = rng.uniform(-12, 12, 10) * device.x_scale
    vals = check_sum_rule(xs, device, tol=1e-6)
    assert np.max(np.abs(vals - 1.0)) < 1e-6


def test_sum_rule_failure_detected(device):
    with pytest.raises(QuadratureError):
        check_sum_rule(0.0, device, tol=1e-18)


def test_occupation_symmetric_point(device):
    assert excess_occupation(0.0, device) == pytest.approx(0.0, abs=1e-6)


def test_occupation_odd_under_mirror(device):
    rng = np.random.default_rng(7)
    xs = rng.uniform(0.1, 10, 20) * device.x_scale
    n_plus = excess_occupation(xs, device)
    n_minus = excess_occupation(-xs, device)
    assert np.max(np.abs(n_plus + n_minus)) < 1e-8


def test_occupation_bounds(device):
    xs = np.linspace(-12, 12, 41) * device.x_scale
    for v in (0.0, 15.0):
        occ = excess_occupation(xs, device.at_voltage(v))
        assert np.all(np.abs(occ) <= 0.5 + 1e-9)


def test_occupation_monotonicity_change_with_voltage(device):
    xs = np.linspace(0.0, 12.0, 49) * device.x_scale
    d0 = np.diff(excess_occupation(xs, device))
    assert np.all(d0 > 0)  # monotone at zero bias
    d15 = np.diff(excess_occupation(xs, device.at_voltage(15.0)))
    assert np.any(d15 > 0) and np.any(d15 < 0)  # turns around under bias


def test_detailed_balance_at_equilibrium(device):
    beta = device.left.beta
    for w in (0.1, 0.3, 1.0):
        for x in (0.0, 2 * device.x_scale, -2 * device.x_scale):
            ratio = noise_spectrum(x, -w, device) / noise_spectrum(x, w, device)
            assert ratio == pytest.approx(np.exp(-beta * w), rel=1e-6)


def test_noise_nonnegative_on_grid(device):
    p = device.at_voltage(15.0)
    for x in np.linspace(-6, 6, 5) * p.x_scale:
        for w in np.linspace(-2, 2, 5):
            assert noise_spectrum(x, w, p) >= 0.0


def test_noise_scales_with_force_squared():
    a = DeviceParams.symmetric(3.0, coupling_energy=0.1)
    b = DeviceParams.symmetric(3.0, coupling_energy=0.05)
    ratio = noise_spectrum(0.7, 0.4, a) / noise_spectrum(0.7 * 2.0, 0.4, b)
    # halving lambda halves F and doubles x at equal eps_x, so S scales by 4
    assert ratio == pytest.approx(4.0, rel=1e-9)


def test_diffusion_equals_zero_frequency_noise(device):
    rng = np.random.default_rng(13)
    xs = rng.uniform(-10, 10, 20) * device.x_scale
    d = diffusion(xs, device)
    s0 = np.array([noise_spectrum(x, 0.0, device) for x in xs])
    assert np.max(np.abs(d - s0) / d) < 1e-8


def test_diffusion_even_and_damping_even(device):
    xs = np.array([0.7, 2.3, 5.1]) * device.x_scale
    assert np.allclose(diffusion(xs, device), diffusion(-xs, device), rtol=1e-9)
    assert np.allclose(damping(xs, device), damping(-xs, device), rtol=1e-7)


def test_diffusion_grows_with_temperature():
    x = 1.5
    vals = [diffusion(x, DeviceParams.symmetric(15.0, beta=b)) for b in (1.0, 0.5, 0.25)]
    assert vals[0] < vals[1] < vals[2]


def test_equilibrium_damping_positive_and_fdt(device, table_v0):
    assert np.all(table_v0.damping > 0)
    ratio = table_v0.diffusion / (device.mass * table_v0.damping)
    assert np.max(np.abs(ratio / 4.0 - 1.0)) < 0.02


def test_negative_damping_under_bias(device):
    p = device.at_voltage(15.0)
    xs = np.linspace(-2, 2, 9) * p.x_scale
    assert np.min(damping(xs, p)) < 0.0


def test_damping_finite_difference_consistency(device):
    xs = np.array([0.0, 1.7, -3.4, 6.0]) * device.x_scale
    damping(xs, device, check=True)  # raises ConsistencyError on mismatch
    damping(xs[:2], device.at_voltage(15.0), check=True)


def test_damping_consistency_error_detectable(device):
    with pytest.raises(ConsistencyError):
        damping(np.array([1.0]), device, check=True, check_rtol=1e-16)


def test_fermi_overflow_safe():
    assert fermi(800.0) == 0.0
    assert fermi(-800.0) == 1.0
    assert fermi(0.0) == 0.5
    z = np.array([-1e6, -1.0, 0.0, 1.0, 1e6])
    f = fermi(z)
    assert np.all((f >= 0) & (f <= 1)) and not np.any(np.isnan(f))


def test_integration_window_covers_features(device):
    p = device.at_voltage(16.0)
    lo, hi, pts = integration_window(p, x_extent=40.0)
    assert lo < -16.0 and hi > 16.0
    assert all(lo < q < hi for q in pts)
