import numpy as np
import pytest

from flywheel import (GridSpec, IntegratorConfig, RadialProfile, Trajectory,
                      WignerGrid, auto_grid_spec, estimate_wigner, grid_moments,
                      mean_occupation_from_moments, radial_profile,
                      radial_profile_from_samples, read_profile_csv,
                      write_profile_csv, write_wigner_csv)
from flywheel.errors import GridCoverageError


def synthetic_trajectory(device, xs_scaled, ps_scaled):
    """Wrap scaled phase-space samples as a Trajectory."""
    return Trajectory(
        x=np.asarray(xs_scaled) * device.x_scale,
        v=np.asarray(ps_scaled) * device.p_scale / device.mass,
        dt=0.01, record_stride=10, burn_in=0,
        n_steps=10 * len(xs_scaled), seed=0, clamp_count=0,
    )


def gaussian_trajectory(device, n=400_000, sigma=1.0, seed=0):
    rng = np.random.default_rng(seed)
    return synthetic_trajectory(device, sigma * rng.standard_normal(n),
                                sigma * rng.standard_normal(n))


def analytic_gaussian_grid(spec=GridSpec(extent=8.0, bins=161)):
    """Grid filled with the exact isotropic unit-variance density."""
    edges = spec.edges
    c = 0.5 * (edges[:-1] + edges[1:])
    w = np.exp(-0.5 * (c[:, None] ** 2 + c[None, :] ** 2)) / (2 * np.pi)
    w /= w.sum() * spec.cell**2
    return WignerGrid(edges.copy(), edges.copy(), w, n_samples=1, n_outside=0)


def test_histogram_moments_recover_variance(device):
    traj = gaussian_trajectory(device)
    grid = estimate_wigner(traj, device, GridSpec(extent=8.0, bins=161))
    m = grid_moments(grid)
    n = traj.x.size
    assert m["x2"] == pytest.approx(1.0, abs=4 / np.sqrt(n))
    assert m["p2"] == pytest.approx(1.0, abs=4 / np.sqrt(n))
    assert abs(m["x"]) < 4 / np.sqrt(n)


def test_normalization_exact(device):
    traj = gaussian_trajectory(device, n=50_000)
    grid = estimate_wigner(traj, device, GridSpec(extent=9.0, bins=121))
    dx = np.diff(grid.x_edges)[:, None]
    dp = np.diff(grid.p_edges)[None, :]
    assert float(np.sum(grid.density * dx * dp)) == pytest.approx(1.0, abs=1e-13)


def test_coverage_error(device):
    traj = gaussian_trajectory(device, n=20_000, sigma=3.0)
    with pytest.raises(GridCoverageError):
        estimate_wigner(traj, device, GridSpec(extent=3.0, bins=31))


def test_auto_grid_spec_covers(device):
    traj = gaussian_trajectory(device, n=20_000, sigma=6.0)
    spec = auto_grid_spec(traj, device)
    grid = estimate_wigner(traj, device, spec)
    assert grid.n_outside == 0
    # keeps the default cell size
    assert spec.cell == pytest.approx(GridSpec().cell, rel=1e-12)


def test_moment_consistency_with_samples(device):
    traj = gaussian_trajectory(device, n=300_000, sigma=2.0, seed=4)
    grid = estimate_wigner(traj, device, GridSpec(extent=12.0, bins=201))
    m = grid_moments(grid)
    sample_var = (traj.x / device.x_scale).var()
    assert abs(m["x2"] - sample_var) / sample_var < 0.005


def test_mean_occupation_nonnegative_for_vacuum_like(device):
    rng = np.random.default_rng(9)
    n = 200_000
    traj = synthetic_trajectory(device, 0.5 * rng.standard_normal(n),
                                0.5 * rng.standard_normal(n))
    grid = estimate_wigner(traj, device, GridSpec(extent=6.0, bins=121))
    nw = mean_occupation_from_moments(grid)
    assert nw > -3.0 / np.sqrt(n)  # zero within Monte-Carlo resolution


def test_radial_profile_of_isotropic_gaussian():
    grid = analytic_gaussian_grid()
    prof = radial_profile(grid, bin_width=0.1)
    expected = np.exp(-0.5 * prof.u**2) / (2 * np.pi)
    mask = prof.u < 4.0
    assert np.max(np.abs(prof.values[mask] - expected[mask])) < 2e-3
    assert prof.values[0] == max(prof.values)  # peak at the origin
    assert prof.eta < 0.1  # geometric digitization floor, well under the 0.2 gate


def test_radial_profile_of_ring(device):
    rng = np.random.default_rng(12)
    n = 300_000
    radius = 4.0
    r = radius + 0.1 * rng.standard_normal(n)
    th = rng.uniform(0, 2 * np.pi, n)
    traj = synthetic_trajectory(device, r * np.cos(th), r * np.sin(th))
    grid = estimate_wigner(traj, device, GridSpec(extent=6.0, bins=121))
    prof = radial_profile(grid, bin_width=0.1)
    mode = prof.u[np.argmax(prof.values)]
    assert mode == pytest.approx(radius, abs=0.1)


def test_radial_normalization_invariant():
    grid = analytic_gaussian_grid()
    prof = radial_profile(grid)
    assert prof.normalization == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        RadialProfile(np.array([0.05, 0.15]), np.array([1.0, 1.0]), 0.1)


def test_asymmetry_diagnostic_flags_squeezed(device):
    rng = np.random.default_rng(15)
    n = 400_000
    traj = synthetic_trajectory(device, 2.5 * rng.standard_normal(n),
                                0.8 * rng.standard_normal(n))
    grid = estimate_wigner(traj, device, GridSpec(extent=12.0, bins=161))
    with pytest.warns(UserWarning, match="asymmetry"):
        prof = radial_profile(grid)
    assert prof.eta > 0.2


def test_sample_profile_matches_grid_profile(device):
    traj = gaussian_trajectory(device, n=500_000, sigma=1.5, seed=20)
    grid = estimate_wigner(traj, device, GridSpec(extent=10.0, bins=201))
    p_grid = radial_profile(grid, bin_width=0.1)
    p_samp = radial_profile_from_samples(traj, device, bin_width=0.1, u_max=10.0)
    mask = p_grid.u < 5.0
    scale = p_grid.values.max()
    assert np.max(np.abs(p_grid.values[mask] - p_samp.values[mask])) / scale < 0.05


def test_profile_merge_property(device):
    # histogram accumulation merges by addition over trajectory segments
    traj = gaussian_trajectory(device, n=200_000, seed=33)
    spec = GridSpec(extent=8.0, bins=81)
    full = estimate_wigner(traj, device, spec)
    half = traj.x.size // 2
    parts = []
    for sl in (slice(0, half), slice(half, None)):
        t = Trajectory(x=traj.x[sl], v=traj.v[sl], dt=traj.dt,
                       record_stride=traj.record_stride, burn_in=0,
                       n_steps=traj.n_steps, seed=0, clamp_count=0)
        parts.append(estimate_wigner(t, device, spec))
    merged = 0.5 * (parts[0].density + parts[1].density)
    assert np.allclose(merged, full.density, atol=1e-12)


def test_csv_exports(tmp_path, device):
    traj = gaussian_trajectory(device, n=30_000)
    grid = estimate_wigner(traj, device, GridSpec(extent=6.0, bins=41))
    wpath = write_wigner_csv(grid, tmp_path / "w.csv", {"tag": 1})
    lines = open(wpath).read().splitlines()
    assert lines[0] == "x,p,W"
    assert len(lines) == 1 + 41 * 41
    prof = radial_profile(grid)
    ppath = write_profile_csv(prof, tmp_path / "p.csv")
    back = read_profile_csv(ppath)
    assert np.allclose(back.values, prof.values)
    assert back.bin_width == pytest.approx(prof.bin_width)
