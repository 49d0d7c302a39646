"""Voltage-sweep orchestration, validation suite and artifact persistence.

Each voltage job is an independent pure function of (config, master seed,
voltage index), so sweeps parallelize over voltages with per-voltage seeds
derived from the master seed rather than from scheduling order; serial and
multi-worker runs produce identical numeric outputs.
"""

from __future__ import annotations

import configparser
import datetime
import hashlib
import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, electronic
from .errors import ConfigError, ConsistencyError, QuadratureError, VacuumStateError
from .langevin import IntegratorConfig, check_adiabaticity, dump_trajectory, run
from .params import DeviceParams
from .reconstruct import (DiagonalState, mean_occupation, populations_via_overlap,
                          reconstruct_populations, write_populations_csv)
from .tables import build_table, find_negative_damping_interval, write_table_csv
from .thermo import (analyze, entropy, ergotropy, free_energy_work, g2_zero,
                     write_summary_csv)
from .wigner import (GridSpec, auto_grid_spec, estimate_wigner,
                     mean_occupation_from_moments, radial_profile,
                     radial_profile_from_samples, write_profile_csv,
                     write_wigner_csv)

DEFAULT_VOLTAGES = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
TABLE_EXTENT_SCALED = 12.0
TABLE_POINTS = 256
CLAMP_RETRY_FACTOR = 1.5
CLAMP_RETRIES = 2


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a sweep."""

    device: DeviceParams = field(default_factory=DeviceParams.symmetric)
    voltages: tuple = DEFAULT_VOLTAGES
    dt: float = 0.01
    n_steps: int = 250_000_000
    burn_in: int | None = None
    record_stride: int = 10
    grid: GridSpec = field(default_factory=GridSpec)
    radial_bin_width: float = 0.1
    n_max: int | None = None
    reconstruction_bin_width: float = 0.02
    tail_tol: float = 1e-3  # sampled profiles never reach the noise-free 1e-6
    error_segments: int = 8
    table_extent: float = TABLE_EXTENT_SCALED  # in units of x0
    table_points: int = TABLE_POINTS
    out_dir: str = "sweep_out"
    master_seed: int = 20220913
    workers: int = 1
    figures: bool = True
    dump_trajectories: bool = False

    def __post_init__(self):
        if len(self.voltages) == 0:
            raise ConfigError("voltage list must be non-empty")
        if any(v < 0 for v in self.voltages):
            raise ConfigError("voltages must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _get(cp, section, key, cast, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    if raw == "":
        return default
    if cast is bool:
        return cp.getboolean(section, key)
    return cast(raw)


def load_config(path) -> RunConfig:
    """Parse the flat key-value run file (INI sections mirroring the types)."""
    cp = configparser.ConfigParser()
    read = cp.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    try:
        device = DeviceParams.symmetric(
            mass=_get(cp, "device", "mass", float, 1.0),
            omega0=_get(cp, "device", "omega0", float, 0.2),
            coupling_energy=_get(cp, "device", "coupling_energy", float, 0.1),
            band_center=_get(cp, "device", "band_center", float, 0.5),
            bandwidth=_get(cp, "device", "bandwidth", float, 1.0),
            coupling=_get(cp, "device", "coupling", float, 2.0),
            beta=_get(cp, "device", "beta", float, 0.5),
        )
        voltages = _get(
            cp, "sweep", "voltages",
            lambda s: tuple(float(v) for v in s.replace(",", " ").split()),
            DEFAULT_VOLTAGES,
        )
        return RunConfig(
            device=device,
            voltages=voltages,
            master_seed=_get(cp, "sweep", "master_seed", int, 20220913),
            workers=_get(cp, "sweep", "workers", int, 1),
            dt=_get(cp, "integrator", "dt", float, 0.01),
            n_steps=_get(cp, "integrator", "n_steps", int, 250_000_000),
            burn_in=_get(cp, "integrator", "burn_in", int, None),
            record_stride=_get(cp, "integrator", "record_stride", int, 10),
            grid=GridSpec(
                extent=_get(cp, "grid", "extent", float, 12.0),
                bins=_get(cp, "grid", "bins", int, 201),
            ),
            radial_bin_width=_get(cp, "grid", "radial_bin_width", float, 0.1),
            n_max=_get(cp, "reconstruction", "n_max", int, None),
            reconstruction_bin_width=_get(cp, "reconstruction", "bin_width", float, 0.02),
            tail_tol=_get(cp, "reconstruction", "tail_tol", float, 1e-3),
            error_segments=_get(cp, "reconstruction", "error_segments", int, 8),
            table_extent=_get(cp, "table", "extent", float, TABLE_EXTENT_SCALED),
            table_points=_get(cp, "table", "points", int, TABLE_POINTS),
            out_dir=_get(cp, "output", "directory", str, "sweep_out"),
            figures=_get(cp, "output", "figures", bool, True),
            dump_trajectories=_get(cp, "output", "dump_trajectories", bool, False),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def voltage_seed(master_seed: int, index: int) -> int:
    """Deterministic per-voltage seed, independent of worker scheduling."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1)[0])


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _code_version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).parent, capture_output=True, text=True, check=False,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except OSError:
        pass
    return f"flywheel-{__version__}"


def run_voltage(config: RunConfig, index: int):
    """Full per-voltage pipeline; returns (report, files, metadata).

    Builds the coefficient table (widening it if the trajectory clamps),
    integrates one seeded trajectory, estimates the phase-space density and
    radial profile, reconstructs populations and analyzes the work content.
    Artifacts are written under out_dir/V_<voltage>/.
    """
    voltage = config.voltages[index]
    seed = voltage_seed(config.master_seed, index)
    params = config.device.at_voltage(voltage)
    vdir = Path(config.out_dir) / f"V_{voltage:g}"
    vdir.mkdir(parents=True, exist_ok=True)

    extent = config.table_extent * params.x_scale
    integ = IntegratorConfig(
        dt=config.dt, n_steps=config.n_steps, burn_in=config.burn_in,
        seed=seed, record_stride=config.record_stride,
    )
    for attempt in range(CLAMP_RETRIES + 1):
        table = build_table(params, -extent, extent, config.table_points)
        traj = run(integ, table, params)
        if traj.clamp_fraction <= 1e-3 or attempt == CLAMP_RETRIES:
            break
        extent *= CLAMP_RETRY_FACTOR

    interval = find_negative_damping_interval(table)
    spec = auto_grid_spec(traj, params, config.grid)
    grid = estimate_wigner(traj, params, spec)
    profile = radial_profile(grid, config.radial_bin_width)
    fine = radial_profile_from_samples(traj, params, config.reconstruction_bin_width)
    fine.eta = profile.eta  # asymmetry gate comes from the 2D grid
    state = reconstruct_populations(fine, config.n_max, omega0=params.omega0,
                                    tail_tol=config.tail_tol)
    means, errors = _segment_statistics(traj, params, config, state.n_max)
    we_plugin = ergotropy(state)
    we_estimate = None
    if interval is None:
        # Plug-in ergotropy of a sampled passive state is pure sorting bias,
        # linear in the profile noise (proportional to 1/sqrt(T)).  Segments
        # see sqrt(k) times the noise, so extrapolating (full, segment-mean)
        # to zero noise removes the bias; values consistent with zero at
        # 3 sigma are reported as passive.  A detected negative-damping
        # interval excludes passivity a priori, so above threshold the
        # plug-in value stands.
        k = config.error_segments
        debiased = we_plugin - (means["W_E"] - we_plugin) / (np.sqrt(k) - 1.0)
        gate = 3.0 * (1.0 + 1.0 / (np.sqrt(k) - 1.0)) * errors["W_E"]
        we_estimate = 0.0 if debiased <= gate else debiased
    report = analyze(state, voltage, params.left.beta,
                     above_threshold=interval is not None,
                     ergotropy_estimate=we_estimate)

    nbar_moments = mean_occupation_from_moments(grid)
    meta = {
        "voltage": voltage,
        "seed": seed,
        "beta": params.left.beta,
        "above_threshold": interval is not None,
        "negative_damping_interval": list(interval) if interval else None,
        "eta": profile.eta,
        "nbar_populations": mean_occupation(state),
        "nbar_moments": nbar_moments,
        "clamp_fraction": traj.clamp_fraction,
        "grid_extent": spec.extent,
        "grid_bins": spec.bins,
        "n_max": state.n_max,
        "ergotropy_plugin": we_plugin,
        "ergotropy_estimate": we_estimate,
        "segment_means": means,
        "sigma": errors,
    }

    files = [
        write_table_csv(table, vdir / "coefficients.csv", params),
        str(vdir / "coefficients.csv.json"),
        write_wigner_csv(grid, vdir / "wigner.csv", {"voltage": voltage}),
        str(vdir / "wigner.csv.json"),
        write_profile_csv(profile, vdir / "profile.csv"),
        write_populations_csv(state, vdir / "populations.csv", meta),
        str(vdir / "populations.csv.json"),
    ]
    if config.dump_trajectories:
        files.append(dump_trajectory(traj, vdir / "trajectory.csv.gz", integ))
        files.append(str(vdir / "trajectory.csv.gz.json"))
    if config.figures:
        from . import figures
        files += figures.voltage_figures(grid, profile, state, table, params, vdir)
    return report, files, meta


def _segment_statistics(traj, params, config: RunConfig, n_max: int):
    """Means and standard errors of the reconstructed observables over k
    contiguous trajectory segments (spread of segment estimates / sqrt(k)).

    Segment states use the fast overlap route only; the dual-route ceremony
    is reserved for the full-sample state.
    """
    k = config.error_segments
    size = traj.x.size // k
    vals = {"nbar": [], "S": [], "g2": [], "W_E": [], "W_F": []}
    beta = params.left.beta
    for i in range(k):
        part = replace(traj, x=traj.x[i * size:(i + 1) * size],
                       v=traj.v[i * size:(i + 1) * size])
        prof = radial_profile_from_samples(part, params, config.reconstruction_bin_width)
        raw = populations_via_overlap(prof, n_max)
        clipped = np.maximum(raw, 0.0)
        st = DiagonalState(clipped / clipped.sum(), omega0=params.omega0,
                           n_max=n_max, renormalized=True,
                           clipped_mass=float(clipped.sum() - raw.sum()))
        vals["nbar"].append(mean_occupation(st))
        vals["S"].append(entropy(st))
        vals["W_E"].append(ergotropy(st))
        vals["W_F"].append(free_energy_work(st, beta))
        try:
            vals["g2"].append(g2_zero(st))
        except VacuumStateError:
            pass
    means = {}
    errors = {}
    for key, arr in vals.items():
        full = len(arr) == k
        means[key] = float(np.mean(arr)) if full else None
        errors[key] = float(np.std(arr, ddof=1) / np.sqrt(k)) if full else None
    return means, errors


def _job(payload):
    config, index = payload
    t0 = time.perf_counter()
    try:
        report, files, meta = run_voltage(config, index)
        return index, "ok", report, files, meta, time.perf_counter() - t0, None
    except Exception as exc:  # per-voltage failures must not kill the sweep
        return index, "failed", None, [], {}, time.perf_counter() - t0, repr(exc)


@dataclass
class SweepResult:
    reports: list
    summary_path: str
    manifest_path: str
    failures: dict
    exit_code: int


def run_sweep(config: RunConfig) -> SweepResult:
    """Run the full pipeline over every voltage and persist all artifacts."""
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc

    check_adiabaticity(config.device)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()

    payloads = [(config, i) for i in range(len(config.voltages))]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_job, payloads))
    else:
        results = [_job(p) for p in payloads]
    results.sort(key=lambda r: r[0])

    reports = [r[2] for r in results if r[1] == "ok"]
    failures = {config.voltages[r[0]]: r[6] for r in results if r[1] != "ok"}
    summary_path = str(out / "sweep_summary.csv")
    write_summary_csv(reports, summary_path)

    extra_files = []
    if config.figures and reports:
        from . import figures
        extra_files = figures.summary_figures(reports, out)

    per_voltage = {}
    for index, status, _report, files, meta, runtime, error in results:
        per_voltage[f"{config.voltages[index]:g}"] = {
            "status": status,
            "seed": meta.get("seed", voltage_seed(config.master_seed, index)),
            "runtime_s": runtime,
            "error": error,
            "files": [{"path": str(Path(f).relative_to(out)), "sha256": _sha256(Path(f))}
                      for f in files],
            "meta": meta,
        }
    manifest = {
        "config": _config_dict(config),
        "seeds": [voltage_seed(config.master_seed, i) for i in range(len(config.voltages))],
        "git_describe": _code_version(),
        "started_at": started,
        "per_voltage": per_voltage,
        "summary": {"path": "sweep_summary.csv", "sha256": _sha256(Path(summary_path))},
        "extra_files": [{"path": str(Path(f).relative_to(out)), "sha256": _sha256(Path(f))}
                        for f in extra_files],
    }
    manifest_path = str(out / "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)

    return SweepResult(
        reports=reports, summary_path=summary_path, manifest_path=manifest_path,
        failures=failures, exit_code=0 if not failures else 2,
    )


def _config_dict(config: RunConfig) -> dict:
    d = asdict(config)
    d["voltages"] = list(config.voltages)
    return d


def reanalyze(out_dir, summary_path=None) -> str:
    """Recompute the thermodynamic summary from stored populations files."""
    out = Path(out_dir)
    rows = []
    from .reconstruct import read_populations_csv
    for pop_file in sorted(out.glob("V_*/populations.csv")):
        with open(str(pop_file) + ".json") as fh:
            meta = json.load(fh)
        state = read_populations_csv(pop_file)
        rows.append(analyze(state, meta["voltage"], meta["beta"],
                            meta["above_threshold"],
                            ergotropy_estimate=meta.get("ergotropy_estimate")))
    if not rows:
        raise ConfigError(f"no populations files found under {out}")
    target = str(summary_path or out / "sweep_summary.csv")
    write_summary_csv(rows, target)
    return target


# ---------------------------------------------------------------------------
# Validation suite: quadrature-only invariant checks, no SDE integration.

@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # passed / failed / skipped
    detail: str


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.status != "failed" for c in self.checks)

    def __str__(self):
        return "\n".join(f"[{c.status:>7s}] {c.name}: {c.detail}" for c in self.checks)


def _is_equilibrium(params: DeviceParams) -> bool:
    return params.bias == 0.0 and params.left.beta == params.right.beta


def _is_mirror_symmetric(params: DeviceParams) -> bool:
    l, r = params.left, params.right
    return (
        params.dot_energy == 0.0
        and l.mu == -r.mu
        and l.center == -r.center
        and l.bandwidth == r.bandwidth
        and l.coupling == r.coupling
        and l.beta == r.beta
    )


def validate_device(params: DeviceParams, seed: int = 7, n_random: int = 20) -> ValidationReport:
    """Run the electronic invariant suite for one device configuration.

    Equilibrium-only checks (fluctuation-dissipation ratio, detailed
    balance) and the mirror-symmetry check are skipped when their
    preconditions do not hold.
    """
    rng = np.random.default_rng(seed)
    x0 = params.x_scale
    checks = []

    xs = rng.uniform(-12 * x0, 12 * x0, n_random)
    try:
        electronic.check_sum_rule(xs, params, tol=1e-6)
        checks.append(CheckResult("sum_rule", "passed",
                                  f"= 1 within 1e-6 at {n_random} random x"))
    except QuadratureError as exc:
        checks.append(CheckResult("sum_rule", "failed", str(exc)))

    occ = electronic.excess_occupation(xs, params)
    if np.all(np.abs(occ) <= 0.5 + 1e-9):
        checks.append(CheckResult("occupation_bounds", "passed",
                                  "excess occupation within [-1/2, 1/2]"))
    else:
        checks.append(CheckResult("occupation_bounds", "failed",
                                  f"max |n| = {np.max(np.abs(occ)):.4f}"))

    try:
        electronic.damping(xs[:5], params, check=True)
        checks.append(CheckResult("damping_consistency", "passed",
                                  "analytic derivative matches finite difference"))
    except ConsistencyError as exc:
        checks.append(CheckResult("damping_consistency", "failed", str(exc)))

    if _is_mirror_symmetric(params):
        xm = rng.uniform(0.1 * x0, 10 * x0, 8)
        n_p = electronic.excess_occupation(xm, params)
        n_m = electronic.excess_occupation(-xm, params)
        d_p = electronic.diffusion(xm, params)
        d_m = electronic.diffusion(-xm, params)
        g_p = electronic.damping(xm, params)
        g_m = electronic.damping(-xm, params)
        odd = np.max(np.abs(n_p + n_m))
        even = max(np.max(np.abs(d_p - d_m) / d_p), np.max(np.abs(g_p - g_m)))
        if odd < 1e-8 and even < 1e-6:
            checks.append(CheckResult("mirror_symmetry", "passed",
                                      "occupation odd, D and gamma even"))
        else:
            checks.append(CheckResult("mirror_symmetry", "failed",
                                      f"odd defect {odd:.2e}, even defect {even:.2e}"))
    else:
        checks.append(CheckResult("mirror_symmetry", "skipped",
                                  "configuration is not mirror symmetric"))

    if _is_equilibrium(params):
        beta = params.left.beta
        xg = np.linspace(-10 * x0, 10 * x0, 21)
        ratio = electronic.diffusion(xg, params) / (
            params.mass * electronic.damping(xg, params))
        target = 2.0 / beta
        dev = np.max(np.abs(ratio / target - 1.0))
        if dev < 0.02:
            checks.append(CheckResult("fdt_ratio", "passed",
                                      f"D/(m gamma) = {target:g} within {dev:.2%}"))
        else:
            checks.append(CheckResult("fdt_ratio", "failed",
                                      f"max deviation {dev:.2%} from {target:g}"))

        worst = 0.0
        for w in (0.1, 0.3, 1.0):
            for xx in (0.0, 2 * x0, -2 * x0):
                r = electronic.noise_spectrum(xx, -w, params) / \
                    electronic.noise_spectrum(xx, w, params)
                worst = max(worst, abs(r / np.exp(-beta * w) - 1.0))
        if worst < 0.01:
            checks.append(CheckResult("detailed_balance", "passed",
                                      f"S(-w)/S(w) = exp(-beta w) within {worst:.2%}"))
        else:
            checks.append(CheckResult("detailed_balance", "failed",
                                      f"worst ratio deviation {worst:.2%}"))
    else:
        detail = "requires zero bias and equal lead temperatures"
        checks.append(CheckResult("fdt_ratio", "skipped", detail))
        checks.append(CheckResult("detailed_balance", "skipped", detail))

    return ValidationReport(checks)
