"""Quasi-adiabatic Langevin integration of the mechanical mode.

A single trajectory is strictly sequential; distinct voltages or seeds can
run in parallel workers.  The noise stream is drawn from a seeded PCG64
generator, so identical (config, table) inputs give bit-identical
trajectories regardless of chunking.
"""

from __future__ import annotations

import gzip
import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ._kernel import run_chunk
from .errors import DivergenceError
from .params import DeviceParams
from .tables import CoefficientTable, lookup

_CHUNK = 1 << 22  # noise draws per kernel call; bounds memory at long runs
CLAMP_WARN_FRACTION = 1e-3


@dataclass(frozen=True)
class IntegratorConfig:
    """Stochastic-Euler run settings.

    burn_in=None discards the first 10% of steps; ring-up to the limit
    cycle near threshold is slow, so do not shrink it for above-threshold
    runs.  Samples are recorded every record_stride steps to bound memory.
    """

    dt: float = 0.01
    n_steps: int = 250_000_000
    burn_in: int | None = None
    seed: int = 0
    record_stride: int = 10
    initial_x: float = 0.0
    initial_v: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_steps <= self.effective_burn_in:
            raise ValueError("n_steps must exceed burn_in")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def effective_burn_in(self) -> int:
        return self.n_steps // 10 if self.burn_in is None else self.burn_in


@dataclass
class Trajectory:
    """Recorded steady-state samples of one stochastic run."""

    x: np.ndarray
    v: np.ndarray
    dt: float
    record_stride: int
    burn_in: int
    n_steps: int
    seed: int
    clamp_count: int

    @property
    def times(self) -> np.ndarray:
        first = self.burn_in + self.record_stride
        return (first + self.record_stride * np.arange(self.x.size)) * self.dt

    @property
    def clamp_fraction(self) -> float:
        return self.clamp_count / self.n_steps


def step(state, table: CoefficientTable, params: DeviceParams, dt: float, dW: float):
    """One semi-implicit stochastic Euler step; reference for the kernel.

    Coefficients are read at the current (clamped) position, the velocity is
    advanced first and the position is advanced with the new velocity.  dW
    must be a zero-mean Gaussian increment of variance dt.
    """
    x, v = state
    occ, dif, gam = lookup(table, x)
    a = -params.omega0**2 * x - gam * v + params.force * occ / params.mass
    v_new = v + a * dt + np.sqrt(dif) / params.mass * dW
    x_new = x + v_new * dt
    return x_new, v_new


def run(config: IntegratorConfig, table: CoefficientTable, params: DeviceParams) -> Trajectory:
    """Integrate one trajectory and return its recorded steady-state samples."""
    dt = config.dt
    if dt * params.omega0 >= 0.05:
        raise ValueError(f"dt*omega0 = {dt * params.omega0:.3g} violates the < 0.05 guard")
    gmax = float(np.max(np.abs(table.damping)))
    if dt * gmax >= 0.1:
        raise ValueError(f"dt*max|gamma| = {dt * gmax:.3g} violates the < 0.1 guard")

    burn_in = config.effective_burn_in
    n_rec_total = (config.n_steps - burn_in) // config.record_stride
    rec_x = np.empty(n_rec_total)
    rec_v = np.empty(n_rec_total)
    c_occ, c_dif, c_gam = table.spline_coefficients()
    h = table.x[1] - table.x[0]

    rng = np.random.default_rng(config.seed)
    state = np.array([config.initial_x, config.initial_v, 0.0])
    n_rec = 0
    done = 0
    while done < config.n_steps:
        draws = min(_CHUNK, config.n_steps - done)
        normals = rng.standard_normal(draws)
        n_rec, bad = run_chunk(
            state, normals, done, dt, params.omega0**2,
            params.force / params.mass, np.sqrt(dt) / params.mass,
            table.x_min, table.x_max, 1.0 / h,
            c_occ, c_dif, c_gam,
            burn_in, config.record_stride, rec_x, rec_v, n_rec,
        )
        if bad >= 0:
            raise DivergenceError(bad)
        done += draws

    traj = Trajectory(
        x=rec_x[:n_rec], v=rec_v[:n_rec], dt=dt, record_stride=config.record_stride,
        burn_in=burn_in, n_steps=config.n_steps, seed=config.seed,
        clamp_count=int(state[2]),
    )
    if traj.clamp_fraction > CLAMP_WARN_FRACTION:
        warnings.warn(
            f"{traj.clamp_fraction:.2%} of steps clamped to the table edge; "
            "widen the coefficient grid", stacklevel=2,
        )
    return traj


def position_autocorrelation(traj: Trajectory, max_lag: int) -> np.ndarray:
    """Stationary sample autocovariance C(tau) of x at recorded-sample lags.

    Uses the biased (1/N) normalization so |C(tau)| <= C(0) = Var(x) holds
    for every lag.  max_lag beyond half the record length is an error.
    """
    x = traj.x
    n = x.size
    if max_lag > n // 2:
        raise ValueError(f"max_lag {max_lag} exceeds half the record length {n // 2}")
    dx = x - x.mean()
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(dx, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1] / n
    return acov


@dataclass(frozen=True)
class AdiabaticityReport:
    """Timescale-separation diagnostic min(T, Gamma) / max(omega0, |lambda|)."""

    ratio: float
    fast_scale: float
    slow_scale: float
    ok: bool


def check_adiabaticity(params: DeviceParams, warn_below: float = 5.0) -> AdiabaticityReport:
    """Warn (never block) when the quasi-adiabatic separation is marginal."""
    fast = min(1.0 / params.left.beta, 1.0 / params.right.beta,
               params.left.coupling, params.right.coupling)
    slow = max(params.omega0, abs(params.coupling_energy))
    ratio = fast / slow
    ok = ratio >= warn_below
    if not ok:
        warnings.warn(
            f"quasi-adiabatic ratio {ratio:.2g} < {warn_below:g}; "
            "frozen-position coefficients may be inaccurate", stacklevel=2,
        )
    return AdiabaticityReport(ratio=ratio, fast_scale=fast, slow_scale=slow, ok=ok)


def batched_variance(samples, n_batches: int = 32):
    """Variance of correlated samples with a batched-means error estimate.

    Returns (variance, standard_error); batches must be long compared to the
    autocorrelation time for the error bar to be trustworthy.
    """
    x = np.asarray(samples, dtype=float)
    m = x.size // n_batches
    if m < 2:
        raise ValueError("too few samples for the requested batch count")
    batches = x[: m * n_batches].reshape(n_batches, m)
    v = batches.var(axis=1)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(n_batches))


def dump_trajectory(traj: Trajectory, path, config: IntegratorConfig | None = None):
    """Write the decimated trajectory as gzip CSV (t,x,v) plus a JSON sidecar."""
    path = str(path)
    t = traj.times
    with gzip.open(path, "wt", newline="") as fh:
        fh.write("t,x,v\n")
        for i in range(traj.x.size):
            fh.write("%.17g,%.17g,%.17g\n" % (t[i], traj.x[i], traj.v[i]))
    sidecar = {
        "seed": traj.seed, "dt": traj.dt, "record_stride": traj.record_stride,
        "burn_in": traj.burn_in, "n_steps": traj.n_steps,
        "clamp_count": traj.clamp_count,
    }
    if config is not None:
        sidecar["config"] = asdict(config)
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
    return path
