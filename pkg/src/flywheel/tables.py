"""Precomputed coefficient tables for the stochastic integrator.

The occupation, diffusion and damping curves are smooth Lorentzian-derived
functions of position, so they are sampled once per device configuration on
a uniform grid and served to the hot loop through cubic interpolation.
Lookups outside the grid clamp to the edge values and are counted rather
than extrapolated: extrapolating a negative-damping region could
destabilize the dynamics unphysically.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import electronic
from .errors import ConfigError
from .params import DeviceParams, LeadSpec

FLOAT_FMT = "%.17g"


@dataclass
class CoefficientTable:
    """Sampled <n>_x, D(x), gamma(x) with cubic interpolation between nodes."""

    x: np.ndarray
    occupation: np.ndarray
    diffusion: np.ndarray
    damping: np.ndarray
    params_fingerprint: str
    interpolation_order: int = 3
    out_of_range_count: int = field(default=0, compare=False)

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=float)
        self.occupation = np.ascontiguousarray(self.occupation, dtype=float)
        self.diffusion = np.ascontiguousarray(self.diffusion, dtype=float)
        self.damping = np.ascontiguousarray(self.damping, dtype=float)
        n = self.x.size
        if n < 16:
            raise ValueError(f"table needs at least 16 nodes, got {n}")
        if any(a.shape != self.x.shape for a in (self.occupation, self.diffusion, self.damping)):
            raise ValueError("table arrays must have equal length")
        if not np.all(np.diff(self.x) > 0):
            raise ValueError("table grid must be strictly increasing")
        if np.any(self.diffusion < -1e-15):
            raise ValueError("diffusion values must be non-negative")
        self.diffusion = np.maximum(self.diffusion, 0.0)
        self._splines = tuple(
            CubicSpline(self.x, v) for v in (self.occupation, self.diffusion, self.damping)
        )

    @property
    def x_min(self) -> float:
        return float(self.x[0])

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    def spline_coefficients(self):
        """(4, n-1) polynomial coefficient arrays for (occupation, D, gamma)."""
        return tuple(np.ascontiguousarray(s.c) for s in self._splines)


def lookup(table: CoefficientTable, x):
    """Interpolated (occupation, diffusion, damping) at position x.

    Positions outside the grid are clamped to the edge values and counted in
    table.out_of_range_count.  Interpolated diffusion is floored at zero so
    cubic overshoot between nodes can never produce a negative variance.
    """
    xa = np.asarray(x, dtype=float)
    outside = int(np.count_nonzero((xa < table.x_min) | (xa > table.x_max)))
    if outside:
        table.out_of_range_count += outside
    xc = np.clip(xa, table.x_min, table.x_max)
    occ_s, dif_s, gam_s = table._splines
    occ = occ_s(xc)
    dif = np.maximum(dif_s(xc), 0.0)
    gam = gam_s(xc)
    if xa.ndim == 0:
        return float(occ), float(dif), float(gam)
    return occ, dif, gam


def build_table(
    params: DeviceParams,
    x_min: float | None = None,
    x_max: float | None = None,
    n_points: int = 256,
) -> CoefficientTable:
    """Evaluate the electronic coefficients on a uniform position grid.

    Default range is x/x0 in [-12, 12], wide enough for the saturated limit
    cycle of the reference parameter set; the sweep pipeline widens it when
    trajectories clamp.
    """
    if n_points < 16:
        raise ValueError(f"n_points must be >= 16, got {n_points}")
    if x_min is None:
        x_min = -12.0 * params.x_scale
    if x_max is None:
        x_max = 12.0 * params.x_scale
    if not x_max > x_min:
        raise ValueError("x_max must exceed x_min")
    grid = np.linspace(x_min, x_max, n_points)
    occ = electronic.excess_occupation(grid, params)
    dif = electronic.diffusion(grid, params)
    gam = electronic.damping(grid, params)
    return CoefficientTable(grid, occ, dif, gam, params.fingerprint())


def find_negative_damping_interval(table: CoefficientTable):
    """Maximal contiguous interval where interpolated gamma < 0, or None.

    Presence of such an interval is the lasing criterion used to flag
    above-threshold voltages.
    """
    spline = table._splines[2]
    xs = np.linspace(table.x_min, table.x_max, 8 * table.x.size)
    g = spline(xs)
    neg = g < 0.0
    if not np.any(neg):
        return None
    # contiguous runs of negative values
    edges = np.flatnonzero(np.diff(neg.astype(int)))
    starts = [0] if neg[0] else []
    starts += [i + 1 for i in edges if not neg[i]]
    stops = [i + 1 for i in edges if neg[i]]
    if neg[-1]:
        stops.append(xs.size)
    best = max(zip(starts, stops), key=lambda ab: xs[ab[1] - 1] - xs[ab[0]])
    lo_i, hi_i = best
    x_lo = xs[lo_i]
    if lo_i > 0:
        x_lo = brentq(spline, xs[lo_i - 1], xs[lo_i])
    x_hi = xs[hi_i - 1]
    if hi_i < xs.size:
        x_hi = brentq(spline, xs[hi_i - 1], xs[hi_i])
    return float(x_lo), float(x_hi)


def negative_damping_present(params: DeviceParams, x_extent_scaled: float = 12.0,
                             n_scan: int = 129) -> bool:
    """Quadrature-only check for a negative-damping region (no full table)."""
    xs = np.linspace(-x_extent_scaled, x_extent_scaled, n_scan) * params.x_scale
    return bool(np.min(electronic.damping(xs, params)) < 0.0)


def lasing_threshold(params: DeviceParams, v_lo: float = 0.0, v_hi: float = 6.0,
                     tol: float = 0.05) -> float:
    """Bisect the voltage where a negative-damping interval first appears.

    Relies on the above-threshold voltage set being upward closed.  Raises
    ConfigError if the bracket does not straddle the threshold.
    """
    if negative_damping_present(params.at_voltage(v_lo)):
        raise ConfigError(f"negative damping already present at V={v_lo}")
    if not negative_damping_present(params.at_voltage(v_hi)):
        raise ConfigError(f"no negative damping at V={v_hi}; bracket too small")
    lo, hi = v_lo, v_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if negative_damping_present(params.at_voltage(mid)):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def write_table_csv(table: CoefficientTable, path, params: DeviceParams | None = None):
    """Export as CSV (x,n_excess,D,gamma) with a JSON sidecar for caching."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "n_excess", "D", "gamma"])
        for row in zip(table.x, table.occupation, table.diffusion, table.damping):
            w.writerow([FLOAT_FMT % v for v in row])
    sidecar = {
        "params_fingerprint": table.params_fingerprint,
        "interpolation_order": table.interpolation_order,
        "n_points": int(table.x.size),
    }
    if params is not None:
        sidecar["device"] = asdict(params)
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
    return path


def read_table_csv(path) -> CoefficientTable:
    """Load a table written by write_table_csv, restoring the fingerprint."""
    path = str(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    with open(path + ".json") as fh:
        sidecar = json.load(fh)
    table = CoefficientTable(
        data["x"], data["n_excess"], data["D"], data["gamma"],
        params_fingerprint=sidecar["params_fingerprint"],
        interpolation_order=int(sidecar.get("interpolation_order", 3)),
    )
    dev = sidecar.get("device")
    if dev is not None:
        params = DeviceParams(
            mass=dev["mass"], omega0=dev["omega0"],
            coupling_energy=dev["coupling_energy"], dot_energy=dev["dot_energy"],
            left=LeadSpec(**dev["left"]), right=LeadSpec(**dev["right"]),
        )
        if params.fingerprint() != table.params_fingerprint:
            raise ConfigError("table sidecar fingerprint does not match its device block")
    return table
