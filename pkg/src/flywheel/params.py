"""Device description: two leads, a resonant level, and the mechanical mode.

Units: hbar = e = k_B = 1 throughout; temperatures enter only through the
inverse temperature beta.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class LeadSpec:
    """One electronic reservoir with a Lorentzian band.

    Parameters
    ----------
    center : float
        Band center frequency (energy units).
    bandwidth : float
        Lorentzian half-width of the band (energy units), > 0.
    coupling : float
        Peak level-width Gamma (energy units), > 0.
    beta : float
        Inverse temperature (1/energy), > 0.
    mu : float
        Chemical potential (energy units).
    """

    center: float
    bandwidth: float
    coupling: float
    beta: float
    mu: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"lead bandwidth must be > 0, got {self.bandwidth}")
        if not self.coupling > 0:
            raise ValueError(f"lead coupling must be > 0, got {self.coupling}")
        if not self.beta > 0:
            raise ValueError(f"lead beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class DeviceParams:
    """Full physical configuration of the electromechanical device.

    The half-filling convention requires the dot energy to sit midway
    between the two chemical potentials; configurations violating it are
    rejected because the excess-charge shortcut <n> = <c+c> - 1/2 would
    not hold.
    """

    mass: float
    omega0: float
    coupling_energy: float  # lambda = F*x_scale/2
    dot_energy: float
    left: LeadSpec
    right: LeadSpec

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be > 0, got {self.mass}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")
        mid = 0.5 * (self.left.mu + self.right.mu)
        if abs(self.dot_energy - mid) > 1e-12:
            raise ValueError(
                "dot_energy must equal (mu_L + mu_R)/2 for the half-filling "
                f"convention; got {self.dot_energy} vs {mid}"
            )

    @property
    def x_scale(self) -> float:
        """Zero-point length x0 = (2 / m*omega0)^(1/2)."""
        return math.sqrt(2.0 / (self.mass * self.omega0))

    @property
    def p_scale(self) -> float:
        """Zero-point momentum p0 = (2 m omega0)^(1/2); x_scale * p_scale = 2."""
        return math.sqrt(2.0 * self.mass * self.omega0)

    @property
    def force(self) -> float:
        """Force per unit excess charge, F = 2*lambda / x0."""
        return 2.0 * self.coupling_energy / self.x_scale

    @property
    def bias(self) -> float:
        """Electrochemical potential difference mu_L - mu_R."""
        return self.left.mu - self.right.mu

    @property
    def voltage(self) -> float:
        """Symmetric drive voltage V with mu_L = -mu_R = V (figure-axis value)."""
        return self.left.mu

    def at_voltage(self, voltage: float) -> "DeviceParams":
        """Same device with the leads re-biased to mu_L = -mu_R = voltage."""
        return replace(
            self,
            left=replace(self.left, mu=float(voltage)),
            right=replace(self.right, mu=-float(voltage)),
        )

    def fingerprint(self) -> str:
        """Short stable hash of the full parameter set."""
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @classmethod
    def symmetric(
        cls,
        voltage: float = 0.0,
        *,
        mass: float = 1.0,
        omega0: float = 0.2,
        coupling_energy: float = 0.1,
        band_center: float = 0.5,
        bandwidth: float = 1.0,
        coupling: float = 2.0,
        beta: float = 0.5,
    ) -> "DeviceParams":
        """Mirror-symmetric device: bands at +/-band_center, mu_L = -mu_R = voltage.

        Defaults are the reference parameter set used across the package
        (omega0=0.2, m=1, lambda=0.1, band centers +/-0.5, delta=1, Gamma=2,
        beta=0.5).
        """
        return cls(
            mass=mass,
            omega0=omega0,
            coupling_energy=coupling_energy,
            dot_energy=0.0,
            left=LeadSpec(band_center, bandwidth, coupling, beta, float(voltage)),
            right=LeadSpec(-band_center, bandwidth, coupling, beta, -float(voltage)),
        )
