"""Frozen-position electronic steady state of the biased resonant level.

Everything here reduces to frequency integrals over products of Lorentzian
level-width functions, the dot spectral function and Fermi factors.  The
integrands decay algebraically (1/w^4 for occupation-type integrals, 1/w^8
for noise-type integrals), so integrals are evaluated adaptively on a finite
core window wide enough that the Lorentzian envelope has dropped to 1e-12 of
its peak, plus the two semi-infinite tails.

All operations are pure functions of their inputs and accept a scalar or 1-D
array of oscillator positions.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad_vec

from .errors import ConsistencyError, QuadratureError
from .params import DeviceParams, LeadSpec

# Adaptive-quadrature tolerances; the acceptance checks need 1e-6 on the sum
# rule and 1e-8 relative agreement between noise-spectrum code paths, so the
# defaults sit well below that.
EPSABS = 1e-12
EPSREL = 1e-10
_ENVELOPE_FLOOR = 1e-12


def fermi(z):
    """Overflow-safe Fermi factor 1/(exp(z)+1) for z = beta*(w - mu)."""
    z = np.asarray(z, dtype=float)
    t = np.exp(-np.abs(z))
    out = np.where(z >= 0, t / (1.0 + t), 1.0 / (1.0 + t))
    return out if out.ndim else float(out)


def _fermi_weight(z):
    """f(1-f) without cancellation, f the Fermi factor of argument z."""
    t = np.exp(-np.abs(z))
    return t / (1.0 + t) ** 2


def spectral_density(omega, lead: LeadSpec):
    """Lorentzian level-width function of one lead, peak value = coupling."""
    s = np.asarray(omega, dtype=float) - lead.center
    out = lead.coupling * lead.bandwidth**2 / (s * s + lead.bandwidth**2)
    return out if out.ndim else float(out)


def self_energy(omega, lead: LeadSpec):
    """Retarded lead self-energy; Im part is exactly -spectral_density/2."""
    s = np.asarray(omega, dtype=float) - lead.center
    den = 2.0 * (s * s + lead.bandwidth**2)
    out = (lead.coupling * lead.bandwidth * s - 1j * lead.coupling * lead.bandwidth**2) / den
    return out if out.ndim else complex(out)


def _lead_terms(w, lead: LeadSpec, deriv: bool):
    """kappa, Re(chi), f at frequency w; optionally their w-derivatives."""
    s = w - lead.center
    d2 = lead.bandwidth**2
    den = s * s + d2
    kap = lead.coupling * d2 / den
    rechi = 0.5 * lead.coupling * lead.bandwidth * s / den
    z = lead.beta * (w - lead.mu)
    f = fermi(z)
    if not deriv:
        return kap, rechi, f, None, None, None
    dkap = -2.0 * s * kap / den
    drechi = 0.5 * lead.coupling * lead.bandwidth * (d2 - s * s) / (den * den)
    dfbar = lead.beta * _fermi_weight(z)  # derivative of (1 - f)
    return kap, rechi, f, dkap, drechi, dfbar


def _fluxes(w, x, params: DeviceParams, deriv: bool = False):
    """Filled/empty tunneling fluxes u = A*sum(kappa*f), e = A*sum(kappa*(1-f)).

    Returns (u, e, de) at scalar frequency w for an array of positions x;
    de is d(e)/dw from closed-form derivatives (None unless deriv).
    """
    kl, rl, fl, dkl, drl, dfbarl = _lead_terms(w, params.left, deriv)
    kr, rr, fr, dkr, drr, dfbarr = _lead_terms(w, params.right, deriv)
    R = w - params.dot_energy + params.force * x - (rl + rr)
    imag = 0.5 * (kl + kr)
    A = 1.0 / (R * R + imag * imag)
    filled = kl * fl + kr * fr
    empty = kl * (1.0 - fl) + kr * (1.0 - fr)
    u = A * filled
    e = A * empty
    if not deriv:
        return u, e, None
    dR = 1.0 - (drl + drr)
    dI = 0.5 * (dkl + dkr)
    dA = -2.0 * A * A * (R * dR + imag * dI)
    dempty = dkl * (1.0 - fl) + kl * dfbarl + dkr * (1.0 - fr) + kr * dfbarr
    return u, e, dA * empty + A * dempty


def green_function(omega, x, params: DeviceParams):
    """Retarded dot Green function G(w) at frozen position x."""
    w = np.asarray(omega, dtype=float)
    kl, rl, _, *_ = _lead_terms(w, params.left, False)
    kr, rr, _, *_ = _lead_terms(w, params.right, False)
    R = w - params.dot_energy + params.force * np.asarray(x, dtype=float) - (rl + rr)
    imag = 0.5 * (kl + kr)
    out = (R - 1j * imag) / (R * R + imag * imag)
    return out if out.ndim else complex(out)


def spectral_function(omega, x, params: DeviceParams):
    """Dot spectral function A(w) = |G(w)|^2 >= 0."""
    g = green_function(omega, x, params)
    out = np.abs(np.asarray(g)) ** 2
    return out if out.ndim else float(out)


def integration_window(params: DeviceParams, x_extent: float = 0.0, shift: float = 0.0):
    """Core window and interior feature points for the frequency integrals.

    The window spans every band center, chemical potential and reachable
    resonance position, padded so the Lorentzian envelope kappa_L*kappa_R*A^2
    falls below 1e-12 of its peak; tails outside are integrated separately.
    """
    xe = abs(x_extent)
    feats = [
        params.left.center,
        params.right.center,
        params.left.mu,
        params.right.mu,
        params.dot_energy - params.force * xe,
        params.dot_energy + params.force * xe,
    ]
    if shift:
        feats += [f - shift for f in feats]
    envelope_amp = (
        params.left.coupling
        * params.left.bandwidth**2
        * params.right.coupling
        * params.right.bandwidth**2
    )
    # Peak of the envelope is O(A_max^2 * Gamma^2); A_max <= 4/(kappa_L+kappa_R)^2
    # at resonance, so a conservative O(1) bound suffices here.
    pad = (envelope_amp / _ENVELOPE_FLOOR) ** 0.125 + 2.0 * max(
        params.left.bandwidth, params.right.bandwidth
    )
    lo = min(feats) - pad
    hi = max(feats) + pad
    points = sorted(f for f in feats if lo < f < hi)
    return lo, hi, points


def _integrate(f, lo, hi, points, epsabs=EPSABS, epsrel=EPSREL, tails=True):
    """Adaptive integral over the core window plus semi-infinite tails."""
    val, err = quad_vec(f, lo, hi, points=points, epsabs=epsabs, epsrel=epsrel, limit=2000)
    if tails:
        v1, e1 = quad_vec(f, hi, np.inf, epsabs=epsabs, epsrel=epsrel, limit=500)
        v2, e2 = quad_vec(f, -np.inf, lo, epsabs=epsabs, epsrel=epsrel, limit=500)
        val = val + v1 + v2
        err = err + e1 + e2
    scale = np.max(np.abs(val)) if np.ndim(val) else abs(val)
    if not np.all(np.isfinite(val)) or err > 1e3 * (epsabs + epsrel * max(scale, 1e-30)):
        raise QuadratureError(f"frequency integral did not converge (error estimate {err:g})")
    return val


def _as_vector(x):
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    return xa, np.ndim(x) == 0


def check_sum_rule(x, params: DeviceParams, tol: float = 1e-6):
    """Verify the spectral sum rule int dw/2pi A*(kappa_L+kappa_R) = 1.

    Returns the integral; raises QuadratureError when it deviates from 1 by
    more than tol, which signals bad integration limits.
    """
    xa, scalar = _as_vector(x)
    lo, hi, pts = integration_window(params, np.max(np.abs(xa)))

    def integrand(w):
        u, e, _ = _fluxes(w, xa, params)
        return (u + e) / (2.0 * np.pi)

    val = _integrate(integrand, lo, hi, pts)
    if np.max(np.abs(val - 1.0)) > tol:
        raise QuadratureError(
            f"sum rule violated by {np.max(np.abs(val - 1.0)):.3e} (tol {tol:g})"
        )
    return float(val[0]) if scalar else val


def excess_occupation(x, params: DeviceParams):
    """Excess dot charge <n>_x = <c+ c>_x - 1/2 at frozen position x."""
    xa, scalar = _as_vector(x)
    lo, hi, pts = integration_window(params, np.max(np.abs(xa)))

    def integrand(w):
        u, _, _ = _fluxes(w, xa, params)
        return u / (2.0 * np.pi)

    val = _integrate(integrand, lo, hi, pts) - 0.5
    return float(val[0]) if scalar else val


def noise_spectrum(x, omega, params: DeviceParams, epsabs=EPSABS):
    """Charge-noise spectrum S_x(omega) of the fluctuating force.

    S_x(w) = F^2 int dw'/2pi  e(w+w') u(w') with u/e the filled/empty
    tunneling fluxes; at equal lead temperatures and zero bias it satisfies
    detailed balance S_x(-w) = exp(-beta w) S_x(w).
    """
    xa, scalar = _as_vector(x)
    nu = float(omega)
    lo, hi, pts = integration_window(params, np.max(np.abs(xa)), shift=nu)

    def integrand(w):
        u, _, _ = _fluxes(w, xa, params)
        _, e_shift, _ = _fluxes(w + nu, xa, params)
        return e_shift * u / (2.0 * np.pi)

    val = params.force**2 * _integrate(integrand, lo, hi, pts, epsabs=epsabs)
    return float(val[0]) if scalar else val


def diffusion(x, params: DeviceParams):
    """Momentum diffusion coefficient D(x) = S_x(0), dedicated w=0 integral."""
    xa, scalar = _as_vector(x)
    lo, hi, pts = integration_window(params, np.max(np.abs(xa)))

    def integrand(w):
        u, e, _ = _fluxes(w, xa, params)
        return e * u / (2.0 * np.pi)

    val = params.force**2 * _integrate(integrand, lo, hi, pts)
    return float(val[0]) if scalar else val


def damping(x, params: DeviceParams, check: bool = False, fd_step: float = 1e-4,
            check_rtol: float = 5e-3, noise_floor: float = 1e-8):
    """Position-dependent damping rate gamma(x) = (1/m) dS_x(w)/dw at w=0.

    The derivative is taken analytically inside the integrand (product rule
    on kappa*A*(1-f) with closed-form dA/dw, dkappa/dw and df/dw), which
    avoids the subtractive cancellation of a finite difference.  With
    check=True the result is cross-checked against a central finite
    difference of noise_spectrum and a ConsistencyError is raised if the two
    paths disagree by more than check_rtol where |gamma| > noise_floor.
    """
    xa, scalar = _as_vector(x)
    lo, hi, pts = integration_window(params, np.max(np.abs(xa)))

    def integrand(w):
        u, _, de = _fluxes(w, xa, params, deriv=True)
        return u * de / (2.0 * np.pi)

    val = params.force**2 * _integrate(integrand, lo, hi, pts) / params.mass
    if check:
        sp = noise_spectrum(xa, +fd_step, params, epsabs=1e-14)
        sm = noise_spectrum(xa, -fd_step, params, epsabs=1e-14)
        fd = (np.atleast_1d(sp) - np.atleast_1d(sm)) / (2.0 * fd_step * params.mass)
        big = np.abs(val) > noise_floor
        if np.any(big):
            rel = np.abs(fd[big] - val[big]) / np.abs(val[big])
            if np.max(rel) > check_rtol:
                raise ConsistencyError(
                    f"analytic vs finite-difference damping mismatch {np.max(rel):.2e} "
                    f"(rtol {check_rtol:g})"
                )
    return float(val[0]) if scalar else val
