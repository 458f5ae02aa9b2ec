"""Lifshitz energy and pressure between two parallel half-spaces.

At zero temperature the double integral over imaginary frequency and
in-plane wavevector is rewritten with ``u = 2 kappa a`` and
``t = xi / (c kappa)``, giving

    E/A = hbar c / (32 pi^2 a^3) * int_0^1 dt int_0^inf du u^2 sum_p ln(1 - r_p^a r_p^b e^-u)
    P   = -hbar c / (32 pi^2 a^4) * int_0^1 dt int_0^inf du u^3 sum_p x_p / (1 - x_p)

with ``x_p = r_p^a r_p^b e^-u``. Both integrands decay like ``e^-u``
independently of the gap. At finite temperature the frequency integral
becomes a Matsubara sum with the n = 0 term halved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT, HBAR, K_B
from .errors import AccuracyError, DomainError
from .materials import DielectricModel, reflection_from_ratio
from .quadrature import adaptive_gk

U_MAX = 80.0
_U_BREAKS = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 48.0, U_MAX)
_T_BREAKS = (0.0, 0.05, 0.25, 0.5, 0.75, 1.0)

PRESCRIPTIONS = ("drude", "plasma")


@dataclass(frozen=True)
class PlateKernelConfig:
    temperature: float = 0.0  # K
    rel_tolerance: float = 1e-6
    max_matsubara_terms: int = 200_000
    quadrature_depth: int = 40
    zero_frequency: str = "drude"

    def __post_init__(self):
        if self.temperature < 0:
            raise DomainError("temperature must be >= 0")
        if not 0 < self.rel_tolerance <= 1e-2:
            raise DomainError("rel_tolerance must lie in (0, 1e-2]")
        if self.max_matsubara_terms < 1 or self.quadrature_depth < 1:
            raise DomainError("term and depth budgets must be >= 1")
        if self.zero_frequency not in PRESCRIPTIONS:
            raise DomainError(f"zero_frequency must be one of {PRESCRIPTIONS}")


def _check_gaps(gap):
    gaps = np.atleast_1d(np.asarray(gap, dtype=float))
    if np.any(~(gaps > 0)):
        raise DomainError("gap must be positive")
    return gaps


def _pair_terms(ra, rb, e_u):
    """x_p = r^a r^b e^-u for TE and TM."""
    return ra[0] * rb[0] * e_u, ra[1] * rb[1] * e_u


def _zero_t_integrals(a, b, gaps, cfg):
    """Dimensionless energy and pressure integrals at T = 0, shape (n_gaps, 2)."""
    inner_rtol = cfg.rel_tolerance / 10
    scale = C_LIGHT / (2.0 * gaps)  # xi = scale * u * t

    def outer(t):
        def inner(u):
            uu = u[:, None, None]
            tt = t[None, :, None]
            xi = scale[None, None, :] * uu * tt
            ra = reflection_from_ratio(a, xi, tt)
            rb = reflection_from_ratio(b, xi, tt)
            x_te, x_tm = _pair_terms(ra, rb, np.exp(-uu))
            energy = uu**2 * (np.log1p(-x_te) + np.log1p(-x_tm))
            pressure = uu**3 * (x_te / (1.0 - x_te) + x_tm / (1.0 - x_tm))
            return np.stack([energy, pressure], axis=-1)

        res = adaptive_gk(inner, _U_BREAKS, rtol=inner_rtol, max_depth=cfg.quadrature_depth)
        return res.value

    res = adaptive_gk(outer, _T_BREAKS, rtol=cfg.rel_tolerance, max_depth=cfg.quadrature_depth)
    return res.value


def _zero_frequency_reflection(m: DielectricModel, u, gap, prescription):
    """(r_TE, r_TM) at xi = 0 as functions of u = 2 k a."""
    if m.is_perfect_conductor:
        return -np.ones_like(u), np.ones_like(u)
    if m.is_vacuum:
        return np.zeros_like(u), np.zeros_like(u)
    if m.omega_p > 0:
        r_tm = np.ones_like(u)
        if prescription == "plasma":
            q = 2.0 * gap * m.omega_p / C_LIGHT
            root = np.sqrt(u * u + q * q)
            r_te = (u - root) / (u + root)
        else:
            r_te = np.zeros_like(u)
        return r_te, r_tm
    eps = m.static_permittivity()
    return np.zeros_like(u), np.full_like(u, (eps - 1.0) / (eps + 1.0))


def _matsubara_terms(a, b, gaps, cfg, n):
    """Dimensionless term integrals for Matsubara indices ``n``, shape (len(n), n_gaps, 2).

    Term n is int_{u_n}^inf du u^k sum_p ... with u_n = 2 a xi_n / c,
    k = 1 for the energy and k = 2 for the pressure.
    """
    xi1 = 2.0 * math.pi * K_B * cfg.temperature / HBAR
    xi_n = xi1 * n.astype(float)
    u_n = 2.0 * gaps[None, :] * xi_n[:, None] / C_LIGHT  # (n, gaps)
    zero = n == 0

    def inner(v):
        vv = v[:, None, None]
        uu = u_n[None] + vv
        xi = np.broadcast_to(xi_n[None, :, None], uu.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(xi > 0, u_n[None] / uu, 0.0)
        safe_xi = np.where(xi > 0, xi, 1.0)
        ra = reflection_from_ratio(a, safe_xi, t)
        rb = reflection_from_ratio(b, safe_xi, t)
        if np.any(zero):
            za = _zero_frequency_reflection(a, uu, gaps[None, None, :], cfg.zero_frequency)
            zb = _zero_frequency_reflection(b, uu, gaps[None, None, :], cfg.zero_frequency)
            mask = np.broadcast_to(zero[None, :, None], uu.shape)
            ra = tuple(np.where(mask, z, r) for z, r in zip(za, ra))
            rb = tuple(np.where(mask, z, r) for z, r in zip(zb, rb))
        x_te, x_tm = _pair_terms(ra, rb, np.exp(-uu))
        energy = uu * (np.log1p(-x_te) + np.log1p(-x_tm))
        pressure = uu**2 * (x_te / (1.0 - x_te) + x_tm / (1.0 - x_tm))
        return np.stack([energy, pressure], axis=-1)

    res = adaptive_gk(inner, _U_BREAKS, rtol=cfg.rel_tolerance / 10, max_depth=cfg.quadrature_depth)
    return res.value


def _finite_t_integrals(a, b, gaps, cfg):
    """Primed Matsubara sums of the dimensionless term integrals, shape (n_gaps, 2)."""
    total = 0.5 * _matsubara_terms(a, b, gaps, cfg, np.array([0]))[0]
    start, block = 1, 64
    last = None
    while True:
        if start > cfg.max_matsubara_terms:
            raise AccuracyError(
                "Matsubara series not converged within max_matsubara_terms",
                estimate=total,
                error_bound=None if last is None else np.abs(last),
            )
        stop = min(start + block, cfg.max_matsubara_terms + 1)
        n = np.arange(start, stop)
        terms = _matsubara_terms(a, b, gaps, cfg, n)
        for term in terms:  # fixed ascending order
            total = total + term
        tail = _tail_estimate(terms)
        last = tail
        if np.all(np.abs(tail) <= cfg.rel_tolerance / 10 * np.abs(total)):
            return total
        start = stop
        block = min(2 * block, 4096)


def _tail_estimate(terms):
    """Geometric extrapolation of the remaining series from the last two terms."""
    if len(terms) < 2:
        return np.abs(terms[-1]) * np.inf
    t1, t2 = terms[-2], terms[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(t1 != 0, t2 / t1, 0.0)
        tail = np.where((q >= 0) & (q < 1), t2 * q / (1.0 - q), np.inf)
    return np.where(t2 == 0, 0.0, tail)


def plate_integrals(a: DielectricModel, b: DielectricModel, gaps, cfg: PlateKernelConfig | None = None):
    """Energy per area (J/m^2) and pressure (N/m^2) for an array of gaps."""
    cfg = cfg or PlateKernelConfig()
    gaps = _check_gaps(gaps)
    if cfg.temperature == 0:
        ints = _zero_t_integrals(a, b, gaps, cfg)
        energy = HBAR * C_LIGHT / (32 * math.pi**2 * gaps**3) * ints[:, 0]
        pressure = -HBAR * C_LIGHT / (32 * math.pi**2 * gaps**4) * ints[:, 1]
    else:
        ints = _finite_t_integrals(a, b, gaps, cfg)
        kt = K_B * cfg.temperature
        energy = kt / (8 * math.pi * gaps**2) * ints[:, 0]
        pressure = -kt / (8 * math.pi * gaps**3) * ints[:, 1]
    return energy, pressure


def _scalar_or_array(values, like):
    return float(values[0]) if np.ndim(like) == 0 else values


def plate_energy_per_area(a, b, gap, cfg: PlateKernelConfig | None = None):
    """Casimir energy per unit area (J/m^2) of two half-spaces ``gap`` apart."""
    energy, _ = plate_integrals(a, b, gap, cfg)
    return _scalar_or_array(energy, gap)


def plate_pressure(a, b, gap, cfg: PlateKernelConfig | None = None):
    """Casimir pressure (N/m^2); negative means attraction.

    Uses the analytic gap derivative of the integrand, not a difference of
    energies.
    """
    _, pressure = plate_integrals(a, b, gap, cfg)
    return _scalar_or_array(pressure, gap)


def ideal_energy_per_area(gap):
    """Perfect-mirror energy -pi^2 hbar c / (720 a^3)."""
    return -math.pi**2 * HBAR * C_LIGHT / (720 * np.asarray(gap, dtype=float) ** 3)


def ideal_pressure(gap):
    """Perfect-mirror pressure -pi^2 hbar c / (240 a^4)."""
    return -math.pi**2 * HBAR * C_LIGHT / (240 * np.asarray(gap, dtype=float) ** 4)


def zero_term_pressure(a, b, gap, temperature, prescription="drude", rel_tolerance=1e-6):
    """Pressure carried by the (halved) n = 0 Matsubara term alone."""
    if temperature <= 0:
        raise DomainError("temperature must be positive")
    cfg = PlateKernelConfig(temperature=temperature, rel_tolerance=rel_tolerance,
                            zero_frequency=prescription)
    gaps = _check_gaps(gap)
    term = 0.5 * _matsubara_terms(a, b, gaps, cfg, np.array([0]))[0]
    p0 = -K_B * temperature / (8 * math.pi * gaps**3) * term[:, 1]
    return _scalar_or_array(p0, gap)


def matsubara_zero_fraction(a, b, gap, temperature, prescription="drude", rel_tolerance=1e-6):
    """|P_0| / |P(T)|: the share of the finite-temperature pressure from n = 0."""
    if temperature <= 0:
        raise DomainError("matsubara_zero_fraction needs T > 0")
    if np.any(np.asarray(gap) <= 0):
        raise DomainError("gap must be positive")
    cfg = PlateKernelConfig(temperature=temperature, rel_tolerance=rel_tolerance,
                            zero_frequency=prescription)
    p_t = plate_pressure(a, b, gap, cfg)
    p_0 = zero_term_pressure(a, b, gap, temperature, prescription, rel_tolerance)
    return np.abs(p_0) / np.abs(p_t)


def thermal_report(a, b, gap, temperature, rel_tolerance=1e-6):
    """Finite-T pressure and zero-term share under both n = 0 prescriptions."""
    out = {}
    for presc in PRESCRIPTIONS:
        cfg = PlateKernelConfig(temperature=temperature, rel_tolerance=rel_tolerance,
                                zero_frequency=presc)
        out[presc] = {
            "pressure": plate_pressure(a, b, gap, cfg),
            "zero_fraction": matsubara_zero_fraction(a, b, gap, temperature, presc, rel_tolerance),
        }
    return out
