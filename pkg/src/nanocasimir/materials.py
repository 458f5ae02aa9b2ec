"""Dielectric response at imaginary frequency and Fresnel coefficients.

Silicon follows a Lorentz interband term plus a Drude term for the dopant
carriers::

    eps(i xi) = eps_inf + (eps_static - eps_inf) / (1 + xi^2 / omega_0^2)
                + omega_p^2 / (xi (xi + gamma))
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .constants import C_LIGHT, E_CHARGE, EPS0, M_E
from .errors import DomainError


class MaterialKind(str, enum.Enum):
    PERFECT_CONDUCTOR = "perfect-conductor"
    VACUUM = "vacuum"
    DRUDE_LORENTZ = "drude-lorentz"


@dataclass(frozen=True)
class DielectricModel:
    """Permittivity model evaluated on the imaginary frequency axis.

    Numeric fields are ignored for the perfect conductor and vacuum kinds.
    Frequencies are in rad/s.
    """

    kind: MaterialKind = MaterialKind.DRUDE_LORENTZ
    eps_inf: float = 1.0
    eps_static: float = 1.0
    omega_0: float = 1.0
    omega_p: float = 0.0
    gamma: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", MaterialKind(self.kind))
        if self.kind is not MaterialKind.DRUDE_LORENTZ:
            return
        if self.eps_inf < 1:
            raise DomainError(f"eps_inf must be >= 1, got {self.eps_inf}")
        if self.eps_static < self.eps_inf:
            raise DomainError("eps_static must be >= eps_inf")
        if min(self.omega_0, self.omega_p, self.gamma) < 0:
            raise DomainError("omega_0, omega_p and gamma must be non-negative")
        if self.omega_0 == 0 and self.eps_static > self.eps_inf:
            raise DomainError("omega_0 must be positive when eps_static > eps_inf")

    @property
    def is_perfect_conductor(self) -> bool:
        return self.kind is MaterialKind.PERFECT_CONDUCTOR

    @property
    def is_vacuum(self) -> bool:
        return self.kind is MaterialKind.VACUUM

    @property
    def has_drude(self) -> bool:
        return self.kind is MaterialKind.DRUDE_LORENTZ and self.omega_p > 0

    @property
    def label(self) -> str:
        return self.name or self.kind.value

    def static_permittivity(self) -> float:
        """eps(0) without the carrier term (finite for any Drude-Lorentz model)."""
        if self.kind is MaterialKind.VACUUM:
            return 1.0
        if self.is_perfect_conductor:
            return math.inf
        return self.eps_static

    def lorentz_part(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.omega_0 == 0:
            return np.full_like(xi, self.eps_inf)
        return self.eps_inf + (self.eps_static - self.eps_inf) / (1.0 + (xi / self.omega_0) ** 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass(frozen=True)
class CarrierTransport:
    """Measured transport data of a doped semiconductor (SI units)."""

    carrier_density: float  # m^-3
    resistivity: float  # ohm m
    effective_mass_ratio: float  # m*/m_e

    def __post_init__(self):
        for field in ("carrier_density", "resistivity", "effective_mass_ratio"):
            value = getattr(self, field)
            if not value > 0:
                raise DomainError(f"{field} must be positive, got {value}")


PAPER_SILICON = DielectricModel(
    kind=MaterialKind.DRUDE_LORENTZ,
    eps_inf=1.035,
    eps_static=11.87,
    omega_0=6.6e15,
    omega_p=4.53e14,
    gamma=7.69e13,
    name="paper-silicon",
)
PERFECT_CONDUCTOR = DielectricModel(kind=MaterialKind.PERFECT_CONDUCTOR, name="perfect-conductor")
VACUUM = DielectricModel(kind=MaterialKind.VACUUM, name="vacuum")

# p-doped device layer at 4 K
PAPER_TRANSPORT = CarrierTransport(
    carrier_density=2.2e25, resistivity=4.23e-5, effective_mass_ratio=0.34
)

PRESETS = {
    "paper-silicon": PAPER_SILICON,
    "perfect-conductor": PERFECT_CONDUCTOR,
    "vacuum": VACUUM,
}


def drude_params_from_transport(t: CarrierTransport) -> tuple[float, float]:
    """Plasma frequency and relaxation rate (rad/s) from transport data."""
    if not (t.carrier_density > 0 and t.resistivity > 0 and t.effective_mass_ratio > 0):
        raise DomainError("transport parameters must be positive")
    m_eff = t.effective_mass_ratio * M_E
    omega_p = math.sqrt(t.carrier_density * E_CHARGE**2 / (EPS0 * m_eff))
    gamma = t.carrier_density * E_CHARGE**2 * t.resistivity / m_eff
    return omega_p, gamma


def epsilon_i_xi(m: DielectricModel, xi):
    """Permittivity at imaginary frequency ``xi`` (rad/s).

    Returns ``inf`` for the perfect conductor; callers doing arithmetic must
    branch on ``m.is_perfect_conductor`` instead of using that value.
    """
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0):
        raise DomainError("xi must be non-negative")
    if m.is_vacuum:
        out = np.ones_like(xi_arr)
    elif m.is_perfect_conductor:
        out = np.full_like(xi_arr, np.inf)
    else:
        if m.omega_p > 0 and np.any(xi_arr == 0):
            raise DomainError("static divergence: the Drude term is infinite at xi = 0")
        out = m.lorentz_part(xi_arr)
        if m.omega_p > 0:
            out = out + m.omega_p**2 / (xi_arr * (xi_arr + m.gamma))
    return float(out) if np.ndim(xi) == 0 else out


def fresnel_imaginary(eps, k_par, xi, perfect_conductor=False):
    """TE and TM reflection coefficients of a half-space at imaginary frequency.

    ``eps`` is the permittivity at ``xi``; ``k_par`` the in-plane wavevector
    (rad/m). The perfect conductor is requested with the flag and returns
    (-1, +1).
    """
    if perfect_conductor:
        shape = np.broadcast(np.asarray(k_par), np.asarray(xi)).shape
        r_te, r_tm = -np.ones(shape), np.ones(shape)
    else:
        eps = np.asarray(eps, dtype=float)
        k_par = np.asarray(k_par, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if np.any(eps < 1):
            raise DomainError("eps must be >= 1")
        if np.any(k_par < 0) or np.any(xi < 0):
            raise DomainError("k_par and xi must be non-negative")
        kappa = np.sqrt(k_par**2 + (xi / C_LIGHT) ** 2)
        kappa1 = np.sqrt(k_par**2 + eps * (xi / C_LIGHT) ** 2)
        if np.any(kappa == 0):
            raise DomainError("k_par and xi cannot both vanish")
        r_tm = (eps * kappa - kappa1) / (eps * kappa + kappa1)
        r_te = (kappa - kappa1) / (kappa + kappa1)
    if r_te.ndim == 0:
        return float(r_te), float(r_tm)
    return r_te, r_tm


def reflection_from_ratio(m: DielectricModel, xi, t):
    """Reflection coefficients written with ``t = xi / (c kappa)`` in [0, 1].

    Same coefficients as :func:`fresnel_imaginary`, with the vacuum wave number
    scaled out so the Lifshitz integrand stays dimensionless. ``xi`` must be
    positive for models with a Drude term.
    """
    xi, t = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(t, dtype=float))
    if m.is_perfect_conductor:
        return -np.ones(xi.shape), np.ones(xi.shape)
    if m.is_vacuum:
        return np.zeros(xi.shape), np.zeros(xi.shape)
    eps = m.lorentz_part(xi)
    if m.omega_p > 0:
        eps = eps + m.omega_p**2 / (xi * (xi + m.gamma))
    s = np.sqrt(1.0 + (eps - 1.0) * t * t)
    return (1.0 - s) / (1.0 + s), (eps - s) / (eps + s)


def material_from_dict(d: dict) -> DielectricModel:
    """Build a model from config keys (kind, eps_inf, eps_static, omega_0, omega_p, gamma).

    A ``preset`` key selects a bundled model; a ``transport`` block
    (carrier_density, resistivity, effective_mass_ratio) replaces omega_p
    and gamma by their transport-derived values.
    """
    d = dict(d)
    if "preset" in d:
        return get_preset(d.pop("preset"))
    kind = MaterialKind(d.pop("kind", MaterialKind.DRUDE_LORENTZ.value))
    transport = d.pop("transport", None)
    if transport is not None:
        wp, g = drude_params_from_transport(CarrierTransport(**transport))
        d["omega_p"], d["gamma"] = wp, g
    allowed = {"eps_inf", "eps_static", "omega_0", "omega_p", "gamma", "name"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown material keys: {sorted(unknown)}")
    return DielectricModel(kind=kind, **d)


def load_material(text: str) -> DielectricModel:
    return material_from_dict(json.loads(text))


def get_preset(name: str) -> DielectricModel:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown material preset {name!r}; known: {sorted(PRESETS)}") from None
