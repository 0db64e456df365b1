"""Exact guided modes of a circular step-index waveguide.

The characteristic equation is solved in the pole-free form

    g(u) = J_l'(u) - u J_l(u) * a(u, w)

where ``a`` is one root of the quadratic in ``J_l'/(u J_l)`` obtained from the
vectorial matching conditions.  Neither ``J_l`` nor ``J_l'`` appears in a
denominator, so every sign change of ``g`` on the scan grid brackets a true
root.  The ``+`` root gives EH (TE for l=0), the ``-`` root gives HE (TM).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import jv, kv, kve

from ..constants import C0, EPS0, MU0

SCAN_STEP = 1e-4
_EDGE = 1e-13


@dataclass(frozen=True)
class GuideSpec:
    core_index: float
    clad_index: float
    core_diameter_nm: float
    wavelength_nm: float

    def __post_init__(self):
        if not self.core_index > self.clad_index >= 1.0:
            raise ValueError("need core_index > clad_index >= 1")
        if self.core_diameter_nm < 0 or self.wavelength_nm <= 0:
            raise ValueError("diameter must be >= 0 and wavelength > 0")

    @property
    def k0(self) -> float:
        return 2 * math.pi / self.wavelength_nm

    @property
    def radius_nm(self) -> float:
        return 0.5 * self.core_diameter_nm

    @property
    def v_number(self) -> float:
        return self.k0 * self.radius_nm * math.sqrt(self.core_index**2 - self.clad_index**2)

    def with_diameter(self, d_nm: float) -> "GuideSpec":
        return GuideSpec(self.core_index, self.clad_index, float(d_nm), self.wavelength_nm)


def hexagon_equivalent_diameter(vertex_to_vertex_nm: float) -> float:
    """Diameter of the circular guide equivalent to a hexagonal one."""
    if vertex_to_vertex_nm < 0:
        raise ValueError("diameter must be non-negative")
    return vertex_to_vertex_nm / 1.14


def _uw(guide: GuideSpec, neff):
    ak = guide.k0 * guide.radius_nm
    n1, n2 = guide.core_index, guide.clad_index
    neff = np.asarray(neff, dtype=float)
    return ak * np.sqrt(n1 * n1 - neff * neff), ak * np.sqrt(neff * neff - n2 * n2)


def _branch(l, u, w, r, sign):
    """The ``sign`` root of the quadratic for J_l'(u)/(u J_l(u))."""
    # K_l'/K_l by recurrence; the scaled functions share the exp(-w) factor
    b = -0.5 * (kve(l - 1, w) + kve(l + 1, w)) / (w * kve(l, w))
    rr = l * l * (1 / u**2 + 1 / w**2) * (1 / u**2 + r / w**2)
    return -(1 + r) * b / 2 + sign * np.sqrt(((1 - r) * b / 2) ** 2 + rr), b


def characteristic(guide: GuideSpec, l: int, sign: int, neff):
    """Pole-free characteristic function; zero at a guided mode."""
    u, w = _uw(guide, neff)
    a, _ = _branch(l, u, w, (guide.clad_index / guide.core_index) ** 2, sign)
    return 0.5 * (jv(l - 1, u) - jv(l + 1, u)) - u * jv(l, u) * a


def residual(guide: GuideSpec, l: int, sign: int, neff: float) -> float:
    """Characteristic function scaled by the size of its two terms."""
    u, w = _uw(guide, neff)
    a, _ = _branch(l, u, w, (guide.clad_index / guide.core_index) ** 2, sign)
    t1, t2 = 0.5 * (jv(l - 1, u) - jv(l + 1, u)), u * jv(l, u) * a
    return float(abs(t1 - t2) / max(abs(t1) + abs(t2), 1e-300))


def _scan_grid(n2, n1):
    span = n1 - n2
    n = max(int(math.ceil(span / SCAN_STEP)), 2)
    lin = n2 + span * np.linspace(0, 1, n + 1)[1:-1]
    # the scan step cannot resolve roots hugging either light line
    edge = np.logspace(math.log10(_EDGE), math.log10(SCAN_STEP), 60)
    return np.unique(np.concatenate([n2 + edge * n2, n1 - edge * n1, lin]))


def _bisect(f, lo, hi, flo):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _bessel_tables(u, w, lmax: int):
    """J_n(u) and exp(w) K_n(w) for n = 0 .. lmax + 1, by recurrence.

    J is recurred downward from two directly evaluated orders and K upward
    from K_0, K_1; both directions are the stable ones.  The tables only
    steer the scan; roots are polished with direct evaluations.
    """
    top = lmax + 1
    J = np.empty((top + 1,) + u.shape)
    J[top] = jv(top, u)
    J[top - 1] = jv(top - 1, u)
    for n in range(top - 1, 0, -1):
        J[n - 1] = (2.0 * n / u) * J[n] - J[n + 1]
    K = np.empty((top + 1,) + w.shape)
    K[0] = kve(0, w)
    K[1] = kve(1, w)
    for n in range(1, top):
        K[n + 1] = K[n - 1] + (2.0 * n / w) * K[n]
    return J, K


def _scan(guide: GuideSpec, lmax: int) -> dict:
    """Bracketed roots of every order up to ``lmax``: {(l, sign): [n_eff, ...]}."""
    n1, n2 = guide.core_index, guide.clad_index
    out = {(l, s): [] for l in range(lmax + 1) for s in (-1, 1)}
    if guide.core_diameter_nm == 0:
        return out
    grid = _scan_grid(n2, n1)
    r = (n2 / n1) ** 2
    with np.errstate(all="ignore"):
        u, w = _uw(guide, grid)
        J, K = _bessel_tables(u, w, lmax)
        for l in range(lmax + 1):
            jm = J[1] * -1.0 if l == 0 else J[l - 1]
            km = K[1] if l == 0 else K[l - 1]
            d = 0.5 * (jm - J[l + 1])
            uj = u * J[l]
            b = -0.5 * (km + K[l + 1]) / (w * K[l])
            rr = l * l * (1 / u**2 + 1 / w**2) * (1 / u**2 + r / w**2)
            root = np.sqrt(((1 - r) * b / 2) ** 2 + rr)
            for sign in (-1, 1):
                g = d - uj * (-(1 + r) * b / 2 + sign * root)
                ok = np.isfinite(g)
                x, gg = grid[ok], g[ok]
                f = lambda v, l=l, s=sign: float(characteristic(guide, l, s, v))  # noqa: E731
                for i in np.nonzero(np.signbit(gg[1:]) != np.signbit(gg[:-1]))[0]:
                    # a bracket only counts if the direct evaluation agrees
                    lo, hi = f(x[i]), f(x[i + 1])
                    if np.signbit(lo) != np.signbit(hi):
                        out[(l, sign)].append(_bisect(f, x[i], x[i + 1], lo))
                out[(l, sign)].sort(reverse=True)
    return out


@dataclass(frozen=True)
class GuidedMode:
    family: str
    l: int
    m: int
    n_eff: float
    guide: GuideSpec
    residual: float
    u: float
    w: float
    s: float = 0.0
    r_nm: np.ndarray = field(default=None, repr=False, compare=False)
    e_t: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def label(self) -> str:
        return f"{self.family}{self.l}{self.m}"

    def fields(self, r_nm):
        """Radial profiles (E_r, E_phi, H_r, H_phi) of the unit-amplitude mode, SI."""
        return _profiles(self, np.asarray(r_nm, dtype=float))

    def power(self) -> float:
        """Guided power [W] of the unit-amplitude mode."""
        return _power(self)

    def axis_field_sq(self) -> float:
        """|E_transverse|^2 on the axis for the unit-amplitude mode."""
        if self.l != 1:
            return 0.0
        er, _, _, _ = _profiles(self, np.array([0.0]))
        return float(er[0] ** 2)

    def coupling_weight(self) -> float:
        """|E_transverse(axis)|^2 per unit guided power [V^2 m^-2 W^-1]."""
        return self.axis_field_sq() / self.power()


def _s_param(guide, l, sign, u, w):
    if l == 0:
        return 0.0
    r = (guide.clad_index / guide.core_index) ** 2
    a, b = _branch(l, u, w, r, sign)
    return float(l * (1 / u**2 + 1 / w**2) / (a + b))


def _profiles(mode: GuidedMode, r_nm):
    """Unscaled radial field amplitudes in SI units (per unit E_z amplitude for
    hybrid modes, per unit core E_phi or E_r for TE or TM).  The azimuthal
    factors cos(l phi) / sin(l phi) are omitted."""
    g = mode.guide
    a = g.radius_nm * 1e-9
    n1, n2 = g.core_index, g.clad_index
    k0 = g.k0 * 1e9
    omega = k0 * C0
    beta = mode.n_eff * k0
    u, w, l, s = mode.u, mode.w, mode.l, mode.s
    R = r_nm * 1e-9 / a
    core = R <= 1.0
    Rc, Rk = np.where(core, R, 1.0), np.where(core, 1.0, R)
    er = np.empty_like(R)
    ep, hr, hp = np.empty_like(R), np.empty_like(R), np.empty_like(R)
    ratio_j = jv(l, u)
    if l == 0:
        ju, kw = jv(1, u), kv(1, w)
        jc = jv(1, u * Rc)
        kc = kv(1, w * Rk) / kw * ju
        if mode.family == "TE":
            er[:] = 0.0
            hp[:] = 0.0
            ep[:] = np.where(core, jc, kc)
            hr[:] = -beta / (omega * MU0) * ep
        else:
            ep[:] = 0.0
            hr[:] = 0.0
            er[:] = np.where(core, jc, (n1 / n2) ** 2 * kc)
            hp[:] = omega * EPS0 * np.where(core, n1**2, n2**2) * er / beta
        return er, ep, hr, hp
    s1 = (beta / (k0 * n1)) ** 2 * s
    s0 = (beta / (k0 * n2)) ** 2 * s
    jm, jp = jv(l - 1, u * Rc), jv(l + 1, u * Rc)
    km, kp = kve(l - 1, w * Rk), kve(l + 1, w * Rk)
    scale_k = ratio_j / (w * kve(l, w)) * np.exp(-w * (Rk - 1.0))
    er_c = beta * a / u * ((1 - s) / 2 * jm - (1 + s) / 2 * jp)
    ep_c = beta * a / u * ((1 - s) / 2 * jm + (1 + s) / 2 * jp)
    hr_c = omega * EPS0 * n1**2 * a / u * ((1 - s1) / 2 * jm + (1 + s1) / 2 * jp)
    hp_c = omega * EPS0 * n1**2 * a / u * ((1 - s1) / 2 * jm - (1 + s1) / 2 * jp)
    er_k = beta * a * scale_k * ((1 - s) / 2 * km + (1 + s) / 2 * kp)
    ep_k = beta * a * scale_k * ((1 - s) / 2 * km - (1 + s) / 2 * kp)
    hr_k = omega * EPS0 * n2**2 * a * scale_k * ((1 - s0) / 2 * km - (1 + s0) / 2 * kp)
    hp_k = omega * EPS0 * n2**2 * a * scale_k * ((1 - s0) / 2 * km + (1 + s0) / 2 * kp)
    er[:] = np.where(core, er_c, er_k)
    ep[:] = np.where(core, ep_c, ep_k)
    hr[:] = np.where(core, hr_c, hr_k)
    hp[:] = np.where(core, hp_c, hp_k)
    return er, ep, hr, hp


def _power(mode: GuidedMode) -> float:
    a_nm = mode.guide.radius_nm

    def density(r_nm):
        er, ep, hr, hp = _profiles(mode, np.array([r_nm]))
        if mode.l == 0:
            return float(er[0] * hp[0] - ep[0] * hr[0]) * r_nm
        return float(er[0] * hp[0] + ep[0] * hr[0]) * r_nm

    tail = 40.0 * a_nm / max(mode.w, 1e-12)
    core = integrate.quad(density, 0.0, a_nm, epsabs=0, epsrel=1e-11, limit=200)[0]
    clad = integrate.quad(density, a_nm, a_nm + tail, epsabs=0, epsrel=1e-11, limit=400)[0]
    ang = 2 * math.pi if mode.l == 0 else math.pi
    return 0.5 * ang * (core + clad) * 1e-18


def _classify(l: int, sign: int) -> str:
    if l == 0:
        return "TE" if sign > 0 else "TM"
    return "EH" if sign > 0 else "HE"


def _build(guide: GuideSpec, l: int, sign: int, roots, profile_points: int) -> list[GuidedMode]:
    fam = _classify(l, sign)
    out = []
    for m, ne in enumerate(roots, start=1):
        u, w = (float(v) for v in _uw(guide, ne))
        s = _s_param(guide, l, sign, u, w)
        mode = GuidedMode(fam, l, m, float(ne), guide, residual(guide, l, sign, ne), u, w, s)
        if profile_points:
            r = np.linspace(0.0, 2.0 * guide.radius_nm, profile_points)
            er, ep, _, _ = _profiles(mode, r)
            et = np.stack([er, ep]) / math.sqrt(mode.power())
            mode = GuidedMode(fam, l, m, float(ne), guide, mode.residual, u, w, s, r, et)
        out.append(mode)
    return out


def characteristic_roots(guide: GuideSpec, l: int, profile_points: int = 64) -> list[GuidedMode]:
    """Every guided mode of azimuthal order ``l``, sorted by family then radial order."""
    if l < 0:
        raise ValueError("azimuthal order must be >= 0")
    found = _scan(guide, l)
    return [m for sign in (-1, 1) for m in _build(guide, l, sign, found[(l, sign)], profile_points)]


def max_order(guide: GuideSpec) -> int:
    """An azimuthal order above which nothing is guided (HE_l1 needs V > l - 1)."""
    return int(math.ceil(guide.v_number)) + 2


def all_modes(guide: GuideSpec, l_max: int | None = None, profile_points: int = 0) -> list[GuidedMode]:
    """Guided modes of every azimuthal order, highest effective index first."""
    lmax = max_order(guide) if l_max is None else l_max
    found = _scan(guide, lmax)
    modes = []
    for (l, sign), roots in found.items():
        modes += _build(guide, l, sign, roots, profile_points)
    return sorted(modes, key=lambda m: -m.n_eff)


@dataclass(frozen=True)
class CoupledMode:
    mode: GuidedMode
    polarization_deg: float
    weight: float


def dipole_coupled_modes(modes, orientation=(1.0, 0.0, 0.0)) -> list[CoupledMode]:
    """Modes an on-axis transverse dipole can excite, with coupling weights.

    The weight is |E_transverse(axis)|^2 per unit guided power; the even/odd
    partner of each l=1 mode is picked by the dipole's in-plane angle.
    """
    o = np.asarray(orientation, dtype=float)
    if abs(o[2]) > 1e-12 or np.hypot(o[0], o[1]) == 0:
        raise ValueError("dipole must be transverse to the guide axis")
    ang = math.degrees(math.atan2(o[1], o[0]))
    out = []
    for mode in modes:
        w = mode.coupling_weight() if mode.l == 1 else 0.0
        if w > 0:
            out.append(CoupledMode(mode, ang, w))
    return out


def lp_scalar_roots(guide: GuideSpec, l: int) -> list[float]:
    """Weak-guidance LP_lm effective indices (scalar equation), for comparison."""
    n1, n2 = guide.core_index, guide.clad_index

    def f(ne):
        u, w = _uw(guide, ne)
        return u * jv(l + 1, u) * kv(l, w) - w * kv(l + 1, w) * jv(l, u)

    grid = _scan_grid(n2, n1)
    with np.errstate(all="ignore"):
        g = f(grid)
    out = []
    for i in np.nonzero(np.signbit(g[1:]) != np.signbit(g[:-1]))[0]:
        if np.isfinite(g[i]) and np.isfinite(g[i + 1]):
            out.append(_bisect(lambda x: float(f(x)), grid[i], grid[i + 1], g[i]))
    return sorted(out, reverse=True)
