"""Linearized operators around the tau families and the lump.

Conventions: kappa = 1, lam = sqrt(2) + 1, and d_s, d_t are the complex
derivatives of :mod:`todalump.exact`.  A field is anything with a
``jet(n, x, y)`` method (a :class:`~todalump.fields.SeqField` or a
:class:`~todalump.exact.TauFamily`).

Two coefficient conventions need stating.

* The eta_{n-1} coefficient of G1 and N1 starts with
  ``omega_{n+1} / (lam theta_n)``.  Dividing the linearized omega/theta
  Backlund system by theta_n gives this factor, and only with it do the
  translation pairs (d_x omega, d_x theta) and (d_y omega, d_y theta) solve
  F1 = G1, M1 = N1.
* ``lam_{n+1}^{-1} phi`` in the sum/difference identities means
  ``phi_{n+1} / lam``.
"""
from __future__ import annotations

import enum
import logging

import numpy as np
import sympy as sp

from ._constants import LAM, LAM_INV, SQRT2
from .exact import (IDENTITY_DPS, Residual, SitePoint, TauFamily, _identity_point, _jet_of,
                    _jets_at, _to_complex, eval_lump, eval_tau)
from .fields import LUMP_EXPR, N, X, Y, SeqField

log = logging.getLogger(__name__)

#: Default exclusion radius around the zeros of omega.
POLE_TOL = 1e-6


class OperatorTag(enum.Enum):
    T_KAPPA = "T_kappa"
    T_OMEGA = "T_omega"
    T_THETA = "T_theta"
    F1 = "F1"
    M1 = "M1"
    G1 = "G1"
    N1 = "N1"
    F0 = "F0"
    M0 = "M0"
    G0 = "G0"
    N0 = "N0"
    F0STAR = "F0star"
    M0STAR = "M0star"
    F1STAR = "F1star"
    M1STAR = "M1star"


class Role(enum.Enum):
    """What a field stands for in the linearized Backlund chain kappa -> omega -> theta."""

    SIGMA = "sigma"  # perturbation of kappa
    PHI = "phi"      # perturbation of omega
    ETA = "eta"      # perturbation of theta


_EXPECTED_ROLE = {
    OperatorTag.F1: Role.PHI, OperatorTag.M1: Role.PHI,
    OperatorTag.G1: Role.ETA, OperatorTag.N1: Role.ETA,
    OperatorTag.F0: Role.SIGMA, OperatorTag.M0: Role.SIGMA,
    OperatorTag.G0: Role.PHI, OperatorTag.N0: Role.PHI,
    OperatorTag.F0STAR: Role.SIGMA, OperatorTag.M0STAR: Role.SIGMA,
    OperatorTag.F1STAR: Role.PHI, OperatorTag.M1STAR: Role.PHI,
}


class RoleError(ValueError):
    """An operator was applied to a field declared in the wrong role."""


class NearPoleError(ValueError):
    """|omega| fell below the exclusion radius at some evaluation point."""


def _as_tag(tag) -> OperatorTag:
    return tag if isinstance(tag, OperatorTag) else OperatorTag(tag)


def _check_role(tag: OperatorTag, role, allowed):
    if tag not in allowed:
        raise ValueError(f"{tag.value} is not handled here")
    role = Role(role) if not isinstance(role, Role) else role
    if role is not _EXPECTED_ROLE[tag]:
        raise RoleError(f"{tag.value} acts on {_EXPECTED_ROLE[tag].value}-role fields, "
                        f"got {role.value}")


def _jets(field, p: SitePoint, offsets):
    n = np.asarray(p.n)
    return {d: _jet_of(field, n + d, p.x, p.y) for d in offsets}


def _tau(family, p, offsets):
    n = np.asarray(p.n)
    return {d: eval_tau(family, SitePoint(n + d, p.x, p.y)) for d in offsets}


def _omega_guard(p: SitePoint, offsets, tol: float):
    om = _tau(TauFamily.OMEGA, p, offsets)
    small = np.zeros(np.shape(om[offsets[0]].value), dtype=bool)
    for d in offsets:
        small |= np.abs(om[d].value) < tol
    if np.any(small):
        raise NearPoleError(f"|omega| < {tol:g} at {int(np.sum(small))} point(s)")
    return om


def omega_pole_mask(p: SitePoint, tol: float = POLE_TOL, offsets=(-1, 0, 1)) -> np.ndarray:
    """True where every omega_{n+d}, d in ``offsets``, has modulus at least ``tol``.

    The number of excluded points is logged.
    """
    ok = np.ones(np.broadcast(p.n, p.x, p.y).shape, dtype=bool)
    for d in offsets:
        ok &= np.abs(eval_tau(TauFamily.OMEGA, p.shift(d)).value) >= tol
    if not np.all(ok):
        log.info("excluded %d point(s) within %g of an omega zero", int(np.sum(~ok)), tol)
    return ok


def subset(p: SitePoint, mask) -> SitePoint:
    """Points of ``p`` selected by a boolean mask."""
    n, x, y = np.broadcast_arrays(p.n, p.x, p.y)
    return SitePoint(n[mask], x[mask], y[mask])


# ------------------------------------------------------------- T operators


def apply_T(family, eta, p: SitePoint, dps: int | None = IDENTITY_DPS):
    """Linearization of the bilinear equation around a tau family.

    (T eta)_n = d_sd_t eta tau - d_s eta d_t tau - d_t eta d_s tau + eta d_sd_t tau
                - (eta_{n+1} tau_{n-1} + tau_{n+1} eta_{n-1} - 2 tau eta).
    For kappa this is (1/4) Lap eta_n + 2 eta_n - eta_{n+1} - eta_{n-1}.
    When ``eta`` is itself a tau family the evaluation uses ``dps`` digits.
    """
    family = TauFamily(family) if not isinstance(family, TauFamily) else family
    q = _identity_point(p, [family, eta], dps)
    e0, ep, em = _jets_at(eta, q, (0, 1, -1))
    t0, tp, tm = _jets_at(family, q, (0, 1, -1))
    value = (e0.d_st * t0.value - e0.d_s * t0.d_t - e0.d_t * t0.d_s + e0.value * t0.d_st
             - (ep.value * tm.value + tp.value * em.value - 2 * t0.value * e0.value))
    return _to_complex(value)


def lump_coefficients(p: SitePoint):
    """(exp(Q_{n-1} - Q_n), exp(Q_n - Q_{n+1})) at p."""
    q = {d: eval_lump(p.shift(d)) for d in (-1, 0, 1)}
    return np.exp(q[-1] - q[0]), np.exp(q[0] - q[1])


def linearized_toda_residual(U, p: SitePoint) -> Residual:
    """(1/4) Lap U_n - e^{Q_{n-1}-Q_n}(U_{n-1} - U_n) + e^{Q_n-Q_{n+1}}(U_n - U_{n+1})."""
    u = _jets(U, p, (-1, 0, 1))
    a_minus, a_plus = lump_coefficients(p)
    value = (0.25 * u[0].laplacian - a_minus * (u[-1].value - u[0].value)
             + a_plus * (u[0].value - u[1].value))
    return Residual.of(value, p)


def kernel_field(direction: str) -> SeqField:
    """Closed-form translation mode d_x Q_n or d_y Q_n."""
    var = {"x": X, "y": Y}[direction]
    return SeqField.from_expr(sp.diff(LUMP_EXPR, var), traveling=True, name=f"d{direction}Q")


# ------------------------------------------------- omega/theta linearization


def apply_family1(tag, field, p: SitePoint, *, role):
    """F1, M1 (on phi) and G1, N1 (on eta) of the linearized omega -> theta system."""
    tag = _as_tag(tag)
    _check_role(tag, role, (OperatorTag.F1, OperatorTag.M1, OperatorTag.G1, OperatorTag.N1))
    th = _tau(TauFamily.THETA, p, (-1, 0))
    f = _jets(field, p, (-1, 0, 1))
    if tag in (OperatorTag.F1, OperatorTag.M1):
        rs = th[0].d_s / th[0].value
        rt = th[-1].d_t / th[-1].value
        up = LAM_INV * th[-1].value / th[0].value * f[1].value
        down = LAM * th[0].value / th[-1].value * f[-1].value
        if tag is OperatorTag.F1:
            return f[0].d_x - (rs + rt + 2.0) * f[0].value - up + down
        return -1j * f[0].d_y - (rs - rt - 2.0 * SQRT2) * f[0].value - up - down
    om = _tau(TauFamily.OMEGA, p, (-1, 0, 1))
    w0, wm, wp = om[0], om[-1].value, om[1].value
    t0, tm = th[0].value, th[-1].value
    sgn = 1.0 if tag is OperatorTag.G1 else -1.0
    coef_n = -w0.d_s / t0 - LAM_INV * w0.value / t0 - sgn * LAM * wm / tm
    coef_m = LAM_INV * wp / t0 - sgn * w0.d_t / tm + sgn * LAM * w0.value / tm
    return (w0.value / t0 * f[0].d_s + sgn * w0.value / tm * f[-1].d_t
            + coef_n * f[0].value + coef_m * f[-1].value)


def l2_residuals(phi, eta, p: SitePoint):
    """Left minus right side of both undivided omega -> theta linearized equations."""
    th = _tau(TauFamily.THETA, p, (-1, 0, 1))
    om = _tau(TauFamily.OMEGA, p, (-1, 0, 1))
    f = _jets(phi, p, (-1, 0, 1))
    e = _jets(eta, p, (-1, 0, 1))
    lhs1 = (f[0].d_s * th[0].value - f[0].value * th[0].d_s
            - LAM_INV * (f[1].value * th[-1].value - f[0].value * th[0].value))
    rhs1 = (-om[0].d_s * e[0].value + om[0].value * e[0].d_s
            + LAM_INV * (om[1].value * e[-1].value - om[0].value * e[0].value))
    lhs2 = (f[0].d_t * th[-1].value - f[0].value * th[-1].d_t
            + LAM * (f[-1].value * th[0].value - f[0].value * th[-1].value))
    rhs2 = (-om[0].d_t * e[-1].value + om[0].value * e[-1].d_t
            - LAM * (om[-1].value * e[0].value - om[0].value * e[-1].value))
    return lhs1 - rhs1, lhs2 - rhs2


# ------------------------------------------------- kappa/omega linearization


def apply_family0(tag, field, p: SitePoint, *, role, pole_tol: float = POLE_TOL):
    """F0, M0 (on sigma) and G0, N0 (on phi); these divide by omega_n, omega_{n-1}."""
    tag = _as_tag(tag)
    _check_role(tag, role, (OperatorTag.F0, OperatorTag.M0, OperatorTag.G0, OperatorTag.N0))
    om = _omega_guard(p, (-1, 0), pole_tol)
    w0, wm = om[0].value, om[-1].value
    f = _jets(field, p, (-1, 0, 1))
    if tag in (OperatorTag.F0, OperatorTag.M0):
        fwd = LAM * wm / w0 * (f[1].value - f[0].value)
        bwd = LAM_INV * w0 / wm * (f[0].value - f[-1].value)
        if tag is OperatorTag.F0:
            return f[0].d_x - fwd - bwd
        return -1j * f[0].d_y - fwd + bwd
    first = (f[0].d_s + LAM * (f[-1].value - f[0].value)) / w0
    second = (f[-1].d_t - LAM_INV * (f[0].value - f[-1].value)) / wm
    return first + second if tag is OperatorTag.G0 else first - second


def l1_residuals(sigma, phi, p: SitePoint):
    """Left minus right side of both undivided kappa -> omega linearized equations."""
    om = _tau(TauFamily.OMEGA, p, (-1, 0, 1))
    g = _jets(sigma, p, (0, 1))
    f = _jets(phi, p, (-1, 0, 1))
    lhs1 = (g[0].d_s * om[0].value - g[0].value * om[0].d_s
            - LAM * (g[1].value * om[-1].value - g[0].value * om[0].value))
    rhs1 = f[0].d_s + LAM * (f[-1].value - f[0].value)
    lhs2 = (g[1].d_t * om[0].value - g[1].value * om[0].d_t
            + LAM_INV * (g[0].value * om[1].value - g[1].value * om[0].value))
    rhs2 = f[0].d_t - LAM_INV * (f[1].value - f[0].value)
    return lhs1 - rhs1, lhs2 - rhs2


# ----------------------------------------------------------- starred forms


def apply_starred(tag, field, p: SitePoint, *, role=None):
    """Undivided left-hand sides F0*, M0* (on sigma) and F1*, M1* (on phi)."""
    tag = _as_tag(tag)
    allowed = (OperatorTag.F0STAR, OperatorTag.M0STAR, OperatorTag.F1STAR, OperatorTag.M1STAR)
    _check_role(tag, _EXPECTED_ROLE[tag] if role is None else role, allowed)
    f = _jets(field, p, (0, 1))
    if tag in (OperatorTag.F0STAR, OperatorTag.M0STAR):
        b = _tau(TauFamily.OMEGA, p, (-1, 0, 1))
        mu, mu_inv = LAM, LAM_INV
    else:
        b = _tau(TauFamily.THETA, p, (-1, 0, 1))
        mu, mu_inv = LAM_INV, LAM
    if tag in (OperatorTag.F0STAR, OperatorTag.F1STAR):
        return (f[0].d_s * b[0].value - f[0].value * b[0].d_s
                - mu * (f[1].value * b[-1].value - f[0].value * b[0].value))
    return (f[1].d_t * b[0].value - f[1].value * b[0].d_t
            + mu_inv * (f[0].value * b[1].value - f[1].value * b[0].value))


# ----------------------------------------------------------- identity suites


def sum_difference_residual_kappa_omega(sigma, phi, p: SitePoint):
    """Residuals of the sum and difference of the kappa -> omega system.

    d_x phi_n - 2 phi_n + lam phi_{n-1} - phi_{n+1}/lam = F0* sigma + M0* sigma
    -i d_y phi_n - 2 sqrt2 phi_n + lam phi_{n-1} + phi_{n+1}/lam = F0* sigma - M0* sigma
    """
    f = _jets(phi, p, (-1, 0, 1))
    fs = apply_starred(OperatorTag.F0STAR, sigma, p)
    ms = apply_starred(OperatorTag.M0STAR, sigma, p)
    lhs1 = f[0].d_x - 2.0 * f[0].value + LAM * f[-1].value - LAM_INV * f[1].value
    lhs2 = -1j * f[0].d_y - 2.0 * SQRT2 * f[0].value + LAM * f[-1].value + LAM_INV * f[1].value
    return Residual.of(lhs1 - (fs + ms), p), Residual.of(lhs2 - (fs - ms), p)


def sum_difference_residual_omega_theta(phi, eta, p: SitePoint, pole_tol: float = POLE_TOL):
    """Residuals of the two eta identities of the omega -> theta system.

    d_x eta_n + (2 - lam/w_n - 1/(lam w_{n+1})) eta_n + w_{n+1} eta_{n-1}/(lam w_n)
        - lam w_n eta_{n+1}/w_{n+1} = F1* phi / w_n + M1* phi / w_{n+1}
    -i d_y eta_n + (-lam/w_n + 1/(lam w_{n+1}) - 2 sqrt2) eta_n + w_{n+1} eta_{n-1}/(lam w_n)
        + lam w_n eta_{n+1}/w_{n+1} = F1* phi / w_n - M1* phi / w_{n+1}
    with w = omega.
    """
    om = _omega_guard(p, (0, 1), pole_tol)
    w0, wp = om[0].value, om[1].value
    e = _jets(eta, p, (-1, 0, 1))
    fs = apply_starred(OperatorTag.F1STAR, phi, p) / w0
    ms = apply_starred(OperatorTag.M1STAR, phi, p) / wp
    cross_m = wp * LAM_INV / w0 * e[-1].value
    cross_p = w0 * LAM / wp * e[1].value
    lhs1 = e[0].d_x + (2.0 - LAM / w0 - LAM_INV / wp) * e[0].value + cross_m - cross_p
    lhs2 = -1j * e[0].d_y + (-LAM / w0 + LAM_INV / wp - 2.0 * SQRT2) * e[0].value + cross_m + cross_p
    return Residual.of(lhs1 - (fs + ms), p), Residual.of(lhs2 - (fs - ms), p)


# ------------------------------------------------- explicit solution pairs

_U = 2 * sp.sqrt(2) * X + N


def sigma_phi_pairs() -> list[tuple[SeqField, SeqField]]:
    """(sigma, phi) pairs with F0 sigma = G0 phi and M0 sigma = N0 phi.

    The second phi carries a ``2 i y^2`` term; without it the difference
    equation fails by 2y (see :func:`uncorrected_second_phi`).  The third pair
    is the constant one: both sides annihilate constants, so sigma = 1 goes
    with phi = 1.  Together the three pairs cover every sigma of the form
    c1 + c2 (2 sqrt2 x + n) + c3 y.
    """
    c = (sp.sqrt(2) - 1) / 2
    sigma1 = SeqField.from_expr(_U, traveling=True, name="2sqrt2 x + n")
    phi1 = SeqField.from_expr(_U ** 2 + 2 * sp.I * Y * _U + (1 - sp.sqrt(2)) * sp.I * Y,
                              traveling=True, name="quadratic phi")
    sigma2 = SeqField.from_expr(Y, traveling=True, name="y")
    phi2 = SeqField.from_expr(_U * Y + c * Y + 2 * sp.I * Y ** 2, traveling=True,
                              name="(2sqrt2 x + n) y + c y + 2i y^2")
    one = SeqField.constant(1)
    return [(sigma1, phi1), (sigma2, phi2), (one, one)]


def uncorrected_second_phi() -> SeqField:
    """The second phi without its 2 i y^2 term: (2sqrt2 x + n) y + ((sqrt2 - 1)/2) y."""
    c = (sp.sqrt(2) - 1) / 2
    return SeqField.from_expr(_U * Y + c * Y, traveling=True, name="phi without 2i y^2")
