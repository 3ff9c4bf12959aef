"""Closed-form tau functions, the lump, the Hirota operator and residual checks.

The three tau families are

    kappa_n = 1,
    omega_n = 2*sqrt(2)*x + n + 2iy + (sqrt(2) - 1)/2,
    theta_n = (2*sqrt(2)*x + n)**2 + 4*y**2 + 1/4,

and the lump is Q_n = ln(theta_{n-1} / theta_n).  Derivatives are taken with
respect to the complex coordinates s = x + iy, t = x - iy, so that
d_s = (d_x - i d_y)/2, d_t = (d_x + i d_y)/2 and the Laplacian is 4 d_s d_t.

Every function accepts scalars or broadcastable numpy arrays for n, x, y.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from math import comb
from typing import NamedTuple

import mpmath
import numpy as np

from ._constants import DEFAULT_SEED, LAM, LAM_INV, OMEGA_OFFSET, SQRT2

#: Working precision (decimal digits) of the polynomial identity residuals.
#: Those residuals are differences of products of size theta^2 (theta^4 for
#: the exchange identity), so float64 would leave a floor of ~1e-16 * theta^4.
IDENTITY_DPS = 40


@dataclass(frozen=True)
class SitePoint:
    """Lattice index ``n`` and plane point ``(x, y)``; arrays broadcast."""

    n: object
    x: object
    y: object

    def __post_init__(self):
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("SitePoint coordinates must be finite")

    @property
    def s(self):
        return np.asarray(self.x) + 1j * np.asarray(self.y)

    @property
    def t(self):
        return np.asarray(self.x) - 1j * np.asarray(self.y)

    def shift(self, dn: int) -> "SitePoint":
        """Same plane point, lattice index moved by ``dn``."""
        return SitePoint(np.asarray(self.n) + dn, self.x, self.y)

    def __len__(self):
        return int(np.broadcast(self.n, self.x, self.y).size)


def sample_points(count: int, seed: int = DEFAULT_SEED, half_width: float = 5.0,
                  n_range: tuple[int, int] = (-3, 3)) -> SitePoint:
    """Uniform random points in [-w, w]^2 with integer n in ``n_range`` (inclusive)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-half_width, half_width, count)
    y = rng.uniform(-half_width, half_width, count)
    n = rng.integers(n_range[0], n_range[1] + 1, count)
    return SitePoint(n, x, y)


@dataclass(frozen=True)
class TauJet:
    """Value and s/t partial derivatives up to second order at a point."""

    value: object
    d_s: object
    d_t: object
    d_ss: object
    d_st: object
    d_tt: object

    @property
    def d_x(self):
        return self.d_s + self.d_t

    @property
    def d_y(self):
        return 1j * (self.d_s - self.d_t)

    @property
    def laplacian(self):
        return 4.0 * self.d_st

    def partial(self, i: int, j: int):
        """The mixed partial d_s^i d_t^j for i + j <= 2."""
        table = {(0, 0): self.value, (1, 0): self.d_s, (0, 1): self.d_t,
                 (2, 0): self.d_ss, (1, 1): self.d_st, (0, 2): self.d_tt}
        try:
            return table[(i, j)]
        except KeyError:
            raise ValueError(f"jet stores partials up to order 2, got ({i}, {j})") from None


class Residual(NamedTuple):
    """Residual value, its modulus and the point where it was evaluated."""

    value: object
    magnitude: object
    at: SitePoint

    @classmethod
    def of(cls, value, at: SitePoint) -> "Residual":
        return cls(value, np.abs(value), at)


def _jet_of(field, n, x, y, ctx=None) -> TauJet:
    if isinstance(field, TauFamily):
        if ctx is not None:
            return _eval_tau_mp(field, _MPPoint(n, x, y, ctx))
        return eval_tau(field, SitePoint(n, x, y))
    return field.jet(n, x, y)


class TauFamily(enum.Enum):
    """The three tau solutions of the bilinear Toda equation."""

    KAPPA = "kappa"
    OMEGA = "omega"
    THETA = "theta"

    def jet(self, n, x, y) -> TauJet:
        return eval_tau(self, SitePoint(n, x, y))

    def value(self, n, x, y):
        return eval_tau(self, SitePoint(n, x, y)).value


def eval_tau(family: TauFamily, p: SitePoint) -> TauJet:
    """Exact value and analytic s/t partials of a tau family member.

    Points built by :func:`to_high_precision` are evaluated in that context.
    """
    if isinstance(p, _MPPoint):
        return _eval_tau_mp(family, p)
    n = np.asarray(p.n, dtype=float)
    x = np.asarray(p.x, dtype=float)
    y = np.asarray(p.y, dtype=float)
    shape = np.broadcast(n, x, y).shape
    zero = np.zeros(shape, dtype=complex)
    u = 2.0 * SQRT2 * x + n
    if family is TauFamily.KAPPA:
        return TauJet(np.ones(shape), zero, zero, zero, zero, zero)
    if family is TauFamily.OMEGA:
        value = u + 2j * y + OMEGA_OFFSET
        return TauJet(value + zero, zero + LAM, zero + LAM_INV, zero, zero, zero)
    if family is TauFamily.THETA:
        value = u * u + 4.0 * y * y + 0.25
        return TauJet(value + np.zeros(shape), 2.0 * SQRT2 * u - 4j * y + zero,
                      2.0 * SQRT2 * u + 4j * y + zero, zero + 2.0, zero + 6.0, zero + 2.0)
    raise TypeError(f"unknown tau family {family!r}")


class _MPPoint(NamedTuple):
    """Site points stored as object arrays of numbers from a private mpmath context."""

    n: object
    x: object
    y: object
    ctx: object

    def shift(self, dn: int) -> "_MPPoint":
        return self._replace(n=self.n + dn)


def to_high_precision(p: SitePoint, dps: int = IDENTITY_DPS) -> _MPPoint:
    """Copy of ``p`` in a private ``dps``-digit mpmath context (thread safe)."""
    ctx = mpmath.MPContext()
    ctx.dps = dps
    n, x, y = np.broadcast_arrays(np.asarray(p.n), np.asarray(p.x, float), np.asarray(p.y, float))
    conv = np.frompyfunc(ctx.mpf, 1, 1)
    def as_obj(a):
        return np.asarray(conv(a), dtype=object)

    return _MPPoint(as_obj(n.astype(float)), as_obj(x), as_obj(y), ctx)


def _eval_tau_mp(family: TauFamily, p: _MPPoint) -> TauJet:
    ctx = p.ctx
    sq2 = ctx.sqrt(2)
    lam = sq2 + 1
    zero = np.zeros(np.shape(p.x), dtype=object) * ctx.mpf(0)
    u = 2 * sq2 * p.x + p.n
    if family is TauFamily.KAPPA:
        return TauJet(zero + 1, zero, zero, zero, zero, zero)
    if family is TauFamily.OMEGA:
        value = u + 2 * ctx.mpc(0, 1) * p.y + (sq2 - 1) / 2
        return TauJet(value, zero + lam, zero + (sq2 - 1), zero, zero, zero)
    if family is TauFamily.THETA:
        value = u * u + 4 * p.y * p.y + ctx.mpf(1) / 4
        four_iy = 4 * ctx.mpc(0, 1) * p.y
        return TauJet(value, 2 * sq2 * u - four_iy, 2 * sq2 * u + four_iy,
                      zero + 2, zero + 6, zero + 2)
    raise TypeError(f"unknown tau family {family!r}")


def _identity_point(p: SitePoint, fields, dps):
    """High-precision copy of ``p`` when every field is a tau family and dps is set."""
    if dps and all(isinstance(f, TauFamily) for f in fields):
        return to_high_precision(p, dps)
    return p


def _to_complex(value):
    """Round high-precision results back to complex128."""
    if isinstance(value, np.ndarray) and value.dtype == object:
        return np.vectorize(complex, otypes=[complex])(value)
    if hasattr(value, "_mpf_") or hasattr(value, "_mpc_"):
        return np.complex128(complex(value))
    return value


def eval_lump(p: SitePoint):
    """Q_n(x, y) = ln(theta_{n-1} / theta_n), evaluated without cancellation."""
    u = 2.0 * SQRT2 * np.asarray(p.x, dtype=float) + np.asarray(p.n, dtype=float)
    y = np.asarray(p.y, dtype=float)
    theta = u * u + 4.0 * y * y + 0.25
    # theta_{n-1} - theta_n = 1 - 2u
    return np.log1p((1.0 - 2.0 * u) / theta)


# ---------------------------------------------------------------- Hirota D


class FiniteDifferenceFallback(UserWarning):
    """Issued when hirota_D leaves the analytic path; the message carries the step."""


def _central_weights(order: int, half: int) -> np.ndarray:
    """Central difference weights for the ``order``-th derivative on 2*half+1 nodes."""
    offsets = np.arange(-half, half + 1, dtype=float)
    vander = np.vander(offsets, increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(vander, rhs)


def _mixed_partial_fd(value, n, x, y, a: int, b: int, h: float):
    """d_x^a d_y^b of ``value(n, x, y)`` by a tensor central stencil of spacing h."""
    half_a, half_b = (a + 1) // 2, (b + 1) // 2
    wa = _central_weights(a, half_a) if a else np.array([1.0])
    wb = _central_weights(b, half_b) if b else np.array([1.0])
    total = 0.0
    for i, w_i in enumerate(wa):
        for j, w_j in enumerate(wb):
            if w_i == 0.0 or w_j == 0.0:
                continue
            total = total + w_i * w_j * value(n, x + (i - half_a) * h, y + (j - half_b) * h)
    return total / h ** (a + b)


def _st_to_xy(i: int, j: int) -> dict[tuple[int, int], complex]:
    """Expand d_s^i d_t^j = 2^{-(i+j)} (d_x - i d_y)^i (d_x + i d_y)^j."""
    poly = {(0, 0): 1.0 + 0j}
    for factor in [-1j] * i + [1j] * j:
        new: dict[tuple[int, int], complex] = {}
        for (a, b), coef in poly.items():
            new[(a + 1, b)] = new.get((a + 1, b), 0) + coef / 2
            new[(a, b + 1)] = new.get((a, b + 1), 0) + coef * factor / 2
        poly = new
    return poly


def st_partial_fd(field, p: SitePoint, i: int, j: int, step: float = 0.05,
                  levels: int = 3):
    """Richardson-extrapolated d_s^i d_t^j of a field; returns (value, finest step)."""
    terms = _st_to_xy(i, j)

    def estimate(h):
        return sum(coef * _mixed_partial_fd(field.value, p.n, p.x, p.y, a, b, h)
                   for (a, b), coef in terms.items())

    table = [estimate(step / 2 ** k) for k in range(levels)]
    for level in range(1, levels):
        factor = 4.0 ** level
        table = [(factor * table[k + 1] - table[k]) / (factor - 1.0)
                 for k in range(len(table) - 1)]
    return table[0], step / 2 ** (levels - 1)


def hirota_D(m: int, k: int, f, g, p: SitePoint, method: str = "auto"):
    """Bilinear derivative D_s^m D_t^k f.g at p.

    Uses the stored analytic jets when ``m + k <= 2``.  Higher orders fall
    back to Richardson-extrapolated finite differences and issue a
    :class:`FiniteDifferenceFallback` warning naming the step;
    ``method="fd"`` forces that path silently (used for cross-checks).
    """
    if m < 0 or k < 0:
        raise ValueError("derivative orders must be non-negative")
    if method not in ("auto", "fd"):
        raise ValueError(f"unknown method {method!r}")
    use_fd = method == "fd" or m + k > 2
    if use_fd:
        step = 0.0

        def part(field, i, j):
            nonlocal step
            val, step = st_partial_fd(field, p, i, j)
            return val
    else:
        jets = {id(f): _jet_of(f, p.n, p.x, p.y), id(g): _jet_of(g, p.n, p.x, p.y)}

        def part(field, i, j):
            return jets[id(field)].partial(i, j)

    total = 0.0
    for i in range(m + 1):
        for j in range(k + 1):
            sign = (-1) ** ((m - i) + (k - j))
            total = total + comb(m, i) * comb(k, j) * sign * part(f, i, j) * part(g, m - i, k - j)
    if use_fd and method != "fd":
        warnings.warn(f"order {m + k} exceeds the analytic jet; finite differences "
                      f"with step {step:.3g} used", FiniteDifferenceFallback, stacklevel=2)
    return total


# ----------------------------------------------------------- residual checks


def toda_residual(q, p: SitePoint) -> Residual:
    """(1/4) Lap q_n - exp(q_{n-1} - q_n) + exp(q_n - q_{n+1})."""
    n = np.asarray(p.n)
    jm = _jet_of(q, n - 1, p.x, p.y)
    j0 = _jet_of(q, n, p.x, p.y)
    jp = _jet_of(q, n + 1, p.x, p.y)
    value = 0.25 * j0.laplacian - np.exp(jm.value - j0.value) + np.exp(j0.value - jp.value)
    return Residual.of(value, p)


def _dsdt_self(j: TauJet):
    """D_s D_t tau.tau = 2 (tau d_st tau - d_s tau d_t tau)."""
    return 2 * (j.value * j.d_st - j.d_s * j.d_t)


def _jets_at(field, q, offsets):
    ctx = getattr(q, "ctx", None)
    n = q.n if ctx is not None else np.asarray(q.n)
    return [_jet_of(field, n + d, q.x, q.y, ctx) for d in offsets]


def _lam_in(q, lam):
    """lam in the working precision of q; None means sqrt(2) + 1 exactly."""
    ctx = getattr(q, "ctx", None)
    if ctx is None:
        return LAM if lam is None else lam
    return ctx.sqrt(2) + 1 if lam is None else ctx.convert(lam)


def bilinear_residual(family, p: SitePoint, dps: int | None = IDENTITY_DPS) -> Residual:
    """D_s D_t tau_n.tau_n - 2 (tau_{n+1} tau_{n-1} - tau_n^2).

    Tau families are evaluated with ``dps`` digits (``None`` for float64).
    """
    q = _identity_point(p, [family], dps)
    j0, jp, jm = _jets_at(family, q, (0, 1, -1))
    value = _dsdt_self(j0) - 2 * (jp.value * jm.value - j0.value ** 2)
    return Residual.of(_to_complex(value), p)


def exchange_identity_residual(tau, tau_prime, lam, p: SitePoint,
                               dps: int | None = IDENTITY_DPS) -> Residual:
    """Half the exchange expression P minus its three-term expansion.

    P = [D_sD_t a.a - 2(a_{n+1}a_{n-1} - a^2)] b^2 - [same for b] a^2 with
    a = tau, b = tau'.  The identity holds for arbitrary pairs of fields and
    any lambda.
    """
    q = _identity_point(p, [tau, tau_prime], dps)
    lam = _lam_in(q, lam)
    A0, Ap, Am = _jets_at(tau, q, (0, 1, -1))
    B0, Bp, Bm = _jets_at(tau_prime, q, (0, 1, -1))
    a, b = A0.value, B0.value
    big_p = ((_dsdt_self(A0) - 2 * (Ap.value * Am.value - a * a)) * b * b
             - (_dsdt_self(B0) - 2 * (Bp.value * Bm.value - b * b)) * a * a)
    # A = D_s a.b - lam a_{n+1} b_{n-1} + lam a b and its t-derivative
    big_a = (A0.d_s * b - a * B0.d_s) - lam * Ap.value * Bm.value + lam * a * b
    big_a_t = (A0.d_st * b + A0.d_s * B0.d_t - A0.d_t * B0.d_s - a * B0.d_st
               - lam * (Ap.d_t * Bm.value + Ap.value * Bm.d_t)
               + lam * (A0.d_t * b + a * B0.d_t))
    dt_term = big_a_t * (a * b) - big_a * (A0.d_t * b + a * B0.d_t)
    second = lam * ((Ap.d_t * b - Ap.value * B0.d_t) + (a * Bp.value - Ap.value * b) / lam) * Bm.value * a
    third = -lam * ((A0.d_t * Bm.value - a * Bm.d_t) + (Am.value * b - a * Bm.value) / lam) * b * Ap.value
    return Residual.of(_to_complex(big_p / 2 - (dt_term + second + third)), p)


def backlund_residual(tau, tau_prime, lam, p: SitePoint,
                      dps: int | None = IDENTITY_DPS) -> tuple[Residual, Residual]:
    """Both equations of the generic Backlund pair, in multiplied-out form.

    D_s tau_n.tau'_n - lam tau_{n+1} tau'_{n-1} + lam tau_n tau'_n
    D_t tau_{n+1}.tau'_n + tau_n tau'_{n+1}/lam - tau_{n+1} tau'_n/lam

    ``lam=None`` means sqrt(2) + 1 in the working precision.
    """
    q = _identity_point(p, [tau, tau_prime], dps)
    lam = _lam_in(q, lam)
    a0, ap = _jets_at(tau, q, (0, 1))
    b0, bp, bm = _jets_at(tau_prime, q, (0, 1, -1))
    first = (a0.d_s * b0.value - a0.value * b0.d_s) - lam * ap.value * bm.value + lam * a0.value * b0.value
    second = ((ap.d_t * b0.value - ap.value * b0.d_t)
              + (a0.value * bp.value - ap.value * b0.value) / lam)
    return Residual.of(_to_complex(first), p), Residual.of(_to_complex(second), p)


def backlund_residual_b1(p: SitePoint, lam_scale: float = 1.0,
                         dps: int | None = IDENTITY_DPS) -> tuple[Residual, Residual]:
    """Residuals of the kappa -> omega transformation with parameter lam_scale * (sqrt2 + 1)."""
    q = _identity_point(p, [TauFamily.KAPPA], dps)
    return backlund_residual(TauFamily.KAPPA, TauFamily.OMEGA, _lam_in(q, None) * lam_scale, p, dps)


def backlund_residual_b2(p: SitePoint, lam_scale: float = 1.0, swap: bool = False,
                         dps: int | None = IDENTITY_DPS) -> tuple[Residual, Residual]:
    """Residuals of the omega -> theta transformation.

    This is the generic pair with parameter 1/lam.  ``swap=True`` exchanges
    the roles of omega and theta, which is not a valid transformation.
    """
    pair = (TauFamily.THETA, TauFamily.OMEGA) if swap else (TauFamily.OMEGA, TauFamily.THETA)
    q = _identity_point(p, [TauFamily.KAPPA], dps)
    return backlund_residual(*pair, 1 / (_lam_in(q, None) * lam_scale), p, dps)


class VFieldRecord(NamedTuple):
    r_n: object
    V_n: object
    dst_log_tau: object
    mismatch: object


def v_field_and_substitutions(p: SitePoint, tol: float = 1e-10) -> VFieldRecord:
    """The substitution chain r_n -> V_n = e^{r_n} - 1 -> d_s d_t ln theta_n.

    With the lump written as Q_n = ln(theta_{n-1}/theta_n), the tau relation
    V_n = d_s d_t ln theta_n holds for r_n = Q_n - Q_{n+1}; see README for
    the index convention.  Raises ``AssertionError`` if the two sides differ
    by more than ``tol`` relative to ``1 + |V_n|``.
    """
    r = eval_lump(p) - eval_lump(p.shift(1))
    v = np.expm1(r)
    j = eval_tau(TauFamily.THETA, p)
    dst_log = ((j.value * j.d_st - j.d_s * j.d_t) / j.value ** 2).real
    mismatch = np.abs(v - dst_log)
    if np.any(mismatch > tol * (1.0 + np.abs(v))):
        raise AssertionError(f"V_n and d_s d_t ln theta_n disagree by {np.max(mismatch):.3g}")
    return VFieldRecord(r, v, dst_log, mismatch)
