"""Frequency-side analysis of the linearized Backlund chain.

The Fourier transform is taken in ``x`` only, with kernel ``exp(-2 pi i x xi)``,
so ``d/dx`` becomes ``2 pi i xi`` and the traveling shift
``phi_{n+1}(x) = phi_n(x + c)`` becomes multiplication by
``E(xi) = exp(2 pi i c xi)`` with ``c = 1/(2 sqrt 2)``.

Contents:

* closed-form transforms of simple poles, of the rational functions built
  from theta, and of the omega ratios (:func:`ft_simple_pole`,
  :func:`ft_rational`, :func:`ft_theta_ratios`, :func:`ft_omega_ratios`);
* the constants and symbols P, Q, J, R, P1, Q1, R1, P0, Q0 (:func:`symbols`);
* the fundamental solutions g1, g2 of the second order equation
  P1 g'' + Q1 g' + R1 g = 0 (:func:`ode_fundamental_g`), the first order
  solution ``rho`` of P0 h' + Q0 h = 0 (:func:`rho`) and variation of
  parameters (:func:`variation_of_parameters`);
* the two-dimensional Fourier multiplier solve for eta tilde
  (:func:`multiplier_solve_eta_tilde`);
* quadrature checks of the transformed F1 and F0 operators
  (:func:`verify_transformed_F1`, :func:`verify_transformed_F0`).

Two transformed identities need a correction; both forms are reported by
the verifiers.  The transform of F1 phi carries an extra factor
``1/(1 - gamma E)``, and for y < 0 the transform of F0 sigma uses P0, Q0.
"""
from __future__ import annotations

import enum
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize

from ._constants import DELTA, LAM, LAM_INV, SQRT2
from .exact import SitePoint, TauFamily
from .fields import GridMisalignment, GridSpec, SeqField, lump_field
from .linearized import apply_T

log = logging.getLogger(__name__)

#: c = 1/(2 sqrt 2); also the traveling shift DELTA.
C_SHIFT = DELTA
#: E(xi) = exp(i * SHIFT_FREQ * xi).
SHIFT_FREQ = 2.0 * math.pi * C_SHIFT
#: Number of Frobenius coefficients kept for g1 and g2 near xi = 0.
FROBENIUS_ORDER = 20
_QUAD = dict(epsabs=0.0, epsrel=1e-12, limit=400, complex_func=True)


def _E(xi):
    return np.exp(1j * SHIFT_FREQ * xi)


def _z_minus_sin(z):
    """z - sin z without cancellation for small |z| (complex input allowed)."""
    z0 = np.asarray(z, dtype=complex)
    z = np.atleast_1d(z0)
    out = z - np.sin(z)
    small = np.abs(z) < 0.25
    if np.any(small):
        zs = z[small]
        z2 = zs * zs
        term, acc = zs * z2 / 6.0, np.zeros_like(zs)
        for k in range(1, 12):
            acc = acc + term
            term = -term * z2 / ((2 * k + 2) * (2 * k + 3))
        out[small] = acc
    return out.reshape(z0.shape)


# ---------------------------------------------------------------- parameters


@dataclass(frozen=True)
class SymbolParams:
    """Constants attached to a site index ``n`` and a height ``y``."""

    n: int = 0
    y: float = 0.0

    lam = LAM
    c = C_SHIFT

    @property
    def alpha(self) -> float:
        return self.n / (2 * SQRT2)

    @property
    def beta(self) -> float:
        return math.sqrt(self.y ** 2 / 2 + 1 / 32)

    @property
    def b(self) -> float:
        return -self.y / 2

    @property
    def alpha1(self) -> float:
        return self.alpha - self.c

    @property
    def alpha0(self) -> float:
        return (self.n + (SQRT2 - 1) / 2) / (2 * SQRT2)

    @property
    def beta0(self) -> float:
        return abs(self.y) / SQRT2

    @property
    def A1(self) -> complex:
        return complex(0.5 - self.b / (2 * self.beta))

    @property
    def A2(self) -> complex:
        return -LAM / SQRT2 * (0.5 - SQRT2 / (16 * self.beta * 1j))

    @property
    def A3(self) -> complex:
        return complex(-(0.5 + self.b / (2 * self.beta)))

    @property
    def A4(self) -> complex:
        return LAM / SQRT2 * (0.5 + SQRT2 / (16 * self.beta * 1j))

    @property
    def gamma(self) -> complex:
        return self.A3 / self.A2

    @property
    def gamma_star(self) -> complex:
        return self.A1 / self.A4


# ---------------------------------------------------------- frequency functions


@dataclass(frozen=True)
class FreqFunction:
    """A function of the frequency ``xi``, plus a Dirac mass at 0.

    ``singular_set`` lists real frequencies where the function, or a ratio
    derived from it, is not finite.  ``support`` is set for compactly
    supported inputs.
    """

    evaluator: Callable
    singular_set: tuple = ()
    delta: complex = 0.0
    derivative: Callable | None = None
    support: tuple | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "singular_set", tuple(sorted(float(s) for s in self.singular_set)))

    def __call__(self, xi):
        return self.evaluator(np.asarray(xi))

    def d(self, xi):
        if self.derivative is None:
            raise NotImplementedError(f"{self.name or 'function'} has no derivative attached")
        return self.derivative(np.asarray(xi))


def _one_sided(coef, a1: float, a2: float, side: int):
    """coef * exp(2 pi i (a1 + i a2) xi) on xi >= 0 (side=+1) or xi <= 0 (side=-1).

    ``u(0) = 1``, so both sides include xi = 0.
    """
    def ev(xi):
        xi = np.asarray(xi, dtype=float)
        mask = xi >= 0 if side > 0 else xi <= 0
        safe = np.where(mask, xi, 0.0)
        return np.where(mask, coef * np.exp(2j * math.pi * (a1 + 1j * a2) * safe), 0.0)
    return ev


def _sum(*parts):
    def ev(xi):
        return sum(p(xi) for p in parts)
    return ev


class Branch(enum.Enum):
    LOWER = "lower"        # 1/(x + a1 - a2 i)
    UPPER = "upper"        # 1/(x + a1 + a2 i)
    PRINCIPAL = "principal"  # p.v. 1/(x + a1)


def ft_simple_pole(a1: float, a2: float, branch) -> FreqFunction:
    """Transform of 1/(x + a1 -+ a2 i) or of the principal value 1/(x + a1)."""
    branch = Branch(branch) if not isinstance(branch, Branch) else branch
    if branch is Branch.PRINCIPAL:
        def ev(xi):
            xi = np.asarray(xi, dtype=float)
            return -1j * math.pi * np.exp(2j * math.pi * a1 * xi) * np.sign(xi)
        return FreqFunction(ev, (0.0,), name=f"pv 1/(x+{a1:g})")
    if not a2 > 0:
        raise ValueError(f"a2 must be positive for the {branch.value} branch, got {a2}")
    if branch is Branch.LOWER:
        ev = _one_sided(2j * math.pi, a1, -a2, -1)
    else:
        ev = _one_sided(-2j * math.pi, a1, a2, +1)
    return FreqFunction(ev, (0.0,), name=f"1/(x+{a1:g}{'-' if branch is Branch.LOWER else '+'}{a2:g}i)")


def ft_rational(a1: float, a2: float, a3: complex) -> FreqFunction:
    """Transform of ((x + a1) + a3) / ((x + a1)^2 + a2^2)."""
    if not a2 > 0:
        raise ValueError(f"a2 must be positive, got {a2}")
    w_plus = 0.5 - a3 / (2 * a2 * 1j)
    w_minus = 0.5 + a3 / (2 * a2 * 1j)
    ev = _sum(_one_sided(-2j * math.pi * w_plus, a1, a2, +1),
              _one_sided(2j * math.pi * w_minus, a1, -a2, -1))
    return FreqFunction(ev, (0.0,), name="rational")


class ThetaRatioTransforms(NamedTuple):
    ds_theta: FreqFunction          # (d_s theta_n / theta_n)^
    dt_theta_prev: FreqFunction     # (d_t theta_{n-1} / theta_{n-1})^
    theta_prev_ratio: FreqFunction  # (theta_{n-1} / theta_n)^, delta = 1
    theta_ratio_prev: FreqFunction  # (theta_n / theta_{n-1})^, delta = 1


def ft_theta_ratios(n: int, y: float) -> ThetaRatioTransforms:
    """Closed-form x-transforms of the four theta quotients, written with A1..A4."""
    sp_ = SymbolParams(n, y)
    al, a1_, be = sp_.alpha, sp_.alpha1, sp_.beta
    A1, A2, A3, A4 = sp_.A1, sp_.A2, sp_.A3, sp_.A4
    tp = 2j * math.pi
    ds = _sum(_one_sided(-tp * A1, al, be, +1), _one_sided(-tp * A3, al, -be, -1))
    dt = _sum(_one_sided(tp * A3, a1_, be, +1), _one_sided(tp * A1, a1_, -be, -1))
    prev = _sum(_one_sided(tp * A4 / LAM, al, be, +1), _one_sided(tp * A2 / LAM, al, -be, -1))
    nxt = _sum(_one_sided(tp * A2 / LAM, a1_, be, +1), _one_sided(tp * A4 / LAM, a1_, -be, -1))
    return ThetaRatioTransforms(
        FreqFunction(ds, (0.0,), name="ds theta/theta"),
        FreqFunction(dt, (0.0,), name="dt theta_prev/theta_prev"),
        FreqFunction(prev, (0.0,), delta=1.0, name="theta_prev/theta"),
        FreqFunction(nxt, (0.0,), delta=1.0, name="theta/theta_prev"),
    )


class OmegaRatioTransforms(NamedTuple):
    omega_prev_ratio: FreqFunction  # (omega_{n-1} / omega_n)^, delta = 1
    omega_ratio_prev: FreqFunction  # (omega_n / omega_{n-1})^, delta = 1


def ft_omega_ratios(n: int, y: float) -> OmegaRatioTransforms:
    """x-transforms of omega_{n-1}/omega_n = 1 - 1/omega_n and omega_n/omega_{n-1}.

    1/omega_n = (1/(2 sqrt 2)) / (x + alpha0 + i y/sqrt 2), so the branch is
    fixed by the sign of y.  y = 0 puts the pole on the real axis.
    """
    if y == 0:
        raise ValueError("omega ratios have a real pole at y = 0")
    sp_ = SymbolParams(n, y)
    branch = Branch.UPPER if y > 0 else Branch.LOWER
    inv_n = ft_simple_pole(sp_.alpha0, sp_.beta0, branch)
    inv_prev = ft_simple_pole(sp_.alpha0 - C_SHIFT, sp_.beta0, branch)
    k = 1 / (2 * SQRT2)
    return OmegaRatioTransforms(
        FreqFunction(lambda xi: -k * inv_n(xi), (0.0,), delta=1.0, name="omega_prev/omega"),
        FreqFunction(lambda xi: k * inv_prev(xi), (0.0,), delta=1.0, name="omega/omega_prev"),
    )


def fourier_quadrature(f: Callable, xi, limit: int = 400) -> np.ndarray:
    """Reference transform of a decaying function of x by Fourier-weighted quadrature.

    Uses QUADPACK's semi-infinite Fourier integrator on the even and odd
    parts of ``f``, which handles 1/x tails.  ``xi`` must avoid 0.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.empty(xi.shape, dtype=complex)
    even = lambda x: f(x) + f(-x)
    odd = lambda x: f(x) - f(-x)
    for idx, w in np.ndenumerate(xi):
        if w == 0:
            raise ValueError("fourier_quadrature needs xi != 0")
        om = 2 * math.pi * abs(w)
        parts = []
        for g, weight in ((even, "cos"), (odd, "sin")):
            re = integrate.quad(lambda x: np.real(g(x)), 0, np.inf, weight=weight, wvar=om, limlst=200)[0]
            im = integrate.quad(lambda x: np.imag(g(x)), 0, np.inf, weight=weight, wvar=om, limlst=200)[0]
            parts.append(re + 1j * im)
        out[idx] = parts[0] - 1j * np.sign(w) * parts[1]
    return out


@dataclass(frozen=True)
class GridFT:
    """Discrete x-transform on the uniform grid ``x_j = x0 + j h``, j < size.

    ``forward`` approximates the integral with kernel exp(-2 pi i x xi) at the
    FFT frequencies ``xi``; ``inverse`` undoes it exactly.
    """

    size: int
    h: float
    x0: float

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.size)

    @property
    def xi(self) -> np.ndarray:
        return np.fft.fftfreq(self.size, d=self.h)

    def forward(self, samples) -> np.ndarray:
        return self.h * np.exp(-2j * math.pi * self.x0 * self.xi) * np.fft.fft(samples)

    def inverse(self, values) -> np.ndarray:
        return np.fft.ifft(np.asarray(values) * np.exp(2j * math.pi * self.x0 * self.xi)) / self.h


# ------------------------------------------------------------------- symbols


def _P(xi):
    """P with 2 pi i P = 2 pi i xi - 2 - E/lam + lam/E, evaluated stably near 0."""
    z = SHIFT_FREQ * np.asarray(xi, dtype=complex)
    return (2j * SQRT2 * _z_minus_sin(z) - 4 * np.sin(z / 2) ** 2) / (2j * math.pi)


def _dP(xi):
    z = SHIFT_FREQ * np.asarray(xi, dtype=complex)
    return (2j * SQRT2 * (1 - np.cos(z)) - 2 * np.sin(z)) * SHIFT_FREQ / (2j * math.pi)


def _P0(xi):
    """2 pi i xi - lam (E - 1) - (1 - 1/E)/lam, evaluated stably near 0."""
    z = SHIFT_FREQ * np.asarray(xi, dtype=complex)
    return 4 * np.sin(z / 2) ** 2 + 2j * SQRT2 * _z_minus_sin(z)


def _Q0(xi):
    """-lam a i (E - 1) + a i (1 - 1/E)/lam with a = pi/sqrt 2."""
    z = SHIFT_FREQ * np.asarray(xi, dtype=complex)
    a = SHIFT_FREQ
    return 2 * a * np.sin(z) + 4j * SQRT2 * a * np.sin(z / 2) ** 2


class Symbols(NamedTuple):
    P: FreqFunction
    Q: FreqFunction
    J: FreqFunction
    R: FreqFunction
    P1: FreqFunction
    Q1: FreqFunction
    R1: FreqFunction
    P0: FreqFunction
    Q0: FreqFunction
    params: SymbolParams
    # exponential-free pieces: J = Jt e^{-4 pi beta xi}, R = Rt e^{4 pi beta xi}
    Jt: Callable
    dJt: Callable
    Rt: Callable
    K: Callable  # J = K'


def _locate_J_zeros(Jt, dJt, xi_max: float) -> tuple:
    """Zeros of J on [-xi_max, xi_max] by complex Newton iteration from 2 sqrt 2 j."""
    zeros = [0.0]
    period = 2 * SQRT2
    for j in range(1, int(xi_max / period) + 1):
        for sgn in (1, -1):
            root = optimize.newton(Jt, complex(sgn * j * period), fprime=dJt, tol=1e-13, maxiter=50)
            if abs(root.imag) > 1e-8:
                raise ArithmeticError(f"J zero near {sgn * j * period:g} left the real axis: {root}")
            zeros.append(float(root.real))
    return tuple(sorted(zeros))


def symbols(n: int, y: float, xi_max: float = 20.0) -> Symbols:
    """Frequency symbols for site ``n`` and height ``y``.

    Zeros of J are located numerically on [-xi_max, xi_max]; they fall at
    the points where E(xi) = 1, i.e. spacing 2 sqrt 2.
    """
    prm = SymbolParams(n, y)
    A1, A2, A3, A4 = prm.A1, prm.A2, prm.A3, prm.A4
    g, gs, be = prm.gamma, prm.gamma_star, prm.beta
    tpc = 2j * math.pi * C_SHIFT
    fb = 4 * math.pi * be

    def Q(xi):
        E = _E(np.asarray(xi, dtype=complex))
        return (1 - g * E) * (A1 + A2 / E) - (1 - gs * E) * (A3 + A4 / E)

    def dQ(xi):
        E = _E(np.asarray(xi, dtype=complex))
        return tpc * (-A2 / E - g * A1 * E + A4 / E + gs * A3 * E)

    def r(E):
        return (1 - gs * E) / (1 - g * E)

    def dr(E):
        return (g - gs) * tpc * E / (1 - g * E) ** 2

    def d2r(E):
        return (g - gs) * tpc ** 2 * E * (1 + g * E) / (1 - g * E) ** 3

    def Jt(xi):
        E = _E(np.asarray(xi, dtype=complex))
        return dr(E) - fb * r(E)

    def dJt(xi):
        E = _E(np.asarray(xi, dtype=complex))
        return d2r(E) - 2 * fb * dr(E) + fb ** 2 * r(E)

    def Rt(xi):
        E = _E(np.asarray(xi, dtype=complex))
        return (1 - g * E) * (A3 + A4 / E)

    def damp(xi):
        return np.exp(-fb * np.asarray(xi, dtype=complex))

    def K(xi):
        return r(_E(np.asarray(xi, dtype=complex))) * damp(xi)

    def J(xi):
        return Jt(xi) * damp(xi)

    def dJ(xi):
        return dJt(xi) * damp(xi)

    def R(xi):
        return Rt(xi) / damp(xi)

    def Q1(xi):
        return Q(xi) - _P(xi) * dJt(xi) / Jt(xi)

    def R1(xi):
        return Rt(xi) * Jt(xi)

    jz = _locate_J_zeros(Jt, dJt, xi_max)
    return Symbols(
        P=FreqFunction(_P, (0.0,), derivative=_dP, name="P"),
        Q=FreqFunction(Q, (), derivative=dQ, name="Q"),
        J=FreqFunction(J, (), derivative=dJ, name="J"),
        R=FreqFunction(R, (), name="R"),
        P1=FreqFunction(_P, (0.0,), derivative=_dP, name="P1"),
        Q1=FreqFunction(Q1, jz, name="Q1"),
        R1=FreqFunction(R1, (), name="R1"),
        P0=FreqFunction(_P0, (0.0,), name="P0"),
        Q0=FreqFunction(_Q0, (), name="Q0"),
        params=prm, Jt=Jt, dJt=dJt, Rt=Rt, K=K,
    )


# -------------------------------------------------------- fundamental solutions


def _taylor(f, radius: float, order: int, nodes: int = 128) -> np.ndarray:
    """Taylor coefficients of an analytic ``f`` at 0 by the Cauchy integral (FFT)."""
    theta = 2 * math.pi * np.arange(nodes) / nodes
    vals = f(radius * np.exp(1j * theta))
    coef = np.fft.fft(vals) / nodes
    return coef[: order + 1] / radius ** np.arange(order + 1)


@dataclass(frozen=True)
class FrobeniusSeries:
    """Series solutions at the regular singular point xi = 0.

    g1 = sum a_k xi^k (a_0 = 1) and
    g2 = xi^-2 sum b_k xi^k + C g1 ln|xi| (b_0 = 1, b_2 = 0).
    """

    a: np.ndarray
    b: np.ndarray
    log_coef: complex
    radius: float

    def g1(self, xi):
        xi = np.asarray(xi, dtype=float)
        val = np.polynomial.polynomial.polyval(xi, self.a)
        der = np.polynomial.polynomial.polyval(xi, self.a[1:] * np.arange(1, len(self.a)))
        return val, der

    def g2(self, xi):
        xi = np.asarray(xi, dtype=float)
        k = np.arange(len(self.b))
        series = np.polynomial.polynomial.polyval(xi, self.b) / xi ** 2
        dseries = np.polynomial.polynomial.polyval(xi, self.b * (k - 2)) / xi ** 3
        g1, dg1 = self.g1(xi)
        lg = np.log(np.abs(xi))
        return (series + self.log_coef * g1 * lg,
                dseries + self.log_coef * (dg1 * lg + g1 / xi))


def _frobenius(sym: Symbols, order: int) -> FrobeniusSeries:
    prm = sym.params
    # nearest nonzero singularities of p = xi Q1/P and q = xi^2 R1/P
    d_pole = abs(math.log(abs(prm.gamma))) / SHIFT_FREQ  # 1 - gamma E = 0
    d_jzero = 2 * math.log(LAM) / SHIFT_FREQ             # E = lam^2
    radius = 0.5 * min(1.0, d_pole, d_jzero, 1.16)
    p = _taylor(lambda z: z * sym.Q1(z) / sym.P(z), radius, order)
    q = _taylor(lambda z: z * z * sym.R1(z) / sym.P(z), radius, order)
    if abs(p[0] - 3) > 1e-8 or abs(q[0]) > 1e-8:
        raise ArithmeticError(f"unexpected indicial data p0={p[0]}, q0={q[0]}")
    p[0], q[0] = 3.0, 0.0

    def F(r):
        return r * (r - 1) + 3 * r

    a = np.zeros(order + 1, dtype=complex)
    a[0] = 1
    for k in range(1, order + 1):
        s = sum((p[j] * (k - j) + q[j]) * a[k - j] for j in range(1, k + 1))
        a[k] = -s / F(k)
    cm = np.array([(2 * m - 1) * a[m] + sum(p[j] * a[m - j] for j in range(m + 1))
                   for m in range(order + 1)])
    b = np.zeros(order + 1, dtype=complex)
    b[0] = 1
    C = 0.0
    for k in range(1, order + 1):
        s = sum((p[j] * (k - j - 2) + q[j]) * b[k - j] for j in range(1, k + 1))
        if k == 2:
            C = -s / cm[0]
            b[2] = 0
            continue
        if k > 2:
            s = s + C * cm[k - 2]
        b[k] = -s / F(k - 2)
    return FrobeniusSeries(a, b, complex(C), radius)


@dataclass
class FundamentalSolutions:
    """g1, g2 of P1 g'' + Q1 g' + R1 g = 0 on a frequency grid.

    Values, first derivatives and the Wronskian W = g1 g2' - g1' g2 are
    stored on ``xi``; :meth:`evaluate` gives them anywhere away from 0.
    """

    y: float
    xi: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    dg1: np.ndarray
    dg2: np.ndarray
    W: np.ndarray
    series: FrobeniusSeries
    matching_point: float
    symbols: Symbols
    _sols: dict = field(default_factory=dict, repr=False)

    def evaluate(self, xi):
        """(g1, g2, g1', g2') at ``xi`` (array, no zeros)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if np.any(xi == 0):
            raise ValueError("g2 is singular at xi = 0")
        out = [np.empty(xi.shape, dtype=complex) for _ in range(4)]
        near = np.abs(xi) <= self.matching_point
        if np.any(near):
            v1, d1 = self.series.g1(xi[near])
            v2, d2 = self.series.g2(xi[near])
            for o, v in zip(out, (v1, v2, d1, d2)):
                o[near] = v
        for side in (1, -1):
            sel = ~near & (np.sign(xi) == side)
            if not np.any(sel):
                continue
            sol = self._sols.get(side)
            if sol is None or np.any(np.abs(xi[sel]) > abs(sol.t_max)):
                raise ValueError("xi outside the integrated range")
            z = sol.sol(xi[sel])
            jt = self.symbols.Jt(xi[sel])
            out[0][sel], out[1][sel] = z[0], z[2]
            out[2][sel], out[3][sel] = -jt * z[1], -jt * z[3]
        return tuple(out)

    def second_derivatives(self, xi):
        """(g1'', g2'') from the regular first-order system, or the series near 0.

        With g' = -Jt ht: g'' = -Jt' ht - Jt ht', ht' taken from the system.
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        g1, g2, d1, d2 = self.evaluate(xi)
        sym = self.symbols
        fb = 4 * math.pi * sym.params.beta
        jt, djt, rt = sym.Jt(xi), sym.dJt(xi), sym.Rt(xi)
        P = _P(xi)
        qq = sym.Q(xi) + fb * P
        out = []
        for g, d in ((g1, d1), (g2, d2)):
            ht = -d / jt
            dht = (rt * g - qq * ht) / P
            out.append(-(djt + fb * jt) * ht - jt * dht)
        near = np.abs(xi) <= self.matching_point
        if np.any(near):
            a, b, C = self.series.a, self.series.b, self.series.log_coef
            x = xi[near]
            k = np.arange(len(a))
            s1 = np.polynomial.polynomial.polyval(x, a[2:] * k[2:] * (k[2:] - 1))
            s2 = np.polynomial.polynomial.polyval(x, b * (k - 2) * (k - 3)) / x ** 4
            dd1 = np.polynomial.polynomial.polyval(x, a[1:] * k[1:])
            v1 = np.polynomial.polynomial.polyval(x, a)
            lg = np.log(np.abs(x))
            out[0][near] = s1
            out[1][near] = s2 + C * (s1 * lg + 2 * dd1 / x - v1 / x ** 2)
        return tuple(out)

    def _pole_distance(self, xi) -> np.ndarray:
        """Distance from real xi to the nearest zero of 1 - gamma E."""
        gamma = self.symbols.params.gamma
        pole = -1j * np.log(1 / gamma) / SHIFT_FREQ
        period = 2 * math.pi / SHIFT_FREQ
        shift = np.mod(xi - pole.real + period / 2, period) - period / 2
        return np.hypot(shift, pole.imag)

    def equation_residual(self, xi, step: float = 2e-2):
        """Relative plug-back residual of the g-equation for g1 and g2.

        Derivatives are taken by 8th-order central differences of g alone.
        The step shrinks near 0 and near the complex zeros of 1 - gamma E,
        which approach the real axis as |gamma| -> 1 (y -> -infinity).
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        w1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
        w2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
        fb = 4 * math.pi * self.symbols.params.beta  # solutions vary on the scale 1/fb
        step = np.minimum(np.minimum(step, np.abs(xi) / 40), self._pole_distance(xi) / 20)
        step = np.minimum(step, 0.25 / fb)
        vals = [self.evaluate(xi + o * step) for o in range(-4, 5)]
        sym = self.symbols
        P1, Q1, R1 = sym.P1(xi), sym.Q1(xi), sym.R1(xi)
        res = []
        for idx in (0, 1):
            g = np.array([v[idx] for v in vals])
            d1 = np.tensordot(w1, g, axes=1) / step
            d2 = np.tensordot(w2, g, axes=1) / step ** 2
            terms = (P1 * d2, Q1 * d1, R1 * g[4])
            scale = sum(np.abs(t) for t in terms)
            res.append(np.abs(sum(terms)) / scale)
        return tuple(res)


def _default_xi(xi_max: float) -> np.ndarray:
    pos = np.unique(np.concatenate([np.geomspace(1e-3, 0.1, 40), np.linspace(0.1, xi_max, 200)]))
    return np.concatenate([-pos[::-1], pos])


def _regular_rhs(sym: Symbols):
    """Right-hand side of g' = -Jt ht, ht' = (Rt g - (Q + 4 pi beta P) ht)/P for pairs of solutions."""
    fb = 4 * math.pi * sym.params.beta

    def rhs(s, u):
        P = _P(s)
        jt, rt, qq = sym.Jt(s), sym.Rt(s), sym.Q(s) + fb * P
        g, h = u[0::2], u[1::2]
        out = np.empty_like(u)
        out[0::2] = -jt * h
        out[1::2] = (rt * g - qq * h) / P
        return out

    return rhs


def ode_fundamental_g(y: float, xi=None, n: int = 0, order: int = FROBENIUS_ORDER,
                      xi_max: float = 3.0, rtol: float = 1e-12) -> FundamentalSolutions:
    """Fundamental pair g1 = 1 + O(xi), g2 = xi^-2 + O(xi^-1) of the g-equation.

    Near 0 the Frobenius series (resonant exponents 0 and -2, with a log
    term) is used.  Away from 0 the equation is integrated in the regular
    first-order form g' = -Jt ht, ht' = (Rt g - (Q + 4 pi beta P) ht)/P with
    ht = h e^{-4 pi beta xi} and h = -g'/J.  This form has no singularity at
    the zeros of J, so the integration passes through them without restarts.
    """
    sym = symbols(n, y, xi_max=max(xi_max, 1.0))
    series = _frobenius(sym, order)
    if xi is None:
        xi = _default_xi(xi_max)
    xi = np.asarray(xi, dtype=float)
    if np.any(xi == 0):
        raise ValueError("xi grid must avoid 0")
    fb = 4 * math.pi * sym.params.beta
    x0 = min(0.05, 0.5 * series.radius)

    rhs = _regular_rhs(sym)

    sols = {}
    span = max(float(np.max(np.abs(xi))), x0) + 0.1
    for side in (1, -1):
        s0 = side * x0
        v1, d1 = series.g1(s0)
        v2, d2 = series.g2(s0)
        jt = sym.Jt(s0)
        u0 = np.array([v1, -d1 / jt, v2, -d2 / jt], dtype=complex)
        sol = integrate.solve_ivp(rhs, (s0, side * span), u0, method="DOP853",
                                  rtol=rtol, atol=1e-14, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"integration failed on side {side}: {sol.message}")
        sol.t_max = side * span
        sols[side] = sol
    fs = FundamentalSolutions(y, xi, *(np.empty(0),) * 5, series=series, matching_point=x0,
                              symbols=sym, _sols=sols)
    g1, g2, dg1, dg2 = fs.evaluate(xi)
    fs.g1, fs.g2, fs.dg1, fs.dg2 = g1, g2, dg1, dg2
    fs.W = g1 * dg2 - dg1 * g2
    return fs


# ------------------------------------------------------------------- rho


_RHO_SERIES_RADIUS = 0.05


@functools.lru_cache(maxsize=None)
def _rho_series():
    """Taylor coefficients of s Q0/P0 at 0 (analytic for |s| < 1.16)."""
    coef = _taylor(lambda z: z * _Q0(z) / _P0(z), 0.5, 30)
    if abs(coef[0] - 2) > 1e-10:
        raise ArithmeticError(f"s Q0/P0 -> {coef[0]} at 0, expected 2")
    return coef


def _rho_regular(s):
    """Q0/P0 - 2/s, by series near 0 where the two terms cancel."""
    if abs(s) < _RHO_SERIES_RADIUS:
        c = _rho_series()
        return np.polynomial.polynomial.polyval(s, c[1:])
    return _Q0(s) / _P0(s) - 2.0 / s


def rho(xi):
    """Solution of P0 rho' + Q0 rho = 0 normalized by xi^2 rho(xi) -> 1 at 0.

    rho(xi) = xi^-2 exp(-int_0^xi (Q0/P0 - 2/s) ds); the integrand is
    regular at 0.
    """
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(xi_arr == 0):
        raise ValueError("rho is singular at xi = 0")
    out = np.empty(xi_arr.shape, dtype=complex)
    for idx, w in np.ndenumerate(xi_arr):
        # quad(complex_func=True) ignores reversed limits, so orient explicitly
        lo, hi = sorted((0.0, float(w)))
        val = np.sign(w) * integrate.quad(lambda s: complex(_rho_regular(s)), lo, hi, **_QUAD)[0]
        out[idx] = np.exp(-val) / w ** 2
    return out if np.ndim(xi) else out[0]


def rho_equation_residual(xi, step: float = 1e-4) -> np.ndarray:
    """|P0 rho' + Q0 rho| / |Q0 rho| with rho' from a fourth-order central difference."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.empty(xi.shape)
    for idx, w in np.ndenumerate(xi):
        h = min(step, abs(w) / 40)
        d = (rho(w - 2 * h) - 8 * rho(w - h) + 8 * rho(w + h) - rho(w + 2 * h)) / (12 * h)
        r = rho(w)
        out[idx] = abs(_P0(w) * d + _Q0(w) * r) / abs(_Q0(w) * r)
    return out


def small_xi_coefficient(f: Callable, power: int = 2, lo: float = 1e-3, hi: float = 1e-2,
                         count: int = 24) -> complex:
    """Leading coefficient c of f(xi) = c xi^power + O(xi^(power+1)).

    Fits f(xi)/xi^power against 1, xi, xi^2 on both sides of 0 by least
    squares and returns the constant term.
    """
    side = np.geomspace(lo, hi, count // 2)
    xi = np.concatenate([-side[::-1], side])
    vals = np.array([complex(f(w)) for w in xi]) / xi ** power
    design = np.vander(xi, 3, increasing=True)
    coef, *_ = np.linalg.lstsq(design.astype(complex), vals, rcond=None)
    return complex(coef[0])


# ------------------------------------------------------ variation of parameters


class NonIntegrableSingularity(ArithmeticError):
    """The variation-of-parameters integrand is not integrable at ``location``."""

    def __init__(self, location: float, detail: str = ""):
        super().__init__(f"non-integrable singularity at xi = {location:g}. {detail}".strip())
        self.location = location


class VariationResult(NamedTuple):
    xi: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    residual: float  # max over xi of |P1 g'' + Q1 g' + R1 g - B| / (sum of term moduli)


def _recessive_partner(fund: FundamentalSolutions, xi: np.ndarray, rtol: float = 1e-12):
    """A solution u that stays well separated from g1 across the grid ``xi``.

    For y < 0 and growing |y|, g1 and g2 from the forward integration both
    become dominated by the growing solution, and their Wronskian cancels to
    round-off (relative 1e-15 by xi ~ 0.6 at y = -5).  Integrating backward
    from the far end picks up the forward-decaying solution instead, which
    is stable in that direction.  Inside [0, xi[0]] u is continued as the
    matching combination c1 g1 + c2 g2 of the series solutions.
    Returns a callable giving (u, u', W(g1, u)) at points of the closed hull
    of ``xi`` and between it and 0.
    """
    sym = fund.symbols
    rhs = _regular_rhs(sym)
    near, far = (float(xi[0]), float(xi[-1])) if xi[0] > 0 else (float(xi[-1]), float(xi[0]))
    # u(far) = 0, ht(far) = 1, i.e. u'(far) = -Jt(far)
    sol = integrate.solve_ivp(rhs, (far, near), np.array([0.0, 1.0], dtype=complex),
                              method="DOP853", rtol=rtol, atol=1e-30, dense_output=True,
                              first_step=1e-3 * abs(far - near))
    if not sol.success:
        raise RuntimeError(f"backward integration failed: {sol.message}")
    u0 = sol.sol(near)
    g1, g2, d1, d2 = fund.evaluate(np.array([near]))
    du0 = -sym.Jt(np.array([near]))[0] * u0[1]
    w_near = g1[0] * d2[0] - d1[0] * g2[0]
    c1, c2 = np.linalg.solve(np.array([[g1[0], g2[0]], [d1[0], d2[0]]]), np.array([u0[0], du0]))
    lo, hi = sorted((near, far))

    # W(g1, u) = c2 W(g1, g2); the latter follows Abel's formula
    # W(b) = W(a) exp(-int_a^b Q1/P1), carried out from the near end panel by panel
    nodes, weights = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(near, far, len(xi))

    def log_increment(a, b):
        half = 0.5 * (b - a)
        pts = 0.5 * (b + a)[:, None] + half[:, None] * nodes[None, :]
        vals = sym.Q1(pts.ravel()) / sym.P1(pts.ravel())
        return half * (vals.reshape(pts.shape) @ weights)

    log_w = np.log(c2 * w_near) - np.concatenate([[0.0], np.cumsum(log_increment(edges[:-1], edges[1:]))])
    step = edges[1] - edges[0]

    def evaluate(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        u = np.empty(t.shape, dtype=complex)
        du = np.empty(t.shape, dtype=complex)
        w = np.empty(t.shape, dtype=complex)
        inside = (t >= lo) & (t <= hi)
        if np.any(inside):
            ti = t[inside]
            z = sol.sol(ti)
            u[inside] = z[0]
            du[inside] = -sym.Jt(ti) * z[1]
            j = np.clip(np.floor((ti - near) / step).astype(int), 0, len(edges) - 2)
            w[inside] = np.exp(log_w[j] - log_increment(edges[j], ti))
        if np.any(~inside):
            a1, a2, b1, b2 = fund.evaluate(t[~inside])
            u[~inside] = c1 * a1 + c2 * a2
            du[~inside] = c1 * b1 + c2 * b2
            w[~inside] = c2 * (a1 * b2 - b1 * a2)
        return u, du, w

    return evaluate


def variation_of_parameters(fund: FundamentalSolutions, B, anchor: str = "plus_infinity",
                            xi=None, points: int | None = None) -> VariationResult:
    """Particular solution of P1 g'' + Q1 g' + R1 g = B.

    g*(xi) = g2 int_anchor^xi g1 B/(W P1) - g1 int_anchor^xi g2 B/(W P1).
    ``xi`` is a uniform grid on one side of 0; ``anchor`` is
    ``"plus_infinity"`` (the right end of the grid, where B must vanish) or
    ``"zero"``.  The default grid is [0.05, 2] with at least 4001 points,
    refined so that the spacing resolves the nearest complex pole of
    1/(1 - gamma E) and the scale 1/(4 pi beta) by 40 steps each; the
    finite-difference plug-back needs that resolution for y near -2.
    """
    if anchor not in ("plus_infinity", "zero"):
        raise ValueError(f"unknown anchor {anchor!r}")
    if xi is None:
        if points is None:
            probe = np.linspace(0.05, 2.0, 4001)
            fb = 4 * math.pi * fund.symbols.params.beta
            scale = min(float(fund._pole_distance(probe).min()), 1.0 / fb)
            points = max(4001, 2 * math.ceil(1.95 * 40 / scale / 2) + 1)
        xi = np.linspace(0.05, 2.0, points)
    xi = np.asarray(xi, dtype=float)
    if np.any(np.diff(xi) <= 0) or xi[0] * xi[-1] <= 0:
        raise ValueError("xi must be increasing and on one side of 0")
    dx = np.diff(xi)
    if np.ptp(dx) > 1e-9 * dx[0]:
        raise ValueError("xi must be uniform")
    h = dx[0]
    P1 = fund.symbols.P1(xi)
    Bv = np.asarray(B(xi), dtype=complex)

    # the Green's function [g2(xi) g1(s) - g1(xi) g2(s)] / W(s) does not depend on
    # the basis, so the pair (g1, u) with u from _recessive_partner gives the
    # same g* without the cancellation of a nearly parallel pair
    partner = _recessive_partner(fund, xi)

    def basis(s):
        a1, _, b1, _ = fund.evaluate(s)
        a2, b2, w = partner(s)
        return a1, a2, b1, b2, w

    g1, g2, dg1, dg2, _ = basis(xi)

    def integrands(s):
        a1, a2, b1, b2, w = basis(s)
        w = w * fund.symbols.P1(s)
        bs = np.asarray(B(s), dtype=complex)
        return a1 * bs / w, a2 * bs / w

    # 8-point Gauss-Legendre on every grid panel
    nodes, weights = np.polynomial.legendre.leggauss(8)
    mid = 0.5 * (xi[:-1] + xi[1:])
    s = (mid[:, None] + 0.5 * h * nodes[None, :]).ravel()
    f1, f2 = integrands(s)
    inc1 = 0.5 * h * (f1.reshape(-1, 8) @ weights)
    inc2 = 0.5 * h * (f2.reshape(-1, 8) @ weights)
    if anchor == "plus_infinity":
        if abs(Bv[-1]) > 1e-12 * max(np.max(np.abs(Bv)), 1e-300):
            log.warning("B does not vanish at the right end of the grid; the tail is dropped")
        I1 = -np.concatenate([np.cumsum(inc1[::-1])[::-1], [0.0]])
        I2 = -np.concatenate([np.cumsum(inc2[::-1])[::-1], [0.0]])
    else:
        # xi * integrand tends to a nonzero constant for a 1/xi singularity and
        # halves (or faster) per halving of xi for an integrable one; probe deep
        # inside the series region, past the pre-asymptotic range.
        # B at round-off level, e.g. an analytically vanishing B, is ignored.
        probe = xi[0] * 2.0 ** -np.arange(4, 7)
        a1, a2, _, _, w = basis(probe)
        unit = np.abs(probe * np.stack([a1, a2]) / (w * fund.symbols.P1(probe)))
        for q, u, name in zip(integrands(probe), unit, ("g1 B/(W P1)", "g2 B/(W P1)")):
            lead = np.abs(probe * q)
            if lead[2] > 1e-12 * u[2] and lead[2] > 0.75 * lead[1]:
                raise NonIntegrableSingularity(0.0, f"{name} ~ 1/xi near 0")
        # integrable on [0, xi_0]: Gauss-Legendre avoids the endpoint
        gl, gw = np.polynomial.legendre.leggauss(24)
        head1, head2 = integrands(0.5 * xi[0] * (gl + 1))
        i1, i2 = 0.5 * xi[0] * (head1 @ gw), 0.5 * xi[0] * (head2 @ gw)
        I1 = np.concatenate([[0.0], np.cumsum(inc1)]) + i1
        I2 = np.concatenate([[0.0], np.cumsum(inc2)]) + i2
    g = g2 * I1 - g1 * I2
    dg = dg2 * I1 - dg1 * I2
    # plug-back: g'' by 6th-order differences of g', normalized pointwise by the term sizes
    d2 = (-dg[:-6] + 9 * dg[1:-5] - 45 * dg[2:-4] + 45 * dg[4:-2] - 9 * dg[5:-1] + dg[6:]) / (60 * h)
    sym = fund.symbols
    core = slice(3, -3)
    terms = (P1[core] * d2, sym.Q1(xi[core]) * dg[core], sym.R1(xi[core]) * g[core])
    scale = sum(np.abs(t) for t in terms) + np.abs(Bv[core])
    # points where everything has decayed below 1e-12 of the peak are measured against the peak
    scale = np.maximum(scale, 1e-12 * np.max(scale) if np.max(scale) > 0 else 1.0)
    residual = float(np.max(np.abs(sum(terms) - Bv[core]) / scale))
    return VariationResult(xi, g, dg, residual)


# ------------------------------------------------------------ multiplier solve


class MeanZeroViolation(AssertionError):
    """The integral of f_n is not zero: U is not an admissible kernel candidate."""

    def __init__(self, integral: float, tol: float):
        super().__init__(f"|int f_0| = {integral:.3e} >= {tol:g}")
        self.integral = integral
        self.tol = tol


def multiplier_grid(nodes: int = 512, half_width: float = 20.0) -> GridSpec:
    """Grid with about ``nodes`` points per axis and spacing snapped to DELTA/k.

    Uses 2m+1 nodes with m = nodes // 2 and the smallest k with
    DELTA/k <= half_width/m, so the half-width actually used is m DELTA/k.
    """
    m = nodes // 2
    k = math.ceil(DELTA * m / half_width)
    return GridSpec(m * DELTA / k, k)


def multiplier_symbol(grid: GridSpec) -> np.ndarray:
    """-pi^2 |xi|^2 + 2 - 2 cos(pi xi_1 / sqrt 2) on the FFT frequencies of ``grid``."""
    f = np.fft.fftfreq(grid.nx, d=grid.h)
    k1, k2 = np.meshgrid(f, f, indexing="ij")
    return -math.pi ** 2 * (k1 ** 2 + k2 ** 2) + 2 - 2 * np.cos(math.pi * k1 / SQRT2)


class MultiplierResult(NamedTuple):
    eta_tilde: SeqField
    f_integral: float
    v_integral: float
    equation_residual: float        # interior max of (1/4) Lap eta~ - e^{Q_{n-1}-Q_n} v
    t_theta_residual: float   # interior max |T_theta(theta eta~)| / (theta_1 theta_-1)
    grid: GridSpec


def _members(U: SeqField, grid: GridSpec):
    """Samples of U_{-1} and U_0 on ``grid`` nodes."""
    if U.is_grid:
        if U.grid != grid:
            raise ValueError("U lives on a different grid")
        u0 = np.asarray(U.samples)
        um = np.zeros_like(u0)
        k = grid.refine
        um[k:, :] = u0[:-k, :]  # U_{-1}(x) = U_0(x - DELTA); zero fill for a decaying U
        return um, u0
    xx, yy = grid.mesh()
    return np.asarray(U.value(-1, xx, yy)), np.asarray(U.value(0, xx, yy))


def multiplier_solve_eta_tilde(U: SeqField, grid: GridSpec | None = None, tol: float = 1e-6,
                               interior: float = 0.8) -> MultiplierResult:
    """Solve (1/4) Lap eta~_0 = e^{Q_{-1}-Q_0} (U_{-1} - U_0) through the Fourier multiplier.

    F(eta~) = F(f) / (-pi^2|xi|^2 + 2 - 2 cos(pi xi_1/sqrt 2)) with
    f = (e^{Q_{-1}-Q_0} - 1)(U_{-1} - U_0) and the zero mode set to 0.
    Raises :class:`MeanZeroViolation` if |int f| >= tol.
    """
    if grid is None:
        if not U.is_grid:
            raise ValueError("a grid is required for closed-form U")
        grid = U.grid
    ratio = DELTA / grid.h
    if abs(ratio - round(ratio)) > 1e-9:
        raise GridMisalignment(f"h = {grid.h} does not divide DELTA")
    um, u0 = _members(U, grid)
    Q = lump_field()
    xx, yy = grid.mesh()
    weight = np.exp(Q.value(-1, xx, yy) - Q.value(0, xx, yy))
    v = um - u0
    f = (weight - 1) * v
    area = grid.h ** 2
    f_int, v_int = float(np.sum(f) * area), float(np.sum(v) * area)
    if not abs(f_int) < tol:
        raise MeanZeroViolation(abs(f_int), tol)
    D = multiplier_symbol(grid)
    D[0, 0] = 1.0
    F = np.fft.fft2(f) / D
    F[0, 0] = 0.0
    eta = np.fft.ifft2(F).real
    f1 = np.fft.fftfreq(grid.nx, d=grid.h)
    k1, k2 = np.meshgrid(f1, f1, indexing="ij")
    lap = np.fft.ifft2(-4 * math.pi ** 2 * (k1 ** 2 + k2 ** 2) * F).real
    inner = (np.abs(xx) <= interior * grid.L) & (np.abs(yy) <= interior * grid.L)
    eq_res = float(np.max(np.abs(0.25 * lap - weight * v)[inner]))
    eta_field = SeqField.from_grid(eta, grid, name="eta_tilde")
    theta = 8 * xx ** 2 + 4 * yy ** 2 + 0.25  # theta_0
    t_res = _t_theta_residual(SeqField.from_grid(theta * eta, grid), grid, interior)
    return MultiplierResult(eta_field, f_int, v_int, eq_res, t_res, grid)


def _t_theta_residual(eta: SeqField, grid: GridSpec, interior: float) -> float:
    k = grid.refine
    lim = min(interior * grid.L, grid.L - (k + 1) * grid.h)
    ax = grid.axis
    pts = ax[np.abs(ax) <= lim]
    xx, yy = np.meshgrid(pts, pts, indexing="ij")
    val = apply_T(TauFamily.THETA, eta, SitePoint(np.zeros_like(xx, dtype=int), xx, yy))
    u = 2 * SQRT2 * xx
    scale = ((u + 1) ** 2 + 4 * yy ** 2 + 0.25) * ((u - 1) ** 2 + 4 * yy ** 2 + 0.25)
    return float(np.max(np.abs(val) / scale))


# ------------------------------------------------------------- verification


def bump(lo: float, hi: float, scale: complex = 1.0) -> FreqFunction:
    """Smooth bump exp(-1/(1 - t^2)) supported on [lo, hi]."""
    mid, half = (lo + hi) / 2, (hi - lo) / 2

    def ev(xi):
        t = (np.asarray(xi, dtype=float) - mid) / half
        inside = np.abs(t) < 1
        ts = np.where(inside, t, 0.0)
        return np.where(inside, scale * np.exp(-1 / (1 - ts * ts)), 0.0)
    return FreqFunction(ev, (), support=(lo, hi), name=f"bump[{lo:g},{hi:g}]")


def _zero_function() -> FreqFunction:
    return FreqFunction(lambda xi: np.zeros(np.shape(xi), dtype=complex), (), support=(0.0, 0.0),
                        name="0")


class FourierCheck(NamedTuple):
    xi: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    max_abs: float
    max_rel: float       # max |lhs - rhs| / max |lhs|
    uncorrected_rel: float   # same measure for the identity without its correction


def _quad(fun, a, b, points=None):
    if b <= a:
        return 0.0
    pts = None if points is None else [p for p in points if a < p < b] or None
    return integrate.quad(fun, a, b, points=pts, **_QUAD)[0]


def _conv(fhat: FreqFunction, kernel: FreqFunction, w: float, lo: float, hi: float) -> complex:
    """(fhat * kernel)(w) = int fhat(s) kernel(w - s) ds over the support [lo, hi]."""
    return _quad(lambda s: complex(fhat(s) * kernel(w - s)), lo, hi, points=[w])


def _compare(xi, lhs, rhs, uncorrected):
    scale = max(np.max(np.abs(lhs)), 1e-300)
    d = np.abs(lhs - rhs)
    return FourierCheck(xi, lhs, rhs, float(np.max(d)), float(np.max(d) / scale) if np.any(lhs) else float(np.max(d)),
                        float(np.max(np.abs(lhs - uncorrected)) / scale) if np.any(lhs) else float(np.max(np.abs(uncorrected))))


def _support(phi_hat):
    if phi_hat.support is None:
        raise ValueError("a compactly supported input is required")
    return phi_hat.support


def verify_transformed_F1(n: int, y: float, phi_hat: FreqFunction | None = None, xi=None) -> FourierCheck:
    """Compare the transform of (F1 phi)_n assembled by convolution with the h/g form.

    Left side: 2 pi i P phi^ minus the convolutions of phi^, E phi^ and
    phi^/E with the theta-quotient transforms.  Right side:
    -2 pi i e^{2 pi i (alpha + beta i) xi} / (J (1 - gamma E)) (P g'' + Q1 g' + R1 g)
    with h, g built by quadrature.  ``uncorrected_rel`` drops the 1/(1 - gamma E).
    """
    phi_hat = bump(0.5, 1.5) if phi_hat is None else phi_hat
    lo, hi = _support(phi_hat)
    if xi is None:
        xi = np.concatenate([np.linspace(-0.6, -0.05, 6), np.linspace(0.1, 2.6, 26)])
    xi = np.asarray(xi, dtype=float)
    prm = SymbolParams(n, y)
    sym = symbols(n, y, xi_max=5.0)
    tr = ft_theta_ratios(n, y)
    E = lambda s: _E(np.asarray(s, dtype=float))
    phi_next = FreqFunction(lambda s: E(s) * phi_hat(s))
    phi_prev = FreqFunction(lambda s: phi_hat(s) / E(s))
    g, gs = prm.gamma, prm.gamma_star
    ab = 2j * math.pi * (prm.alpha + 1j * prm.beta)

    def dh(s):  # h' = (1 - gamma E) e^{-2 pi i (alpha + beta i) s} phi^
        return (1 - g * E(s)) * np.exp(-ab * s) * phi_hat(s)

    lhs, rhs, uncorrected = [], [], []
    for w in xi:
        base = 2j * math.pi * _P(w) * phi_hat(w)
        conv = (-_conv(phi_hat, tr.ds_theta, w, lo, hi)
                - _conv(phi_hat, tr.dt_theta_prev, w, lo, hi)
                - LAM_INV * _conv(phi_next, tr.theta_prev_ratio, w, lo, hi)
                + LAM * _conv(phi_prev, tr.theta_ratio_prev, w, lo, hi))
        lhs.append(complex(base + conv))
        h = _quad(lambda s: complex(dh(s)), lo, min(w, hi))
        hp = complex(dh(w))
        # g = int_w^inf h J = -h(w) K(w) - int_w^inf h'(s) K(s) ds
        gv = -h * sym.K(w) - _quad(lambda s: complex(dh(s) * sym.K(s)), max(w, lo), hi)
        J, dJ = sym.J(w), sym.J.d(w)
        g1 = -h * J
        g2 = -hp * J - h * dJ
        core = sym.P1(w) * g2 + sym.Q1(w) * g1 + sym.R1(w) * gv
        pre = -2j * math.pi * np.exp(ab * w) / J
        rhs.append(complex(pre * core / (1 - g * E(w))))
        uncorrected.append(complex(pre * core))
    return _compare(xi, np.array(lhs), np.array(rhs), np.array(uncorrected))


def verify_transformed_F0(n: int, y: float, sigma_hat: FreqFunction | None = None, xi=None) -> FourierCheck:
    """Compare the transform of (F0 sigma)_n by convolution with the h1 (y>0) or h2 (y<0) form.

    y > 0: e^{2 pi i (alpha0 + beta0 i) xi}/(E - 1) (P0 h1' + Q0 h1).
    y < 0: -e^{2 pi i (alpha0 - beta0 i) xi}/(E - 1) (P0 h2' + Q0 h2).
    ``uncorrected_rel`` uses P, Q in place of P0, Q0 for y < 0.
    """
    if y == 0:
        raise ValueError("y must be nonzero")
    sigma_hat = bump(0.5, 1.5) if sigma_hat is None else sigma_hat
    lo, hi = _support(sigma_hat)
    if xi is None:
        xi = np.concatenate([np.linspace(-0.6, -0.05, 6), np.linspace(0.1, 2.6, 26)])
    xi = np.asarray(xi, dtype=float)
    prm = SymbolParams(n, y)
    sym = symbols(n, y, xi_max=5.0)
    om = ft_omega_ratios(n, y)
    E = lambda s: _E(np.asarray(s, dtype=float))
    fwd = FreqFunction(lambda s: (E(s) - 1) * sigma_hat(s))    # (sigma_{n+1} - sigma_n)^
    bwd = FreqFunction(lambda s: (1 - 1 / E(s)) * sigma_hat(s))  # (sigma_n - sigma_{n-1})^
    upper = y > 0
    ab = 2j * math.pi * (prm.alpha0 + (1j if upper else -1j) * prm.beta0)

    def dh(s):
        return np.exp(-ab * s) * (E(s) - 1) * sigma_hat(s)

    lhs, rhs, uncorrected = [], [], []
    for w in xi:
        val = (2j * math.pi * w * sigma_hat(w)
               - LAM * (fwd(w) + _conv(fwd, om.omega_prev_ratio, w, lo, hi))
               - LAM_INV * (bwd(w) + _conv(bwd, om.omega_ratio_prev, w, lo, hi)))
        lhs.append(complex(val))
        if upper:
            hv = _quad(lambda s: complex(dh(s)), lo, min(w, hi))
            hp = complex(dh(w))
            pre = np.exp(ab * w) / (E(w) - 1)
        else:
            hv = _quad(lambda s: complex(dh(s)), max(w, lo), hi)
            hp = -complex(dh(w))
            pre = -np.exp(ab * w) / (E(w) - 1)
        rhs.append(complex(pre * (_P0(w) * hp + _Q0(w) * hv)))
        if upper:
            uncorrected.append(rhs[-1])
        else:
            uncorrected.append(complex(pre * (sym.P(w) * hp + sym.Q(w) * hv)))
    return _compare(xi, np.array(lhs), np.array(rhs), np.array(uncorrected))
