"""Integer-indexed families of plane functions.

A :class:`SeqField` is either a closed form in the symbols ``n, x, y``
(differentiated exactly with sympy and compiled with ``lambdify``) or a
grid sample of the n = 0 member of a traveling family, differentiated with
interior central differences.  Both kinds expose ``value(n, x, y)`` and
``jet(n, x, y)`` so they can be fed to every operator in the package.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from ._constants import DELTA
from .exact import TauJet

N, X, Y = sp.symbols("n x y", real=True)
_SQ2 = sp.sqrt(2)


class StencilOutOfDomain(IndexError):
    """A grid-sampled field was evaluated where its stencil leaves the grid."""


class GridMisalignment(ValueError):
    """The grid spacing does not divide the traveling shift DELTA."""


class OffNodeEvaluation(ValueError):
    """A grid-sampled field was asked for a value away from its nodes."""


@functools.lru_cache(maxsize=None)
def _compile(expr: sp.Expr):
    """Lambdify value and all partials up to order two of ``expr``."""
    dx, dy = sp.diff(expr, X), sp.diff(expr, Y)
    parts = [expr, dx, dy, sp.diff(dx, X), sp.diff(dx, Y), sp.diff(dy, Y)]
    return [sp.lambdify((N, X, Y), part, modules="numpy") for part in parts]


def _broadcast(fn, n, x, y, shape):
    out = fn(n, x, y)
    return np.broadcast_to(np.asarray(out), shape)


@dataclass(frozen=True)
class GridSpec:
    """Square node grid of half-width ``L`` with spacing ``h = DELTA / k``.

    Nodes are ``x_i = (i - m) h`` for ``i = 0..2m`` with ``m = round(L / h)``,
    so the traveling shift DELTA is exactly ``k`` columns.
    """

    half_width: float
    refine: int

    def __post_init__(self):
        if self.refine < 1:
            raise ValueError("refine must be a positive integer")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")

    @property
    def h(self) -> float:
        return DELTA / self.refine

    @property
    def m(self) -> int:
        return int(round(self.half_width / self.h))

    @property
    def L(self) -> float:
        """Half-width actually used (a whole number of steps)."""
        return self.m * self.h

    @property
    def nx(self) -> int:
        return 2 * self.m + 1

    @property
    def ny(self) -> int:
        return 2 * self.m + 1

    @property
    def axis(self) -> np.ndarray:
        return (np.arange(self.nx) - self.m) * self.h

    def mesh(self):
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)


@dataclass(frozen=True, eq=False)
class SeqField:
    """A Z-indexed family F_n(x, y).

    Use :meth:`from_expr` for closed forms and :meth:`from_grid` for samples.
    ``traveling`` records F_{n+1}(x, y) = F_n(x + DELTA, y).
    """

    expr: sp.Expr | None = None
    grid: GridSpec | None = None
    samples: np.ndarray | None = field(default=None, repr=False)
    traveling: bool = False
    name: str = ""

    # ----------------------------------------------------------- builders
    @classmethod
    def from_expr(cls, expr, traveling: bool | None = None, name: str = "") -> "SeqField":
        """Closed form in the sympy symbols ``N, X, Y`` of this module.

        ``traveling`` is detected symbolically when not given.
        """
        expr = sp.sympify(expr)
        if traveling is None:
            shifted = expr.subs(N, N + 1) - expr.subs(X, X + _SQ2 / 4)
            traveling = sp.simplify(shifted) == 0
        return cls(expr=expr, traveling=bool(traveling), name=name or str(expr))

    @classmethod
    def from_grid(cls, samples, grid: GridSpec, name: str = "grid") -> "SeqField":
        """n = 0 member of a traveling family sampled on ``grid`` nodes."""
        samples = np.array(samples, copy=True)
        if samples.shape != grid.shape:
            raise ValueError(f"samples shape {samples.shape} does not match grid {grid.shape}")
        samples.setflags(write=False)
        return cls(grid=grid, samples=samples, traveling=True, name=name)

    @classmethod
    def zero(cls) -> "SeqField":
        return cls.from_expr(sp.Integer(0), traveling=True, name="0")

    @classmethod
    def constant(cls, c) -> "SeqField":
        return cls.from_expr(sp.sympify(c), traveling=True, name=str(c))

    @property
    def is_grid(self) -> bool:
        return self.samples is not None

    # ----------------------------------------------------------- algebra
    def __add__(self, other: "SeqField") -> "SeqField":
        return self._combine(other, 1, 1)

    def __sub__(self, other: "SeqField") -> "SeqField":
        return self._combine(other, 1, -1)

    def __rmul__(self, a) -> "SeqField":
        if self.is_grid:
            return SeqField.from_grid(a * self.samples, self.grid, name=f"{a}*{self.name}")
        return SeqField(expr=sp.sympify(a) * self.expr, traveling=self.traveling,
                        name=f"{a}*({self.name})")

    def _combine(self, other, a, b):
        if self.is_grid != other.is_grid:
            raise TypeError("cannot combine a grid field with a closed-form field")
        if self.is_grid:
            if self.grid != other.grid:
                raise ValueError("grid fields live on different grids")
            return SeqField.from_grid(a * self.samples + b * other.samples, self.grid)
        return SeqField(expr=a * self.expr + b * other.expr,
                        traveling=self.traveling and other.traveling,
                        name=f"({self.name}) {'+' if b > 0 else '-'} ({other.name})")

    # ----------------------------------------------------------- evaluation
    def value(self, n, x, y):
        if self.is_grid:
            return self._grid_values(n, x, y, order=None)[0]
        shape = np.broadcast(n, x, y).shape
        return _broadcast(_compile(self.expr)[0], n, x, y, shape) + np.zeros(shape)

    def jet(self, n, x, y) -> TauJet:
        """Value and s/t partials up to second order."""
        if self.is_grid:
            val, fx, fy, fxx, fxy, fyy = self._grid_values(n, x, y, order=2)
        else:
            shape = np.broadcast(n, x, y).shape
            val, fx, fy, fxx, fxy, fyy = (_broadcast(f, n, x, y, shape) + np.zeros(shape)
                                          for f in _compile(self.expr))
        d_s = 0.5 * (fx - 1j * fy)
        d_t = 0.5 * (fx + 1j * fy)
        d_ss = 0.25 * (fxx - 2j * fxy - fyy)
        d_tt = 0.25 * (fxx + 2j * fxy - fyy)
        d_st = 0.25 * (fxx + fyy)
        return TauJet(val, d_s, d_t, d_ss, d_st, d_tt)

    def _grid_values(self, n, x, y, order):
        g = self.grid
        n, x, y = np.broadcast_arrays(np.asarray(n), np.asarray(x, float), np.asarray(y, float))
        fi = x / g.h + g.m + n * g.refine
        fj = y / g.h + g.m
        i, j = np.rint(fi).astype(int), np.rint(fj).astype(int)
        if np.any(np.abs(fi - i) > 1e-8) or np.any(np.abs(fj - j) > 1e-8):
            raise OffNodeEvaluation("grid fields are only defined at grid nodes")
        reach = 0 if order is None else 1
        if (np.any(i < reach) or np.any(i > g.nx - 1 - reach)
                or np.any(j < reach) or np.any(j > g.ny - 1 - reach)):
            raise StencilOutOfDomain("stencil leaves the sampled grid")
        u = self.samples
        val = u[i, j]
        if order is None:
            return (val,)
        h = g.h
        fx = (u[i + 1, j] - u[i - 1, j]) / (2 * h)
        fy = (u[i, j + 1] - u[i, j - 1]) / (2 * h)
        fxx = (u[i + 1, j] - 2 * val + u[i - 1, j]) / h ** 2
        fyy = (u[i, j + 1] - 2 * val + u[i, j - 1]) / h ** 2
        fxy = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) / (4 * h ** 2)
        return val, fx, fy, fxx, fxy, fyy

    def sample(self, grid: GridSpec, n: int = 0) -> np.ndarray:
        """Values of member ``n`` at every node of ``grid``."""
        xx, yy = grid.mesh()
        return np.asarray(self.value(n, xx, yy))


# -------------------------------------------------------------- standard fields

THETA_EXPR = (2 * _SQ2 * X + N) ** 2 + 4 * Y ** 2 + sp.Rational(1, 4)
OMEGA_EXPR = 2 * _SQ2 * X + N + 2 * sp.I * Y + (_SQ2 - 1) / 2
LUMP_EXPR = sp.log(THETA_EXPR.subs(N, N - 1)) - sp.log(THETA_EXPR)


def theta_field() -> SeqField:
    return SeqField.from_expr(THETA_EXPR, traveling=True, name="theta")


def omega_field() -> SeqField:
    return SeqField.from_expr(OMEGA_EXPR, traveling=True, name="omega")


def lump_field() -> SeqField:
    return SeqField.from_expr(LUMP_EXPR, traveling=True, name="Q")
