"""
Frequency symbols and the ODE in xi
===================================

After an x-Fourier transform the traveling shift becomes multiplication by
E(xi) = exp(2 pi i xi / (2 sqrt 2)) and the linearized Backlund system turns
into ODEs in xi.  This script looks at the symbols near xi = 0, the
fundamental pair g1, g2 and a particular solution by variation of parameters.
"""
import math

import numpy as np

from todalump import fourier as fo

y = 1.0
sym = fo.symbols(0, y)
print("Q(0) =", sym.Q(0.0), "  Q'(0) =", sym.Q.d(0.0), "(pi i =", 1j * math.pi, ")")
print("J(0) =", sym.J(0.0))
print("P(xi)/xi^2 as xi -> 0:", fo.small_xi_coefficient(sym.P), " expected", 1j * math.pi / 4)
print("zeros of J in [-6, 6]:", [z for z in sym.Q1.singular_set if abs(z) <= 6])

# The closed-form transforms of the theta quotients agree with QUADPACK's
# Fourier integrator (which handles the slow 1/x tails).
tr = fo.ft_theta_ratios(0, y)
xi = np.array([-0.4, 0.25, 0.8])


def theta(n, x):
    return (2 * math.sqrt(2) * x + n) ** 2 + 4 * y * y + 0.25


ref = fo.fourier_quadrature(lambda x: theta(-1, x) / theta(0, x) - 1, xi)
print("theta_{-1}/theta_0 - 1: closed form vs quadrature",
      np.max(np.abs(tr.theta_prev_ratio(xi) - ref)))

# Fundamental solutions: g1 -> 1 and g2 ~ xi^-2 at the regular singular point 0.
fund = fo.ode_fundamental_g(y)
side = np.linspace(0.05, 2.0, 40)
r1, r2 = fund.equation_residual(np.concatenate([-side[::-1], side]))
print("plug-back residual of g1, g2:", r1.max(), r2.max())
# The Wronskian blows up like -2 xi^-3 at the origin.
g1, g2, d1, d2 = fund.evaluate(np.array([1e-3]))
print("xi^3 W at xi = 1e-3:", (1e-9 * (g1 * d2 - d1 * g2))[0])

# Variation of parameters for a forcing concentrated near xi = 1.
res = fo.variation_of_parameters(fund, lambda s: np.exp(-((s - 1) / 0.18) ** 2))
print("forced equation residual:", res.residual)

# The transformed F1 identity holds once the factor 1/(1 - gamma E) is included.
chk = fo.verify_transformed_F1(0, y)
print(f"F1 transform: with the factor {chk.max_rel:.1e}, without it {chk.uncorrected_rel:.2f}")
