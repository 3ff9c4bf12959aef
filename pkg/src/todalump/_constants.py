"""Numerical constants shared by every module.

The lattice shift ``DELTA = 1/(2*sqrt(2))`` is computed as ``sqrt(1/8)``:
1/8 is exactly representable, so the square root is correctly rounded and
``DELTA`` is the closest double to the exact value.
"""
import math

SQRT2 = math.sqrt(2.0)

#: Traveling shift: U_{n+1}(x, y) = U_n(x + DELTA, y).
DELTA = math.sqrt(0.125)

#: Backlund parameter lambda = sqrt(2) + 1; lambda - 1/lambda = 2.
LAM = 1.0 + SQRT2
LAM_INV = SQRT2 - 1.0

#: Constant offset in omega_n = 2*sqrt(2)*x + n + 2iy + OMEGA_OFFSET.
OMEGA_OFFSET = (SQRT2 - 1.0) / 2.0

#: Seed used by every sampler unless the caller overrides it.
DEFAULT_SEED = 20240611
