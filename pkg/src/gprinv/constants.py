"""Electromagnetic constants shared by every module.

The propagation speed uses the conventional GPR value c = 3e8 m/s (the
constant used in travel-time/permittivity conversions throughout this
field), and the vacuum permittivity is derived from it so the time-domain
solver, the frequency-domain oracle and the travel-time algebra all agree
to machine precision.
"""

import math

C_LIGHT = 3.0e8  # m/s
MU_0 = 4.0e-7 * math.pi  # H/m
EPS_0 = 1.0 / (MU_0 * C_LIGHT**2)  # F/m
ETA_0 = MU_0 * C_LIGHT  # vacuum impedance, ohm
