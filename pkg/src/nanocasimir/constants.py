"""Physical constants (CODATA 2018, SI units).

Kept in one table so every module agrees to the last digit.
"""

HBAR = 1.054571817e-34  # J s
C_LIGHT = 299792458.0  # m/s
E_CHARGE = 1.602176634e-19  # C
EPS0 = 8.8541878128e-12  # F/m
M_E = 9.1093837015e-31  # kg
K_B = 1.380649e-23  # J/K

NM = 1e-9
