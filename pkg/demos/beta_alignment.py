"""Electrostatic geometry factor beta(d) and the alignment landmark.

A parallel-plate capacitor checks the Laplace solver against the analytic
law first; the T-cell curve then locates its beta minimum, which marks the
displacement where the caps line up.
"""
import numpy as np
from scipy.constants import epsilon_0

from nanocasimir import electrostatics as E
from nanocasimir import geometry as G

plates = G.parallel_plates(400e-9, 100e-9)
d = np.arange(0, 9) * 5e-9
b = E.beta_of_d(plates, d, spacing=5e-9)
law = epsilon_0 * 400e-9 * plates.thickness / (100e-9 - d) ** 3
print("plates: max deviation from eps0 w t / g^3 =", f"{np.max(np.abs(b.beta / law - 1)):.2%}")

cell = G.make_t_cell()
d = np.arange(52, 99) * 10e-9
curve = E.beta_of_d(cell, d, spacing=5e-9, workers=4)
print("\n  d [nm]   beta [N/(m V^2)]")
for x, y in zip(d[::4], curve.beta[::4]):
    print(f"  {x * 1e9:6.0f}   {y: .4e}")
print(f"\nbeta minimum at {curve.minimum() * 1e9:.1f} nm "
      f"(caps align at {cell.alignment_displacement * 1e9:.0f} nm)")

sol = E.solve_laplace(cell, 770e-9, 1.0, 5e-9)
print(f"mutual capacitance per length at 770 nm: {sol.capacitance_per_length():.3e} F/m")
