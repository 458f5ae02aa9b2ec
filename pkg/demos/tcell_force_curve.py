"""Casimir force and gradient for one T-protrusion unit cell.

Sweeps the electrode across the default cell, splits the PFA estimate into
its y-facing and x-facing channels, and prints where the combined gradient
changes sign. The same curve with perfect conductors shows how much finite
conductivity costs.
"""
import time

import numpy as np

from nanocasimir import geometry as G
from nanocasimir import materials as M
from nanocasimir import pfa

SI = (M.PAPER_SILICON, M.PAPER_SILICON)
PC = (M.PERFECT_CONDUCTOR, M.PERFECT_CONDUCTOR)

cell = G.make_t_cell()
d = np.arange(0, 221) * 5e-9
print(f"unit cell: period {cell.period * 1e6:.1f} um, tip gap {G.tip_gap(cell) * 1e9:.0f} nm, "
      f"alignment at {cell.alignment_displacement * 1e9:.0f} nm")

t0 = time.perf_counter()
fy = pfa.force_curve(cell, d, "ForceY", SI, workers=4)
ex = pfa.force_curve(cell, d, "EnergyX", SI, workers=4)
si = pfa.combined_curve(fy, ex)
print(f"silicon sweep of {d.size} points in {time.perf_counter() - t0:.1f} s")

print("\n  d [nm]   F_y [N]       F_x [N]       F' [N/m]")
for i in range(0, d.size, 20):
    print(f"  {d[i] * 1e9:6.0f}  {fy.force[i]: .3e}  {ex.force[i] + 0.0: .3e}  {si.gradient[i]: .3e}")

print("\ny-facing channel alone, sign changes:", fy.sign_changes())
print("combined gradient sign changes [nm]:", np.round(si.sign_changes() * 1e9, 1))
print(f"gradient minimum at {si.gradient_minimum() * 1e9:.1f} nm")

pc = pfa.pfa_curve(cell, d, PC, workers=4)
reduction = 1 - np.max(np.abs(si.force)) / np.max(np.abs(pc.force))
print(f"finite conductivity lowers the peak force by {reduction:.0%}")

grown = pfa.pfa_curve(cell.offset(5e-9), d, SI, workers=4)
ratio = pfa.closest_approach_force(grown, cell) / pfa.closest_approach_force(si, cell)
print(f"growing both bodies by 5 nm multiplies the closest-approach force by {ratio:.2f}")
