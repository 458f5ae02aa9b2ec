"""Casimir and electrostatic forces between nanostructured silicon surfaces.

PFA force curves for 2D T-shaped unit cells, a Lifshitz plate kernel,
a finite-difference electrostatic solver, and the resonator calibration
pipeline that turns frequency shifts into force gradients.
"""

__version__ = "0.1.0"
