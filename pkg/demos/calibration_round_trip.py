"""Synthetic calibration: inject alpha, k and a residual-voltage ramp, then recover them.

The Casimir curve and beta(d) here are smooth stand-ins so the script runs
in a second; `nanocasimir calibrate` does the same with the computed curves.
"""
import warnings

import numpy as np

from nanocasimir import calibration as C
from nanocasimir.electrostatics import BetaCurve
from nanocasimir.pfa import CurveMode, ForceCurve
from nanocasimir.resonator import PAPER_BEAM, UnitLayout

d_beta = np.arange(50, 101) * 10e-9
beta = BetaCurve(d_beta, -1.5e-3 + 2e-3 * ((d_beta - 770e-9) / 300e-9) ** 2)
dc = np.arange(100, 201) * 5e-9
casimir = ForceCurve(dc, np.zeros_like(dc), 4e-8 * np.tanh((dc - 770e-9) / 80e-9), CurveMode.COMBINED, {})

layout = UnitLayout.centered(PAPER_BEAM)
d = np.arange(56, 95) * 10e-9
truth = C.SyntheticTruth(v0_d=d[[0, -1]], v0=np.array(C.PAPER_V0_RAMP))
sigma = C.paper_scale_noise(casimir, d, weights=layout.weights)
grid = C.synthesize_grid(truth, beta, casimir, np.sqrt(d / truth.alpha), np.linspace(-0.3, 0.3, 21),
                         sigma, seed=1, weights=layout.weights)
print(f"{grid.v_comb.size} comb voltages x {grid.v_e.size} electrode voltages, noise {sigma:.3g} rad/s")

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    r = C.fit_alpha_k(grid, beta, layout.weights)

print(f"alpha = {r.alpha:.3f} +/- {r.alpha_err:.3f} nm/V^2   (truth {truth.alpha * 1e9:.2f})")
print(f"k     = {r.k_cal:.4e} +/- {r.k_err:.1e}      (truth {truth.k:.2e})")
ok = ~r.v0_table.flagged
rmse = np.sqrt(np.mean((r.v0_table.v0[ok] - truth.v0_at(r.v0_table.d[ok])) ** 2))
print(f"V0 RMSE {rmse * 1e3:.3f} mV over {ok.sum()} columns ({(~ok).sum()} flagged near beta = 0)")
# the residual is the whole-beam gradient: per-unit curve times the weight sum
injected = layout.total_weight * np.interp(r.casimir_d, dc, casimir.gradient)
pull = (r.casimir_gradient - injected) / r.casimir_err
print(f"recovered Casimir gradient within 3 sigma at {np.mean(np.abs(pull) < 3):.0%} of points")
