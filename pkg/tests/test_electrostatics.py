import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import epsilon_0

from nanocasimir import electrostatics as E
from nanocasimir import geometry as G
from nanocasimir.errors import ContactError, DomainError


@pytest.fixture(scope="module")
def plates():
    return G.parallel_plates(400e-9, 100e-9)


def test_filled_plates_capacitance_exact(plates):
    c = E.mutual_capacitance(plates, 0.0, 5e-9) / plates.thickness
    assert c == pytest.approx(epsilon_0 * 400e-9 / 100e-9, rel=1e-6)


def test_off_grid_plate_faces_use_cut_edges():
    # faces at 2.5 nm off the grid: cut-edge weights keep C' exact
    g = G.parallel_plates(400e-9, 102.5e-9, depth=201.25e-9)
    c = E.mutual_capacitance(g, 0.0, 5e-9, check_spacing=False) / g.thickness
    assert c == pytest.approx(epsilon_0 * 400e-9 / 102.5e-9, rel=1e-3)


def test_fringing_raises_capacitance():
    g = G.parallel_plates(400e-9, 100e-9, period=800e-9)
    c = E.mutual_capacitance(g, 0.0, 5e-9) / g.thickness
    assert c > epsilon_0 * 400e-9 / 100e-9


def test_full_and_restricted_solves_agree():
    # open gap: the coupling field reaches the box, so both use the wide box
    g = G.parallel_plates(400e-9, 100e-9, period=800e-9)
    full = E.solve_laplace(g, 0.0, 1.0, 5e-9, full_field=True)
    part = E.solve_laplace(g, 0.0, 1.0, 5e-9, full_field=False)
    assert not part.enclosed
    assert part.capacitance_per_length() == pytest.approx(full.capacitance_per_length(), rel=1e-9)
    assert full.residual < 1e-10


def test_enclosed_cell_is_box_independent():
    g = G.make_t_cell()
    kw = dict(spacing=10e-9, check_spacing=False)
    tight = E.solve_laplace(g, 600e-9, 1.0, full_field=False, **kw)
    wide = E.solve_laplace(g, 600e-9, 1.0, full_field=True, **kw)
    assert tight.enclosed
    assert tight.capacitance_per_length() == pytest.approx(wide.capacitance_per_length(), rel=1e-9)


def test_open_gap_margin_converged():
    # a uniform field leaks through the openings to the box, so an open gap
    # converges algebraically in the margin; 3 um keeps it below 0.5%
    g = G.parallel_plates(400e-9, 100e-9, period=800e-9)
    assert E.margin_sensitivity(g, 0.0, 5e-9)["relative_change"] < 5e-3


@pytest.mark.parametrize("geom, d", [(G.parallel_plates(400e-9, 100e-9), 0.0), (G.make_t_cell(), 770e-9)])
def test_charge_equals_field_energy_when_enclosed(geom, d):
    # discrete Green identity: -Q'_beam V = 2 W'
    sol = E.solve_laplace(geom, d, 0.7, 5e-9, full_field=False)
    assert sol.capacitance_per_length() == pytest.approx(2 * sol.field_energy() / 0.7**2, rel=1e-10)


def test_force_scales_as_v_squared(plates):
    f1 = E.electrostatic_force(plates, 20e-9, 1.0, 5e-9)
    f2 = E.electrostatic_force(plates, 20e-9, 3.0, 5e-9)
    assert f1 > 0  # attraction towards the beam
    assert f2 == pytest.approx(9 * f1, rel=1e-12)
    analytic = 0.5 * epsilon_0 * 400e-9 * plates.thickness / (80e-9) ** 2
    assert f1 == pytest.approx(analytic, rel=5e-3)


def test_plate_beta_law(plates):
    d = np.arange(0, 9) * 5e-9
    b = E.beta_of_d(plates, d, spacing=5e-9)
    analytic = epsilon_0 * 400e-9 * plates.thickness / (100e-9 - d) ** 3
    np.testing.assert_allclose(b.beta, analytic, rtol=0.03)
    assert b(12.5e-9) == pytest.approx(0.5 * (b.beta[2] + b.beta[3]))
    with pytest.raises(DomainError):
        b(100e-9)


def test_guards(plates):
    with pytest.raises(DomainError):
        E.solve_laplace(plates, 0.0, 1.0, 20e-9)  # spacing > gap / 8
    with pytest.raises(DomainError):
        E.solve_laplace(plates, 2.5e-9, 1.0, 5e-9)  # d off the grid
    with pytest.raises(ContactError):
        E.solve_laplace(plates, 100e-9, 1.0, 5e-9, check_spacing=False)
    with pytest.raises(ValueError):
        E.beta_of_d(plates, [0.0, 5e-9, 15e-9])


def test_field_dump_round_trip(plates):
    sol = E.solve_laplace(plates, 0.0, 2.0, 5e-9)
    blob = sol.to_bytes()
    assert blob[:4] == b"CFES"
    assert len(blob) == 32 + 8 * sol.potential.size
    spacing, phi = E.read_field_dump(blob)
    assert spacing == pytest.approx(5e-9)
    np.testing.assert_array_equal(np.isnan(phi), np.isnan(sol.potential))
    np.testing.assert_array_equal(np.nan_to_num(phi), np.nan_to_num(sol.potential))
    with pytest.raises(ValueError):
        E.read_field_dump(b"XXXX" + blob[4:])
    with pytest.raises(ValueError):
        E.read_field_dump(blob[:-8])


def test_potential_bounded_by_conductors(plates):
    sol = E.solve_laplace(plates, 0.0, 1.5, 5e-9)
    phi = sol.potential
    assert np.nanmin(phi) >= -1e-12
    assert np.nanmax(phi) <= 1.5 + 1e-12
    np.testing.assert_allclose(phi[sol.electrode_mask], 1.5)
    np.testing.assert_allclose(phi[sol.beam_mask], 0.0)


def test_beta_csv_round_trip(plates):
    b = E.beta_of_d(plates, np.arange(0, 4) * 5e-9, spacing=5e-9)
    back = E.BetaCurve.from_csv(b.to_csv("h"))
    np.testing.assert_allclose(back.beta, b.beta, rtol=1e-9)
    np.testing.assert_allclose(back.displacements, b.displacements, rtol=1e-12)


def test_richardson_refinement(plates):
    d = np.arange(0, 3) * 10e-9
    coarse = E.beta_of_d(plates, d, spacing=10e-9)
    fine = E.beta_of_d(plates, d, spacing=10e-9, richardson=True, max_halvings=1)
    assert fine.spacing == pytest.approx(5e-9)
    np.testing.assert_allclose(fine.error, np.abs(fine.beta - coarse.beta))
    np.testing.assert_array_equal(fine.flagged, fine.error > 0.02 * np.abs(fine.beta))


@settings(max_examples=6, deadline=None)
@given(st.integers(12, 40), st.integers(1, 4))
def test_plate_capacitance_decreases_with_gap(gap_steps, extra):
    h = 5e-9
    g = G.parallel_plates(200e-9, gap_steps * h * 2, period=400e-9)
    c1 = E.mutual_capacitance(g, 0.0, h)
    c2 = E.mutual_capacitance(g, extra * h, h)
    assert c2 > c1
