import numpy as np
import pytest

from conftest import random_field
from nab2lab import lie
from nab2lab.algebra import TwoForm
from nab2lab.disk import (BoundaryFourier, DiskTwoFormFT, abelian_obstruction, obstruction_cartesian,
                          pure_gauge_boundary, smoothness_report, solve_extension)
from nab2lab.poly import PolyField


def scalar_form(A: PolyField) -> TwoForm:
    cap = A.cap
    return TwoForm(A, PolyField.zeros([1, 1], cap), PolyField.zeros([1, 1], cap),
                   PolyField.zeros([1, 1, 1], cap))


def solve(w, bnd, n_max=6, k_max=6, **kw):
    return solve_extension(DiskTwoFormFT.from_two_form(w, n_max, k_max), bnd, **kw)


def random_boundary(rng, N, modes, n_max, amp=1.0):
    table = {0: rng.uniform(-amp, amp, N)}
    for n in range(1, modes + 1):
        table[n] = rng.uniform(-amp, amp, N) + 1j * rng.uniform(-amp, amp, N)
    return BoundaryFourier.from_modes(table, N, n_max)


def random_nonabelian(rng, degree=3, amp=0.2):
    C = lie.so3().C
    return TwoForm(random_field(rng, [3], degree, degree, amp), random_field(rng, [3, 3], degree, degree, amp),
                   random_field(rng, [3, 3], degree, degree, amp), PolyField.constant(C, degree))


# -- boundary data -----------------------------------------------------------------

def test_boundary_modes_are_mirrored():
    b = BoundaryFourier.from_modes({0: [1.0], 2: [0.5 + 0.25j]}, 1, 3)
    assert b.mode(-2)[0] == pytest.approx(0.5 - 0.25j)
    assert abs(b.evaluate(0.4)[0].imag) < 1e-15
    with pytest.raises(ValueError):
        BoundaryFourier.from_modes({0: [1j]}, 1, 2)


def test_boundary_from_samples_recovers_modes(rng):
    b = random_boundary(rng, 2, 4, 4)
    again = BoundaryFourier.from_function(b.evaluate, 4, samples=16)
    assert np.allclose(again.modes, b.modes, atol=1e-14)


# -- closed forms --------------------------------------------------------------------

def test_zero_form_solves_radial_component_directly(rng):
    b = BoundaryFourier.from_modes({1: [0.3 - 0.2j], 3: [0.1j]}, 1, 4)
    sol = solve(TwoForm.zero(1, 2), b, n_max=4, k_max=3)
    assert sol.obstruction == pytest.approx([0.0], abs=1e-15)
    for n in (-3, -1, 1, 3):
        assert sol.phi_r.coef(n, 0)[0] == pytest.approx(-1j / n * abs(n) * b.mode(n)[0])
    assert sol.residual == 0


def test_unit_area_density():
    sol = solve(scalar_form(PolyField.constant([1.0], 0)), BoundaryFourier.zeros(1, 6))
    assert sol.obstruction[0] == pytest.approx(0.5, abs=1e-12)
    assert sol.residual <= 1e-10
    rep = smoothness_report(sol)
    assert rep.violations == [("phi_theta", 0, 0, pytest.approx(0.5))]


def test_constant_boundary_is_the_obstruction():
    b = BoundaryFourier.from_modes({0: [0.37]}, 1, 3)
    sol = solve(TwoForm.zero(1, 1), b, n_max=3, k_max=3)
    assert sol.obstruction[0] == pytest.approx(0.37)
    assert smoothness_report(sol).obstruction_norm == pytest.approx(0.37)


def test_pure_harmonic_boundary_is_unobstructed():
    b = BoundaryFourier.from_modes({1: [0.5, -0.25j]}, 2, 4)
    assert np.allclose(obstruction_cartesian(TwoForm.zero(2, 1), b, 4, 4), 0, atol=1e-15)
    assert smoothness_report(solve(TwoForm.zero(2, 1), b, 4, 4)).smooth


def test_odd_density_integrates_to_zero():
    A = PolyField.monomial(1, 0, 1, [1.0])
    assert obstruction_cartesian(scalar_form(A), BoundaryFourier.zeros(1, 6), 6, 6)[0] == \
        pytest.approx(0.0, abs=1e-14)


def test_radial_density():
    A = PolyField.monomial(2, 0, 2, [1.0]) + PolyField.monomial(0, 2, 2, [1.0])
    assert obstruction_cartesian(scalar_form(A), BoundaryFourier.zeros(1, 6), 6, 6)[0] == \
        pytest.approx(0.25, abs=1e-13)


def test_quadrature_oracle_on_known_values():
    b = BoundaryFourier.from_modes({0: [0.3]}, 1, 2)
    assert abelian_obstruction(PolyField.constant([1.0], 0), b) == pytest.approx(0.8)
    assert abelian_obstruction(lambda x, y: x * x + y * y, BoundaryFourier.zeros(1, 1)) == pytest.approx(0.25)


# -- properties ------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(6))
def test_abelian_obstruction_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    A = random_field(rng, [1], 4, 4)
    b = random_boundary(rng, 1, 5, 6)
    sol = solve(scalar_form(A), b, 6, 6)
    assert sol.iterations == 1
    assert sol.residual <= 1e-10
    assert sol.obstruction[0] == pytest.approx(abelian_obstruction(A, b), abs=1e-10)


def test_abelian_solution_is_stable_under_more_levels(rng):
    A = random_field(rng, [1], 3, 3)
    b = random_boundary(rng, 1, 3, 4)
    lo = solve(scalar_form(A), b, 4, 4)
    hi = solve(scalar_form(A), b, 4, 7)
    assert np.array_equal(lo.obstruction, hi.obstruction)
    assert np.array_equal(lo.phi_r.coeffs, hi.phi_r.coeffs[..., :5])


@pytest.mark.parametrize("seed", range(3))
def test_nonabelian_solution_satisfies_its_equations(seed):
    rng = np.random.default_rng(100 + seed)
    sol = solve(random_nonabelian(rng), random_boundary(rng, 3, 4, 5, 0.2), 5, 6)
    assert sol.residual <= 1e-10
    assert sol.iterations > 1
    assert sol.imag_defect <= 1e-10


def test_neumann_mode_agrees_with_dense(rng):
    w = random_nonabelian(rng, amp=0.1)
    b = random_boundary(rng, 3, 3, 4, 0.1)
    dense = solve(w, b, 4, 5)
    neumann = solve(w, b, 4, 5, method="neumann")
    assert np.allclose(dense.obstruction, neumann.obstruction, atol=1e-12)


def _quadratic_gauge(rng):
    q = rng.uniform(-1, 1, (3, 6))

    def F(x, y):
        mon = np.array([1, x, y, x * x, x * y, y * y])
        return q @ mon, q @ np.array([0, 1, 0, 2 * x, y, 0]), q @ np.array([0, 0, 1, 0, x, 2 * y])
    return F


def test_pure_gauge_obstruction_shrinks_with_levels(rng):
    S = lie.so3()
    b = pure_gauge_boundary(S, _quadratic_gauge(rng), 0.05, 6)
    w = TwoForm.from_structure(S.C, 0)
    low = np.linalg.norm(solve(w, b, 6, 4).obstruction)
    high = np.linalg.norm(solve(w, b, 6, 10).obstruction)
    assert high <= 0.1 * low


def test_generic_boundary_stays_obstructed(rng):
    # a random boundary is not a gauge transform of zero
    S = lie.so3()
    b = random_boundary(rng, 3, 3, 6, 0.05)
    w = TwoForm.from_structure(S.C, 0)
    assert np.linalg.norm(solve(w, b, 6, 10).obstruction) > 1e-3


def test_boundary_color_count_checked():
    with pytest.raises(ValueError):
        solve(TwoForm.zero(2, 1), BoundaryFourier.zeros(1, 3), 3, 3)
