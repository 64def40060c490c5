from math import factorial

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from conftest import random_field
from nab2lab import lie
from nab2lab.algebra import TwoForm
from nab2lab.poly import PolyField
from nab2lab.transport import (MatrixPath, StraightenedStrip, TruncationError, abelian_transport_oracle,
                               conjugation_oracle, one_dim_obstruction, path_ordered_exp,
                               transport_splitting)
from nab2lab.triangle import JetTable, flat_jet_extension


def scalar_form(A: PolyField) -> TwoForm:
    cap = A.cap
    return TwoForm(A, PolyField.zeros([1, 1], cap), PolyField.zeros([1, 1], cap),
                   PolyField.zeros([1, 1, 1], cap))


def pad(c, n):
    out = np.zeros(c.shape[:-1] + (n,))
    out[..., : c.shape[-1]] = c
    return out


# -- path-ordered exponentials --------------------------------------------------------

def test_zero_path_gives_identity():
    assert np.array_equal(path_ordered_exp(MatrixPath.constant(np.zeros((3, 3))), 10), np.eye(3))


def test_scalar_multiple_of_identity():
    U = path_ordered_exp(MatrixPath.constant(0.7 * np.eye(2), 0.0, 2.0), 200)
    assert np.allclose(U, np.exp(1.4) * np.eye(2), atol=1e-10)


def test_later_times_act_on_the_left(rng):
    X, Y = rng.normal(size=(2, 3, 3))
    p = MatrixPath.piecewise([0.0, 0.5, 1.0], [X, Y])
    expected = expm(Y / 2) @ expm(X / 2)
    assert np.allclose(path_ordered_exp(p, 1000), expected, atol=1e-10)


def test_polynomial_path_against_ode_solver(rng):
    coeffs = rng.uniform(-1, 1, (3, 3, 3))
    p = MatrixPath.polynomial(coeffs)
    ref = solve_ivp(lambda t, u: (p(t) @ u.reshape(3, 3)).ravel(), (0, 1), np.eye(3).ravel(),
                    method="DOP853", rtol=1e-13, atol=1e-13).y[:, -1].reshape(3, 3)
    assert np.allclose(path_ordered_exp(p, 1000), ref, atol=1e-10)


def test_multiplicative_over_subintervals(rng):
    p = MatrixPath.polynomial(rng.uniform(-1, 1, (2, 3, 3)), 0.0, 1.0)
    whole = path_ordered_exp(p, 1000)
    first = path_ordered_exp(p.restrict(0.0, 0.4), 400)
    second = path_ordered_exp(p.restrict(0.4, 1.0), 600)
    assert np.allclose(second @ first, whole, atol=1e-10)


def test_one_dim_obstruction_basic_cases(rng):
    zero = MatrixPath.constant(np.zeros((3, 3)))
    u = rng.normal(size=3)
    assert np.allclose(one_dim_obstruction(zero, u, u, 5), 0)
    assert np.allclose(one_dim_obstruction(zero, np.zeros(3), u, 5), u)
    p = MatrixPath.polynomial(rng.uniform(-1, 1, (2, 3, 3)))
    v = path_ordered_exp(p, 500) @ u
    assert np.abs(one_dim_obstruction(p, u, v, 500)).max() <= 1e-10
    with pytest.raises(ValueError):
        one_dim_obstruction(p, u, np.zeros(2), 5)


# -- transport of splittings ---------------------------------------------------------------

def test_zero_form_keeps_initial_data(rng):
    init = rng.normal(size=(2, 4))
    strip = StraightenedStrip(TwoForm.zero(2, 3), PolyField.zeros([2], 3), init)
    res = transport_splitting(strip, 5, 10)
    assert np.array_equal(res.slices[-1], pad(init, 6))


def test_constant_area_density_grows_linearly():
    c = 0.8
    strip = StraightenedStrip(scalar_form(PolyField.constant([c], 2)), PolyField.zeros([1], 2), np.zeros((1, 1)))
    res = transport_splitting(strip, 3, 50)
    assert np.allclose(res.slices[:, 0, 0], c * res.y, atol=1e-10)


def test_abelian_oracle_examples():
    init = np.array([[0.0, 0.0, 1.0]])
    A = PolyField.monomial(1, 0, 3, [1.0])
    py = PolyField.monomial(1, 1, 3, [1.0])
    # x^2 + x y + y^2 / 2 at y = 1
    assert np.allclose(abelian_transport_oracle(A, py, init, 1.0)[0, :3], [0.5, 1.0, 1.0])
    z = PolyField.zeros([1], 3)
    assert np.allclose(abelian_transport_oracle(z, z, init, 0.7)[0, :3], init[0])
    assert np.allclose(abelian_transport_oracle(PolyField.constant([2.0], 3), z, np.zeros((1, 1)), 0.7)[0, 0], 1.4)


def test_abelian_transport_matches_oracle(rng):
    A = random_field(rng, [1], 5, 5)
    py = random_field(rng, [1], 5, 5)
    init = rng.uniform(-1, 1, (1, 6))
    res = transport_splitting(StraightenedStrip(scalar_form(A), py, init, 1.0), 8, 1000)
    ref = abelian_transport_oracle(A, py, init, 1.0)
    assert np.abs(res.slices[-1] - pad(ref, 9)).max() <= 1e-8


def test_rk4_order(rng):
    A = random_field(rng, [1], 6, 6)
    py = random_field(rng, [1], 6, 6)
    init = rng.uniform(-1, 1, (1, 3))
    strip = StraightenedStrip(scalar_form(A), py, init, 1.0)
    ref = pad(abelian_transport_oracle(A, py, init, 1.0), 11)
    hs, errs = [], []
    for steps in (10, 20, 40):
        hs.append(1 / steps)
        errs.append(np.abs(transport_splitting(strip, 10, steps).slices[-1] - ref).max())
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= 3.7


def test_constant_connection_is_conjugation(rng):
    n = 2
    M = rng.uniform(-1, 1, (n, n))
    P0 = rng.uniform(-1, 1, (n, n))
    w = TwoForm.from_structure(lie.gl(n).C, 1)
    strip = StraightenedStrip(w, PolyField.constant(M.ravel(), 1), P0.reshape(-1, 1), 1.0)
    got = transport_splitting(strip, 2, 1000).slices[-1][:, 0].reshape(n, n)
    assert np.abs(got - conjugation_oracle(M, P0, 1.0)).max() <= 1e-8


def _nonabelian_strip(rng):
    N, cap = 3, 4
    w = TwoForm(random_field(rng, [N], 2, cap, 0.5), random_field(rng, [N, N], 2, cap, 0.5),
                random_field(rng, [N, N], 2, cap, 0.5), PolyField.constant(lie.so3().C, cap))
    return w, random_field(rng, [N], 2, cap, 0.5), rng.uniform(-1, 1, (N, 3))


def test_reparametrization_invariance(rng):
    w, py, init = _nonabelian_strip(rng)
    direct = transport_splitting(StraightenedStrip(w, py, init, 1.0), 12, 400).slices[-1]
    # y = 2 y': every component carrying a y index picks up a factor 2
    w2 = TwoForm(2 * w.A.scale_y(2), w.B_x.scale_y(2), 2 * w.B_y.scale_y(2), w.C)
    rescaled = transport_splitting(StraightenedStrip(w2, 2 * py.scale_y(2), init, 0.5), 12, 300).slices[-1]
    assert np.abs(direct - rescaled).max() <= 1e-9


def test_composition(rng):
    w, py, init = _nonabelian_strip(rng)
    direct = transport_splitting(StraightenedStrip(w, py, init, 1.0), 12, 500).slices[-1]
    half = transport_splitting(StraightenedStrip(w, py, init, 0.4), 12, 200).slices[-1]
    rest = transport_splitting(StraightenedStrip(w, py, half, 1.0, 0.4), 12, 300).slices[-1]
    assert np.abs(direct - rest).max() <= 1e-9


def test_agrees_with_flat_jets(rng):
    J = 6
    w, py, _ = _nonabelian_strip(rng)
    axis = rng.uniform(-0.5, 0.5, (3, J + 1))       # x-coefficients of phi_x(x, 0)
    fact = np.array([factorial(k) for k in range(J + 1)], float)
    jets = flat_jet_extension(w, axis * fact, JetTable.from_poly(py.with_cap(J)), J).to_poly()
    # on a short strip the Taylor remainder is far below the tolerance
    res = transport_splitting(StraightenedStrip(w, py, axis, 0.01), J, 20)
    series = sum(np.outer(res.y ** j, jets.coeffs[:, 0, j]) for j in range(J + 1))
    assert np.abs(res.slices[:, :, 0] - series).max() <= 1e-8


def test_truncation_threshold(rng):
    w, py, init = _nonabelian_strip(rng)
    with pytest.raises(TruncationError):
        transport_splitting(StraightenedStrip(w, py, init, 1.0), 2, 10, loss_threshold=1e-12)
