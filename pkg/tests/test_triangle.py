from math import factorial

import numpy as np
import pytest

from conftest import random_field
from nab2lab import lie
from nab2lab.algebra import TwoForm, GaugeTransform, gauge_apply_two_form
from nab2lab.poly import PolyField
from nab2lab.triangle import (ExactVanishing, InsufficientJets, JetTable, OmegaJet,
                              TriangleBoundaryJet, boundary_jets_from_bulk, flat_jet_extension,
                              residual_slope, triangle_I1, triangle_I2, triangle_I3)

EPS = (0.1, 0.05, 0.025, 0.0125)


def jets(poly: PolyField, J: int) -> JetTable:
    return JetTable.from_poly(poly.with_cap(J))


def axis_jets(coeffs) -> np.ndarray:
    """Derivative jets of ``sum coeffs[a, m] x^m``."""
    coeffs = np.asarray(coeffs, float)
    return coeffs * np.array([factorial(m) for m in range(coeffs.shape[-1])])


def scalar_form(A: PolyField) -> TwoForm:
    cap = A.cap
    return TwoForm(A, PolyField.zeros([1, 1], cap), PolyField.zeros([1, 1], cap),
                   PolyField.zeros([1, 1, 1], cap))


def flat_dataset(rng, J=6, amp=0.3):
    N = 3
    w = TwoForm(random_field(rng, [N], 2, J, amp), random_field(rng, [N, N], 2, J, amp),
                random_field(rng, [N, N], 2, J, amp), PolyField.constant(lie.so3().C, J))
    py = jets(random_field(rng, [N], J, J, amp), J)
    px = flat_jet_extension(w, rng.uniform(-amp, amp, (N, J + 1)), py, J)
    return w, px, py


def slopes(w, px, py, J=6, printed=False):
    wj = OmegaJet.from_two_form(w)
    out = {1: [], 2: [], 3: []}
    for e in EPS:
        b = boundary_jets_from_bulk(px, py, e, J)
        out[1].append((e, np.abs(triangle_I1(b)).max()))
        out[2].append((e, np.abs(triangle_I2(b, wj)).max()))
        out[3].append((e, np.abs(triangle_I3(b, wj, printed=printed)).max()))
    return [residual_slope(out[k]) for k in (1, 2, 3)]


# -- flat jet extension -----------------------------------------------------------------

def test_zero_data_stays_constant_in_y():
    J = 4
    px = flat_jet_extension(TwoForm.zero(1, J), axis_jets([[0.3, 1.0, 0, 0, 0]]),
                            jets(PolyField.zeros([1], J), J), J)
    assert np.all(px.d[0, :, 1:] == 0)
    assert px.d[0, 1, 0] == pytest.approx(1.0)


def test_linear_transporter():
    J = 3
    py = jets(PolyField.monomial(1, 0, J, [1.0]), J)
    px = flat_jet_extension(TwoForm.zero(1, J), np.zeros((1, J + 1)), py, J)
    assert px.d[0, 0, 1] == pytest.approx(1.0)
    assert np.all(px.d[0, :, 2:] == 0)


def test_constant_density_matches_transport_sign():
    J = 3
    px = flat_jet_extension(scalar_form(PolyField.constant([-1.0], J)), np.zeros((1, J + 1)),
                            jets(PolyField.zeros([1], J), J), J)
    assert px.d[0, 0, 1] == pytest.approx(-1.0)


def test_jet_extension_needs_enough_orders():
    with pytest.raises(InsufficientJets):
        flat_jet_extension(TwoForm.zero(1, 3), np.zeros((1, 2)), jets(PolyField.zeros([1], 3), 3), 3)


# -- boundary jets ----------------------------------------------------------------------------

def test_constant_splitting_boundary():
    J = 3
    px = jets(PolyField.constant([2.0], J), J)
    py = jets(PolyField.constant([0.5], J), J)
    b = boundary_jets_from_bulk(px, py, 0.1, J)
    assert b.phi3[0, 0] == pytest.approx(1.5)
    assert b.phi3[1, 0] == 0
    assert triangle_I1(b)[0] == pytest.approx(0.0)


def test_linear_phi_x_boundary():
    J, e = 3, 0.07
    b = boundary_jets_from_bulk(jets(PolyField.monomial(1, 0, J, [2.0]), J),
                                jets(PolyField.zeros([1], J), J), e, J)
    assert b.phi3[0, 0] == pytest.approx(2 * e)
    assert b.phi3[1, 0] == pytest.approx(2.0)
    assert triangle_I1(b)[0] == pytest.approx(2 * e)


def test_quadratic_phi_y_boundary():
    J, e = 3, 0.2
    b = boundary_jets_from_bulk(jets(PolyField.zeros([1], J), J),
                                jets(PolyField.monomial(0, 2, J, [1.0]), J), e, J)
    assert b.phi3[:3, 0] == pytest.approx([-e * e, 2 * e, -2.0])


def test_boundary_jets_need_bulk_order():
    J = 2
    z = jets(PolyField.zeros([1], J), J)
    with pytest.raises(InsufficientJets):
        boundary_jets_from_bulk(z, z, 0.1, J + 1)


# -- I_n on exact data -----------------------------------------------------------------------------

def test_exact_splitting_has_no_I2():
    # phi = d(x^2): phi_x = 2x, phi_y = 0
    J = 3
    px = jets(PolyField.monomial(1, 0, J, [2.0]), J)
    py = jets(PolyField.zeros([1], J), J)
    wj = OmegaJet.from_two_form(TwoForm.zero(1, J))
    for e in EPS:
        assert triangle_I2(boundary_jets_from_bulk(px, py, e, J), wj)[0] == pytest.approx(0.0, abs=1e-15)


def test_zero_inputs():
    z = np.zeros((3, 1))
    b = TriangleBoundaryJet(0.1, z, z, z, 2)
    wj = OmegaJet.from_two_form(TwoForm.zero(1, 1))
    assert triangle_I2(b, wj)[0] == 0
    assert triangle_I3(b, wj)[0] == 0


def test_third_order_abelian_reduction(rng):
    e = 0.1
    p1, p2, p3 = rng.normal(size=(3, 3, 1))
    b = TriangleBoundaryJet(e, p1, p2, p3, 2)
    A = PolyField(np.array([[[rng.normal(), rng.normal()], [rng.normal(), 0.0]]]), 1)
    w = scalar_form(A)
    wj = OmegaJet.from_two_form(w)
    expected = (triangle_I2(b, wj) + e * e / 6 * p3[2] - 2 / 3 * e * e * p1[2] + 2 / 3 * e * e * p2[2]
                - 2 / 3 * e * e * (A.coeffs[0, 1, 0] + A.coeffs[0, 0, 1]))
    assert triangle_I3(b, wj) == pytest.approx(expected, abs=1e-15)


def _single_term(name, rng):
    """2-form with only one first-order ingredient switched on."""
    N = 2
    parts = {"A": [N], "B_x": [N, N], "B_y": [N, N]}
    fields = {k: PolyField.zeros(s, 1) for k, s in parts.items()}
    C = PolyField.zeros([N, N, N], 1)
    if name in fields:
        fields[name] = random_field(rng, parts[name], 1, 1)
    else:
        c = rng.normal(size=(N, N, N))
        C = PolyField.constant(c - c.transpose(0, 2, 1), 1)
    return TwoForm(fields["A"], fields["B_x"], fields["B_y"], C), C


def test_third_order_B_terms(rng):
    e = 0.2
    p1, p2, p3 = rng.normal(size=(3, 3, 2))
    b = TriangleBoundaryJet(e, p1, p2, p3, 2)
    base = triangle_I3(b, OmegaJet.from_two_form(TwoForm.zero(2, 1)))
    for name, phi, other in (("B_x", p2, p1), ("B_y", p1, p2)):
        w, _ = _single_term(name, rng)
        wj = OmegaJet.from_two_form(w)
        B0 = getattr(wj, name)[0]
        sign = 1 if name == "B_x" else -1
        # I2 part and the displayed B terms, with the linearized F corrections
        F = sign * B0 @ phi[0]
        lin_y = B0 if name == "B_x" else np.zeros_like(B0)
        lin_x = B0 if name == "B_y" else np.zeros_like(B0)
        expected = (base - e * F
                    - sign * 2 / 3 * e * e * (wj.diag(name) @ phi[0])
                    - sign / 3 * e * e * (B0 @ (3 * phi[1] + other[1]))
                    + e * e / 3 * lin_y @ (p3[1] + F) - e * e / 3 * lin_x @ (p3[1] - F))
        assert triangle_I3(b, wj) == pytest.approx(expected, abs=1e-14), name


def test_third_order_C_terms(rng):
    e = 0.2
    p1, p2, p3 = rng.normal(size=(3, 3, 2))
    b = TriangleBoundaryJet(e, p1, p2, p3, 2)
    w, C = _single_term("C", rng)
    wj = OmegaJet.from_two_form(w)
    C0 = C.coeffs[..., 0, 0]
    bil = lambda u, v: np.einsum("abc,b,c->a", C0, u, v)  # noqa: E731
    base = triangle_I3(b, OmegaJet.from_two_form(TwoForm.zero(2, 1)))
    F = bil(p1[0], p2[0])
    lin_y = np.einsum("abc,b->ac", C0, p1[0])
    lin_x = np.einsum("abc,b->ac", C0, p2[0])
    expected = (base - e * F
                - e * e / 3 * (bil(3 * p1[1] + p2[1], p2[0]) + bil(p1[0], 3 * p2[1] + p1[1]))
                + e * e / 3 * lin_y @ (p3[1] + F) - e * e / 3 * lin_x @ (p3[1] - F))
    assert triangle_I3(b, wj) == pytest.approx(expected, abs=1e-14)


# -- orders ----------------------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_flat_data_orders(seed):
    s1, s2, s3 = slopes(*flat_dataset(np.random.default_rng(seed)))
    assert 0.8 <= s1 <= 1.3
    assert 1.8 <= s2 <= 2.3
    assert 2.7 <= s3 <= 3.3


def test_displayed_variant_stalls_at_second_order():
    s = slopes(*flat_dataset(np.random.default_rng(7)), printed=True)
    assert 1.7 <= s[2] <= 2.3


def test_flatness_violation_is_detected():
    w, px, py = flat_dataset(np.random.default_rng(3))
    d = np.array(px.d)
    d[0, 0, 1] += 0.1
    assert slopes(w, JetTable(d), py)[1] <= 1.3


def test_I2_is_covariant_under_constant_gauge(rng):
    w, px, py = flat_dataset(rng)
    J = 6
    g = np.eye(3) + 0.3 * rng.normal(size=(3, 3))
    t = GaugeTransform.from_g(PolyField.constant(g, J), PolyField.zeros([3], J), PolyField.zeros([3], J))
    w2 = gauge_apply_two_form(t, w)
    rot = lambda jt: JetTable(np.einsum("ab,b...->a...", g, jt.d))  # noqa: E731
    e = 0.05
    I = triangle_I2(boundary_jets_from_bulk(px, py, e, J), OmegaJet.from_two_form(w))
    I_g = triangle_I2(boundary_jets_from_bulk(rot(px), rot(py), e, J), OmegaJet.from_two_form(w2))
    assert I_g == pytest.approx(g @ I, abs=1e-13)


# -- slope fitting ------------------------------------------------------------------------------------

def test_slope_of_power_laws():
    assert residual_slope([(e, e * e) for e in EPS]) == pytest.approx(2.0)
    assert residual_slope([(e, 5 * e ** 3) for e in EPS]) == pytest.approx(3.0)


def test_slope_needs_samples_and_positive_norms():
    with pytest.raises(ValueError):
        residual_slope([(0.1, 0.01)])
    with pytest.raises(ExactVanishing):
        residual_slope([(0.1, 0.0), (0.05, 1.0), (0.02, 1.0)])
