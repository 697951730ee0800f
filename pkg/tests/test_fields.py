import numpy as np
import pytest

from haantjes.errors import DimensionError
from haantjes.expression import parse_expression
from haantjes.fields import (
    CovectorField,
    OperatorField,
    ScalarField,
    SymplecticForm,
    VectorField,
    covector_rank,
    lie_bracket,
    numerical_rank,
    poisson_bracket,
    separable_involution_terms,
)


def test_symplectic_form_and_poisson_operator_are_inverse():
    w = SymplecticForm(3)
    np.testing.assert_array_equal(w.omega @ w.poisson, np.eye(6))
    np.testing.assert_array_equal(w.omega, -w.omega.T)


def test_canonical_brackets():
    q1, p1, q2 = (parse_expression(s, 2) for s in ("q1", "p1", "q2"))
    x = np.array([0.1, 0.2, 0.3, 0.4])
    assert poisson_bracket(q1, p1, x) == 1.0
    assert poisson_bracket(p1, q1, x) == -1.0
    assert poisson_bracket(q1, q2, x) == 0.0


def test_hamiltonian_vector_field_gives_equations_of_motion():
    w = SymplecticForm(1)
    H = parse_expression("p1^2/2 + q1^4", 1)
    x = np.array([0.5, 2.0])
    xdot = w.hamiltonian_vector(H.eval_dual(x).grad)
    np.testing.assert_allclose(xdot, [2.0, -4 * 0.5**3])


def test_separable_terms_sum_to_bracket(rng):
    F = parse_expression("q1*p2 + p1^2", 2)
    G = parse_expression("q2^2*p1 + sin(q1)", 2)
    x = rng.uniform(-1, 1, 4)
    assert separable_involution_terms(F, G, x).sum() == pytest.approx(poisson_bracket(F, G, x))


def test_lie_bracket_of_coordinate_rotations():
    X = VectorField.from_expressions(["-q2", "q1"], 2, space="config")
    Y = VectorField.from_expressions(["1", "0"], 2, space="config")
    # [X, Y] = X(Y) - Y(X) = -(d/dq1 of X) = (0, -1)
    np.testing.assert_allclose(lie_bracket(X, Y, [0.3, 0.7]), [0.0, -1.0])


def test_operator_field_shape_and_dimension_check():
    L = OperatorField.from_expressions([["0", "1"], ["q1", "0"]], 2, space="config")
    assert L([2.0, 5.0]).tolist() == [[0, 1], [2, 0]]
    with pytest.raises(DimensionError):
        L.jet([1.0, 2.0, 3.0])


def test_covector_rank_is_scale_and_order_invariant(rng):
    a, b = rng.normal(size=4), rng.normal(size=4)
    assert covector_rank([a, b, a + 2 * b], None) == 2
    assert covector_rank([1e6 * (a + 2 * b), b, 1e-4 * a], None) == 2
    assert numerical_rank(np.zeros((2, 3))) == 0


def test_covector_rank_of_differentials():
    fs = [ScalarField.from_expression(parse_expression(s, 2)) for s in ("q1", "q2", "q1 + q2^2")]
    assert covector_rank(fs, np.array([0.2, 0.5, 0.1, 0.1])) == 2
    dq = CovectorField.differential(fs[0])
    np.testing.assert_array_equal(dq(np.zeros(4)), [1, 0, 0, 0])
