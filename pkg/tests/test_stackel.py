import itertools

import numpy as np
import pytest
import sympy as sp

from haantjes.errors import CollisionError, LocalityError, ProjectionError, SingularMatrixError
from haantjes.fields import OperatorField, poisson_bracket, separable_involution_terms
from haantjes.stackel import (
    GeneratorSpec,
    StackelMatrix,
    StackelSystem,
    basis_coefficients,
    cofactors,
    hamiltonian_fields,
    interpolation_projectors,
    potential_chain,
    project_to_configuration,
    projected_operator_fields,
    random_stackel_system,
    stackel_chain,
    stackel_hamiltonians,
    stackel_operators,
    stackel_structure,
    well_conditioned,
)
from haantjes.tensors import verify_lenard_chain, verify_structure

ROWS = [["q1^2 + 1", "q1", "1"], ["q2^3", "q2^2 + 2", "1"], ["q3", "1", "q3^2 + 3"]]
F = ["p1^2/2 + q1^4", "p2^2/2 + q2", "p3^2/2 + cos(q3)*p3"]


def _system():
    return StackelSystem(StackelMatrix(ROWS, 3), F)


def _sample(S, rng, count=10, box=0.8):
    out = []
    while len(out) < count:
        x = rng.uniform(-box, box, 2 * S.n)
        if well_conditioned(S, x[:S.n]):
            out.append(x)
    return out


def test_two_by_two_cofactors():
    S = StackelMatrix([["q1", "1"], ["q2", "1"]], 2)
    adj, det = cofactors(S, [2.0, 1.0])
    np.testing.assert_allclose(adj, [[1, -1], [-1, 2]])
    assert det == pytest.approx(1.0)
    ops = stackel_operators(S, [2.0, 1.0, 0.0, 0.0])
    np.testing.assert_allclose(np.diag(ops[1]), [-1, -2, -1, -2])


def test_locality_is_enforced():
    with pytest.raises(LocalityError, match="row 1"):
        StackelMatrix([["q2", "1"], ["1", "q2"]], 2)
    with pytest.raises(LocalityError, match="f2"):
        StackelSystem(StackelMatrix([["1", "0"], ["0", "1"]], 2), ["p1", "p1*p2"])


def test_singular_matrix_is_rejected():
    S = StackelMatrix([["q1", "1"], ["q2", "1"]], 2)
    with pytest.raises(SingularMatrixError):
        cofactors(S, [1.0, 1.0])


def test_hamiltonians_match_symbolic_inverse(rng):
    q = sp.symbols("q1 q2 q3")
    p = sp.symbols("p1 p2 p3")
    loc = {str(s): s for s in q + p}
    S = sp.Matrix([[sp.sympify(e.replace("^", "**"), locals=loc) for e in row] for row in ROWS])
    f = sp.Matrix([sp.sympify(e.replace("^", "**"), locals=loc) for e in F])
    adj = S.adjugate()
    H = sp.lambdify(q + p, list(S.inv() * f))
    mu = sp.lambdify(q, [[adj[j, r] / adj[0, r] for r in range(3)] for j in range(3)])
    sys = _system()
    for x in _sample(sys.S, rng, 5):
        np.testing.assert_allclose(stackel_hamiltonians(sys, x), H(*x), rtol=1e-11, atol=1e-12)
        ops = stackel_operators(sys, x)
        for j in range(3):
            np.testing.assert_allclose(np.diag(ops[j])[:3], mu(*x[:3])[j], rtol=1e-11, atol=1e-12)


def test_structure_and_chain_for_fixed_system(rng):
    sys = _system()
    samples = _sample(sys.S, rng, 15)
    report = verify_structure(stackel_structure(sys), samples, 1e-9, rng=rng)
    assert report.passed, [c for c in report.failures]
    assert all(c.passed for c in verify_lenard_chain(stackel_structure(sys), stackel_chain(sys), samples, 1e-9))


def test_involution_and_separability(rng):
    sys = _system()
    Hs = hamiltonian_fields(sys)
    for x in _sample(sys.S, rng, 5):
        for A, B in itertools.combinations(Hs, 2):
            assert abs(poisson_bracket(A, B, x)) < 1e-10
            assert np.max(np.abs(separable_involution_terms(A, B, x))) < 1e-10


def test_operators_do_not_depend_on_stackel_functions(rng):
    a = _system()
    b = StackelSystem(a.S, ["exp(p1)", "q2*p2^3", "p3"])
    x = _sample(a.S, rng, 1)[0]
    for Ka, Kb in zip(stackel_operators(a, x), stackel_operators(b, x)):
        np.testing.assert_array_equal(Ka, Kb)


def test_row_rescaling_invariance(rng):
    S = _system().S
    T = S.rescaled(["2 + q1^2", "exp(q2)", "1/(4 + q3^2)"])
    for x in _sample(S, rng, 10):
        for Ka, Kb in zip(stackel_operators(S, x), stackel_operators(T, x)):
            np.testing.assert_allclose(Ka, Kb, rtol=1e-12, atol=1e-12)


def test_basis_algebra(rng):
    sys = _system()
    gen = GeneratorSpec(["q1", "q2 + 3", "q3 - 3"], 3)
    for x in _sample(sys.S, rng, 5):
        b = basis_coefficients(sys, gen, x)
        for key, value in b.residuals.items():
            assert value < 1e-10, key
        projs = interpolation_projectors(gen, x)
        np.testing.assert_allclose(sum(projs), np.eye(6), atol=1e-12)
        for r, s in itertools.product(range(3), repeat=2):
            expected = projs[r] if r == s else np.zeros((6, 6))
            np.testing.assert_allclose(projs[r] @ projs[s], expected, atol=1e-12)


def test_generator_collision():
    gen = GeneratorSpec(["q1", "q2"], 2)
    with pytest.raises(CollisionError):
        interpolation_projectors(gen, [1.0, 1.0, 0.0, 0.0])


def test_projection_to_configuration_space():
    S = _system().S
    K = stackel_structure(S).operators[1]
    probe = [np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])]
    Kq = project_to_configuration(K, probe)
    direct = projected_operator_fields(S)[1]
    np.testing.assert_allclose(Kq(probe[0][:3]), direct(probe[0][:3]))
    # an upper-right block is not projectable
    bad = OperatorField.from_expressions([["1", "0", "1", "0"], ["0", "1", "0", "0"],
                                          ["0", "0", "1", "0"], ["0", "0", "0", "1"]], 2)
    with pytest.raises(ProjectionError):
        project_to_configuration(bad, [np.zeros(4)])
    pdep = OperatorField.from_expressions([["p1", "0", "0", "0"], ["0", "1", "0", "0"],
                                           ["0", "0", "p1", "0"], ["0", "0", "0", "1"]], 2)
    with pytest.raises(ProjectionError):
        project_to_configuration(pdep, [np.ones(4)])


def test_potential_chain(rng):
    S = _system().S
    W = ["q1^4", "q2^2", "sin(q3)"]
    psi = ["p1^2/2", "p2^2/2", "p3^2/2"]
    for x in _sample(S, rng, 5):
        pc = potential_chain(S, W, psi, x)
        for key, value in pc.residuals.items():
            assert value < 1e-9, key


@pytest.mark.parametrize("seed", range(3))
def test_random_systems(seed):
    rng = np.random.default_rng(seed)
    sys = random_stackel_system(rng)
    samples = _sample(sys.S, rng, 8, box=0.5)
    assert verify_structure(stackel_structure(sys), samples, 1e-8, rng=rng).passed
