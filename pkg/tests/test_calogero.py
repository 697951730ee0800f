import itertools

import numpy as np
import pytest
import sympy as sp

from haantjes.calogero import (
    PROJECTED,
    CalogeroPoint,
    h3_involution,
    independence_report,
    involution_report,
    model,
    observable,
    operator,
    projected_killing,
    verify_calogero_chains,
)
from haantjes.errors import CollisionError
from haantjes.fields import poisson_bracket

PT = CalogeroPoint(1.0, 0.0, -1.0)


@pytest.fixture(scope="module")
def samples():
    return model(1.0).sample(np.random.default_rng(5), 40)


def test_point_rejects_collisions():
    with pytest.raises(CollisionError):
        CalogeroPoint(1.0, 1.0, 0.0)
    with pytest.raises(CollisionError):
        observable("H", np.array([0.0, 2.0, 0.0, 0, 0, 0]))


def test_observable_values():
    assert observable("H", PT) == pytest.approx(2.25)
    assert observable("H2", PT) == pytest.approx(4.5)
    assert observable("Hcyl", CalogeroPoint(0.3, 1.7, -2.0, 1.0, 1.0, 1.0)) == pytest.approx(4.5)


def test_operator_values():
    K1 = operator("K1", PT)
    np.testing.assert_allclose(3 * K1[:3, :3], [[1, -2, 1], [-2, 4, -2], [1, -2, 1]])
    assert not K1[3:, :3].any()
    np.testing.assert_array_equal(operator("Kcyl", PT)[:3, :3], np.ones((3, 3)))
    np.testing.assert_allclose(np.diag(operator("Ksph", PT))[:3], [1, 2, 1])
    for name in ("K1", "Kcyl", "Ksph", "Kpar"):
        K = operator(name, CalogeroPoint(0.2, -0.5, 0.9, 0.3, 0.1, -0.7))
        assert not K[:3, 3:].any()
        np.testing.assert_array_equal(K[:3, :3], K[3:, 3:])


def test_observables_match_sympy():
    x, y, z, px, py, pz = sp.symbols("x y z px py pz")
    V = 1 / (x - y) ** 2 + 1 / (y - z) ** 2 + 1 / (z - x) ** 2
    r = sp.Matrix([x, y, z])
    p = sp.Matrix([px, py, pz])
    u = sp.Matrix([1, 1, 1])
    L = r.cross(p)
    refs = {
        "H": p.dot(p) / 2 + V,
        "H2": L.dot(u) ** 2 / 6 + r.cross(u / sp.sqrt(3)).dot(r.cross(u / sp.sqrt(3))) * V,
        "Hsph": L.dot(L) / 2 + r.dot(r) * V,
        "Hpar": (p.dot(u) * p.dot(r) - r.dot(u) * p.dot(p)) / 2 - r.dot(u) * V,
    }
    vals = (0.3, -0.8, 1.1, 0.5, -0.2, 0.9)
    pt = CalogeroPoint(*vals)
    for name, expr in refs.items():
        ref = float(expr.subs(dict(zip((x, y, z, px, py, pz), vals))))
        assert observable(name, pt) == pytest.approx(ref, rel=1e-12)


def test_permutation_and_translation_symmetry(rng):
    m = model(1.0)
    H, Hcyl = m.expressions["H"], m.expressions["Hcyl"]
    x = m.sample(rng, 1)[0]
    for perm in itertools.permutations(range(3)):
        idx = list(perm) + [3 + i for i in perm]
        assert H.evaluate(x[idx]) == pytest.approx(H.evaluate(x), rel=1e-12)
    shift = np.array([0.7, 0.7, 0.7, 0, 0, 0])
    assert H.evaluate(x + shift) == pytest.approx(H.evaluate(x), rel=1e-12)
    assert Hcyl.evaluate(x + shift) == pytest.approx(Hcyl.evaluate(x), rel=1e-12)


def test_chains_and_structures(samples):
    report = verify_calogero_chains(samples, 1e-8)
    assert report.passed, report.failures
    for name in ("H2", "Hcyl", "Hsph", "Hpar"):
        assert report[f"chain.{name}"].residual < 1e-8
    assert report["cyl.commute.K1.Kcyl"].residual < 1e-10


def test_independence(samples):
    degenerate = np.array([1.0, 0.0, -1.0, 0.0, 0.0, 0.0])
    report = independence_report(list(samples) + [degenerate])
    assert report.passed
    assert report.flagged == [len(samples)]


def test_within_chain_involution_and_momentum(samples):
    report = involution_report(samples, 1e-8)
    assert report.passed
    assert report["momentum.P.H1"].residual < 1e-10
    assert not report["involution.Hsph.Hpar"].asserted


def test_cubic_integral_commutes_with_hamiltonian(samples):
    report = h3_involution(samples, 1e-8)
    assert report["involution.H3.H1"].passed
    # the four-term reading does not commute with H
    assert report["involution.H3_literal.H1"].residual > 1e-3


def test_cubic_integral_does_not_commute_with_h2():
    """{H3, H2} is a nonzero rational function; exact value at a rational point."""
    x, y, z, px, py, pz, a = sp.symbols("x y z px py pz a")
    q, p = (x, y, z), (px, py, pz)
    V = a / (x - y) ** 2 + a / (y - z) ** 2 + a / (z - x) ** 2
    lu = (y * pz - z * py) + (z * px - x * pz) + (x * py - y * px)
    H2 = lu**2 / 6 + ((x - y) ** 2 + (x - z) ** 2 + (y - z) ** 2) * V / 3
    H3 = (px**3 + py**3 + pz**3) / 3 + a * ((px + py) / (x - y) ** 2 + (py + pz) / (y - z) ** 2 + (px + pz) / (x - z) ** 2)
    br = sum(sp.diff(H3, qi) * sp.diff(H2, pi) - sp.diff(H3, pi) * sp.diff(H2, qi) for qi, pi in zip(q, p))
    vals = dict(zip((x, y, z, px, py, pz), map(sp.Rational, ("3/10", "-4/5", "11/10", "1/2", "-1/5", "9/10"))))
    exact = sp.nsimplify(br.subs(vals).subs(a, 1))
    assert exact != 0
    m = model(1.0)
    num = poisson_bracket(m.observables["H3"], m.observables["H2"], np.array([0.3, -0.8, 1.1, 0.5, -0.2, 0.9]))
    assert num == pytest.approx(float(exact), rel=1e-12)


def test_free_cubic_commutes_with_free_hamiltonian(rng):
    m = model(0.0)
    x = m.sample(rng, 1)[0]
    assert poisson_bracket(m.observables["H3"], m.observables["H"], x) == 0.0


@pytest.mark.parametrize("name", sorted(PROJECTED))
def test_projected_killing(name, samples):
    assert projected_killing(name, samples, 1e-9).passed
