"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the pytest terminal summary (see conftest.py) and
when this file is executed directly.
"""

import itertools
import subprocess
import sys
import time

import numpy as np
import pytest

from haantjes.benenti import (
    DiagonalMetric,
    involution_check,
    killing_check,
    l_tensor_residual,
    raise_index,
    tower_chain_residual,
    tower_fields,
    benenti_tower,
)
from haantjes import calogero as cal
from haantjes.expression import parse_expression
from haantjes.fields import OperatorField, covector_rank, differential, separable_involution_terms
from haantjes.qbh import (
    GoldfishModel,
    QbhSystem,
    build_qbh,
    goldfish_newton_residual,
    jacobi_identity_residual,
    qbh_operators,
)
from haantjes.stackel import (
    GeneratorSpec,
    basis_coefficients,
    control_basis,
    hamiltonian_fields,
    interpolation_projectors,
    potential_chain,
    projected_operator_fields,
    random_stackel_system,
    relative_bracket,
    stackel_chain,
    stackel_operators,
    stackel_structure,
    well_conditioned,
)
from haantjes.symmetric import minimal_polynomial_coefficients, reverse_vandermonde, reverse_vandermonde_inverse
from haantjes.tensors import haantjes_tensor, nijenhuis_torsion, verify_lenard_chain, verify_structure

RESULTS: dict[str, str] = {}


def record(key: str, ok: bool, detail: str) -> None:
    RESULTS[key] = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[key]


def _stackel_samples(S, rng, count, qbox=0.5, pbox=1.0):
    out = []
    while len(out) < count:
        q = rng.uniform(-qbox, qbox, S.n)
        if well_conditioned(S, q):
            out.append(np.concatenate([q, rng.uniform(-pbox, pbox, S.n)]))
    return out


def _separated(rng, n, gap, box=1.5):
    while True:
        q = rng.uniform(-box, box, n)
        if np.min(np.abs(q[:, None] - q[None, :]) + 10 * np.eye(n)) >= gap:
            return q


# 1 ---------------------------------------------------------------------------

def _random_expression(rng, depth):
    leaves = ["q1", "q2", "p1", "p2", f"{rng.uniform(-2, 2):.3f}"]
    if depth == 0 or rng.random() < 0.25:
        return leaves[rng.integers(len(leaves))]
    a = _random_expression(rng, depth - 1)
    b = _random_expression(rng, depth - 1)
    kind = rng.integers(9)
    return [
        f"({a}) + ({b})", f"({a}) - ({b})", f"({a})*({b})", f"({a})/(1.5 + ({b})^2)",
        f"({a})^2", f"sin({a})", f"cos({a})*({b})", f"exp(({a})/3)", f"log(1 + ({a})^2)",
    ][kind]


def test_criterion_01_ad_correctness():
    rng = np.random.default_rng(1)
    worst = 0.0
    h = 1e-6
    for _ in range(50):
        e = parse_expression(_random_expression(rng, 4), 2)
        for _ in range(100):
            x = rng.uniform(-1, 1, 4)
            d = e.eval_dual(x)
            fd = np.array([(e.evaluate(x + h * u) - e.evaluate(x - h * u)) / (2 * h) for u in np.eye(4)])
            scale = max(1.0, float(np.max(np.abs(d.grad))), abs(d.value))
            worst = max(worst, float(np.max(np.abs(d.grad - fd))) / scale)
    record("01", worst <= 1e-6, f"AD vs central differences, 50 expressions x 100 points, max rel err {worst:.2e} (tol 1e-6)")


# 2 ---------------------------------------------------------------------------

def test_criterion_02_torsion_kernel():
    rng = np.random.default_rng(2)
    I = OperatorField.identity(4)
    L = OperatorField.from_expressions([["0", "1"], ["q1", "0"]], 2, space="config")
    zero_identity = all(not nijenhuis_torsion(I, x).any() and not haantjes_tensor(I, x).any()
                        for x in rng.uniform(-1, 1, (10, 4)))
    t_err = h_max = 0.0
    for q in rng.uniform(-2, 2, (100, 2)):
        T = nijenhuis_torsion(L, q)
        t_err = max(t_err, abs(T[1, 0, 1] + 1.0))
        h_max = max(h_max, float(np.max(np.abs(haantjes_tensor(L, q)))))
    ok = zero_identity and t_err <= 1e-12 and h_max <= 1e-12
    record("02", ok, f"identity exact zero={zero_identity}, |T^2_12 + 1|={t_err:.1e}, max |H|={h_max:.1e} (tol 1e-12)")


# 3 ---------------------------------------------------------------------------

def test_criterion_03_generalized_stackel():
    t0 = time.perf_counter()
    worst = {"structure": 0.0, "chain": 0.0, "bracket": 0.0, "separable": 0.0}
    failed = []
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        sys_ = random_stackel_system(rng, 3, 3)
        samples = _stackel_samples(sys_.S, rng, 50)
        s = stackel_structure(sys_)
        report = verify_structure(s, samples, 1e-8, rng=rng, combinations=10)
        worst["structure"] = max(worst["structure"], max(c.residual for c in report))
        chain = verify_lenard_chain(s, stackel_chain(sys_), samples, 1e-8)
        worst["chain"] = max(worst["chain"], max(c.residual for c in chain))
        Hs = hamiltonian_fields(sys_)
        for x in samples:
            d = [differential(H, x) for H in Hs]
            for i, j in itertools.combinations(range(3), 2):
                worst["bracket"] = max(worst["bracket"], relative_bracket(d[i], d[j]))
                scale = float(np.max(np.abs(d[i])) * np.max(np.abs(d[j])))
                terms = separable_involution_terms(Hs[i], Hs[j], x)
                worst["separable"] = max(worst["separable"], float(np.max(np.abs(terms))) / scale)
        if not report.passed:
            failed.append(seed)
    ok = (not failed and worst["structure"] <= 1e-8 and worst["chain"] <= 1e-8
          and worst["bracket"] <= 1e-9 and worst["separable"] <= 1e-9)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record("03", ok, f"20 random n=3 systems x 50 samples: {detail} ({time.perf_counter() - t0:.1f} s)")


# 4 ---------------------------------------------------------------------------

def test_criterion_04_row_rescaling():
    rng = np.random.default_rng(4)
    sys_ = random_stackel_system(rng)
    T = sys_.S.rescaled(["2 + q1^2", "exp(q2/2)", "1/(3 + q3^2)"])
    worst = 0.0
    for x in _stackel_samples(sys_.S, rng, 50):
        for Ka, Kb in zip(stackel_operators(sys_, x), stackel_operators(T, x)):
            worst = max(worst, float(np.max(np.abs(Ka - Kb))) / (1.0 + float(np.max(np.abs(Ka)))))
    record("04", worst <= 1e-12, f"rescaled rows reproduce operators, max rel diff {worst:.1e} (tol 1e-12)")


# 5 ---------------------------------------------------------------------------

def test_criterion_05_basis_algebra():
    rng = np.random.default_rng(5)
    sys_ = random_stackel_system(rng)
    gen = GeneratorSpec(["q1", "q2 + 2", "q3 - 2"], 3)
    proj = recon = 0.0
    for x in _stackel_samples(sys_.S, rng, 20):
        P = interpolation_projectors(gen, x)
        proj = max(proj, float(np.max(np.abs(sum(P) - np.eye(6)))))
        for r, s in itertools.product(range(3), repeat=2):
            target = P[r] if r == s else 0.0
            proj = max(proj, float(np.max(np.abs(P[r] @ P[s] - target))))
        b = basis_coefficients(sys_, gen, x)
        recon = max(recon, b.residuals["cyclic"], b.residuals["control"])
    vinv = 0.0
    for n in range(1, 6):
        for _ in range(20):
            lam = _separated(rng, n, 0.3, 2.0)
            vinv = max(vinv, float(np.max(np.abs(reverse_vandermonde_inverse(lam) @ reverse_vandermonde(lam) - np.eye(n)))))
    ok = proj <= 1e-12 and recon <= 1e-10 and vinv <= 1e-12
    record("05", ok, f"projectors {proj:.1e} (1e-12), cyclic/control {recon:.1e} (1e-10), V^-1 V {vinv:.1e} (1e-12)")


# 6 ---------------------------------------------------------------------------

def test_criterion_06_qbh_control_identity():
    rng = np.random.default_rng(6)
    worst = 0.0
    for n in range(2, 6):
        sys_ = QbhSystem([f"q{i} + q{i}^3/5" for i in range(1, n + 1)], [f"p{i}^2/2 + q{i}^2" for i in range(1, n + 1)])
        for _ in range(50):
            x = np.concatenate([_separated(rng, n, 0.2), rng.uniform(-1, 1, n)])
            worst = max(worst, qbh_operators(sys_, x).control_residual)
    record("06", worst <= 1e-10, f"K_(j-1) = e_j(N) for n=2..5 x 50 samples, max {worst:.1e} (tol 1e-10)")


# 7 ---------------------------------------------------------------------------

def test_criterion_07_goldfish():
    rng = np.random.default_rng(7)
    jac = 0.0
    for n in range(2, 7):
        for _ in range(100):
            jac = max(jac, jacobi_identity_residual(n, _separated(rng, n, 0.2), relative=True))
    inv = 0.0
    for n in (2, 3, 4):
        m = GoldfishModel(n, a=1.0, b=0.5)
        Hs = m.chain()
        for _ in range(20):
            x = np.concatenate([_separated(rng, n, 0.2), rng.uniform(-1, 1, n)])
            d = [differential(H, x) for H in Hs]
            for i, j in itertools.combinations(range(n), 2):
                inv = max(inv, relative_bracket(d[i], d[j]))
    newton = 0.0
    m = GoldfishModel(3, a=1.0, b=0.5)
    for _ in range(20):
        x = np.concatenate([_separated(rng, 3, 0.3), rng.uniform(-0.5, 0.5, 3)])
        r = goldfish_newton_residual(m, x)
        newton = max(newton, float(np.max(np.abs(r))))
    ok = jac <= 1e-10 and inv <= 1e-9 and newton <= 1e-6
    record("07", ok, f"Jacobi {jac:.1e} (1e-10), chain involution {inv:.1e} (1e-9), Newton {newton:.1e} (1e-6)")


# 8 ---------------------------------------------------------------------------

def test_criterion_08_classical_killing():
    worst_k = worst_s = 0.0
    for seed in range(10):
        rng = np.random.default_rng(800 + seed)
        sys_ = random_stackel_system(rng)
        G = DiagonalMetric.from_stackel(sys_.S)
        qs = [x[:3] for x in _stackel_samples(sys_.S, rng, 50)]
        raised = [raise_index(K, G) for K in projected_operator_fields(sys_)]
        worst_k = max(worst_k, max(killing_check(K, G, qs, 1e-9).residual for K in raised))
        worst_s = max(worst_s, max(involution_check(A, B, qs, 1e-9).residual
                                   for A, B in itertools.combinations(raised, 2)))
    ok = worst_k <= 1e-9 and worst_s <= 1e-9
    record("08", ok, f"10 systems x 50 samples: [K#, G] {worst_k:.1e}, [K_a#, K_b#] {worst_s:.1e} (tol 1e-9)")


# 9 ---------------------------------------------------------------------------

def test_criterion_09_benenti_tower():
    rng = np.random.default_rng(9)
    tower = ltensor = chain = 0.0
    for n in (2, 3):
        L = OperatorField.from_expressions([[f"q{i + 1}" if i == j else "0" for j in range(n)] for i in range(n)],
                                           n, space="config")
        sys_ = QbhSystem([f"q{i}" for i in range(1, n + 1)], [f"p{i}^2/2" for i in range(1, n + 1)])
        S = build_qbh(sys_).S
        G = DiagonalMetric.from_stackel(S)
        W = [f"q{i}^{i + 3}" for i in range(1, n + 1)]
        for _ in range(50):
            q = _separated(rng, n, 0.2)
            c = minimal_polynomial_coefficients(list(q))
            for K, e in zip(benenti_tower(L, q), control_basis(L(q), c)):
                tower = max(tower, float(np.max(np.abs(K - e))))
            ltensor = max(ltensor, l_tensor_residual(L, G, q))
            chain = max(chain, tower_chain_residual(L, S, W, q))
            x = np.concatenate([q, rng.uniform(-1, 1, n)])
            chain = max(chain, potential_chain(S, W, [f"p{i}^2/2" for i in range(1, n + 1)], x).residuals["chain_Q"])
    ok = tower <= 1e-10 and ltensor <= 1e-9 and chain <= 1e-9
    record("09", ok, f"tower vs e-basis {tower:.1e} (1e-10), L-tensor {ltensor:.1e} (1e-9), potential chain {chain:.1e} (1e-9)")


# 10 --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def calogero_samples():
    return cal.model(1.0).sample(np.random.default_rng(10), 100)


def test_criterion_10_calogero(calogero_samples):
    samples = calogero_samples
    chains = cal.verify_calogero_chains(samples, 1e-8)
    chain_max = max(c.residual for c in chains if c.id.startswith("chain."))
    haan_max = max(c.residual for c in chains if c.id.startswith("haantjes."))
    struct_ok = chains.passed
    ind = cal.independence_report(samples)
    h3 = cal.h3_involution(samples, 1e-8)
    killing = [cal.projected_killing(k, samples, 1e-9) for k in cal.PROJECTED]
    inv = cal.involution_report(samples, 1e-8)
    momentum = inv["momentum.P.H1"].residual
    ok = (struct_ok and chain_max <= 1e-8 and haan_max <= 1e-8 and ind.passed and not ind.flagged
          and h3["involution.H3.H1"].passed and all(k.passed for k in killing) and momentum <= 1e-10)
    record("10", ok, f"chains {chain_max:.1e}, Haantjes {haan_max:.1e}, web axioms {'ok' if struct_ok else 'FAIL'}, "
                     f"ranks {'4/4' if ind.passed else 'wrong'}, {{H3,H1}} {h3['involution.H3.H1'].residual:.1e}, "
                     f"Killing {max(k.residual for k in killing):.1e}, momentum {momentum:.1e}")


def test_criterion_10_h3_h2(calogero_samples):
    """{H3, H2} is not zero: the claimed involution is not an identity (see the exact test in test_calogero)."""
    r = cal.h3_involution(calogero_samples, 1e-8)["involution.H3.H2"].residual
    record("10b", r <= 1e-8, f"{{H3, H2}} relative residual {r:.2e} (tol 1e-8); identity does not hold, nonzero in exact arithmetic")


# 11 --------------------------------------------------------------------------

def test_criterion_11_cli_determinism():
    cmd = [sys.executable, "-m", "haantjes", "builtin:calogero3", "--suite", "all", "--seed", "7", "--format", "machine"]
    t0 = time.perf_counter()
    first = subprocess.run(cmd, capture_output=True)
    second = subprocess.run(cmd, capture_output=True)
    ok = first.returncode == 0 and second.returncode == 0 and first.stdout == second.stdout and first.stdout
    record("11", bool(ok), f"two runs exit {first.returncode}/{second.returncode}, identical={first.stdout == second.stdout}, "
                           f"{len(first.stdout.splitlines())} lines ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
