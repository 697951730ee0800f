"""Quasi-bi-Hamiltonian Stäckel systems and the Goldfish models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import CollisionError, DimensionError, LocalityError
from .expression import Expression, as_expression, constant, parse_expression
from .fields import OperatorField, ScalarField, SymplecticForm, differential
from .stackel import (
    GeneratorSpec,
    StackelMatrix,
    StackelSystem,
    check_distinct,
    control_basis,
    generator_field,
    hamiltonian_fields,
)
from .symmetric import coefficient_derivatives, minimal_polynomial_coefficients, node_products


class QbhSystem:
    """Eigenvalue functions lambda_r(q_r) and Stäckel functions f_r(q_r, p_r)."""

    def __init__(self, lambdas: Sequence, f: Sequence, n: int | None = None, params: Mapping[str, float] | None = None):
        n = n or len(lambdas)
        if len(lambdas) != n or len(f) != n:
            raise DimensionError(f"QBH system needs {n} eigenvalue and {n} Stäckel functions")
        self.n = n
        self.params = dict(params or {})
        self.lambdas = [as_expression(e, n, params) for e in lambdas]
        for r, e in enumerate(self.lambdas):
            bad = e.variables() - {("q", r + 1)}
            if bad:
                names = ", ".join(f"{k}{i}" for k, i in sorted(bad))
                raise LocalityError(f"eigenvalue function lambda{r + 1} references {names}; only q{r + 1} is allowed")
        self.f = [as_expression(e, n, params) for e in f]
        self._stackel = StackelSystem(self._reverse_vandermonde(), self.f)

    def _reverse_vandermonde(self) -> StackelMatrix:
        n = self.n
        rows = []
        for lam in self.lambdas:
            rows.append([lam ** float(n - 1 - k) if n - 1 - k > 1 else (lam if n - 1 - k == 1 else constant(1.0, n))
                         for k in range(n)])
        return StackelMatrix(rows, n)

    @property
    def generator(self) -> GeneratorSpec:
        return GeneratorSpec(self.lambdas, self.n)

    def eigenvalues(self, q) -> np.ndarray:
        return self.generator.values(q)


def build_qbh(sys: QbhSystem) -> StackelSystem:
    """Stäckel system whose matrix is the reverse Vandermonde matrix of the eigenvalues."""
    return sys._stackel


def nijenhuis_generator(sys: QbhSystem) -> OperatorField:
    N = generator_field(sys.generator)
    N.name = "N"
    return N


@dataclass
class QbhOperators:
    operators: list[np.ndarray]
    eigenvalues: np.ndarray  # D[j, r] = dc_(j+1) / d lambda_r
    control_residual: float  # max_j |K_j - e_(j+1)(N)| / (1 + |K_j|)


def qbh_operators(sys: QbhSystem, x) -> QbhOperators:
    n = sys.n
    x = np.asarray(x, dtype=float)
    lam = sys.eigenvalues(x[:n])
    check_distinct(lam)
    D = coefficient_derivatives(lam)
    ops = [np.diag(np.concatenate([D[j], D[j]])) for j in range(n)]
    N = nijenhuis_generator(sys)(x)
    e = control_basis(N, minimal_polynomial_coefficients(list(lam)))
    res = max(float(np.max(np.abs(K - ej))) / (1.0 + np.max(np.abs(K))) for K, ej in zip(ops, e))
    return QbhOperators(ops, D, res)


def qbh_closed_form(sys: QbhSystem, x) -> np.ndarray:
    """H_k = sum_i (dc_k/d lambda_i) f_i / prod_{j != i}(lambda_i - lambda_j)."""
    n = sys.n
    x = np.asarray(x, dtype=float)
    lam = sys.eigenvalues(x[:n])
    check_distinct(lam)
    f = np.array([e.evaluate(x) for e in sys.f])
    return coefficient_derivatives(lam) @ (f / node_products(lam))


class GoldfishModel:
    """H = sum_i ( e^(a p_i) / prod_{j != i}(q_i - q_j) + b q_i )."""

    def __init__(self, n: int, a: float = 1.0, b: float = 0.0):
        if n < 1:
            raise ValueError("n must be positive")
        if a == 0:
            raise ValueError("Goldfish coupling a must be nonzero")
        self.n, self.a, self.b = int(n), float(a), float(b)
        self.params = {"a": self.a, "b": self.b}

    def __repr__(self):
        return f"GoldfishModel(n={self.n}, a={self.a}, b={self.b})"

    def qbh_system(self) -> QbhSystem:
        n = self.n
        lambdas = [f"q{i}" for i in range(1, n + 1)]
        f = [f"exp(a*p{i}) + b*q{i}^{n}" for i in range(1, n + 1)]
        return QbhSystem(lambdas, f, n, self.params)

    def hamiltonian_expression(self) -> Expression:
        n = self.n
        terms = []
        for i in range(1, n + 1):
            den = "*".join(f"(q{i} - q{j})" for j in range(1, n + 1) if j != i) or "1"
            terms.append(f"exp(a*p{i})/({den}) + b*q{i}")
        return parse_expression(" + ".join(terms), n, self.params)

    def chain(self) -> list[ScalarField]:
        return hamiltonian_fields(build_qbh(self.qbh_system()))

    def check_collisions(self, q) -> None:
        q = np.asarray(q, dtype=float)[: self.n]
        gaps = np.abs(q[:, None] - q[None, :]) + np.eye(self.n)
        if np.any(gaps == 0.0):
            raise CollisionError(f"coordinate collision at q={q.tolist()}")


def goldfish_hamiltonian(m: GoldfishModel, x) -> float:
    n = m.n
    x = np.asarray(x, dtype=float)
    q, p = x[:n], x[n:]
    m.check_collisions(q)
    return float(np.sum(np.exp(m.a * p) / node_products(q) + m.b * q))


def jacobi_identity_residual(n: int, q, relative: bool = False) -> float:
    """|sum_i q_i^n / prod_{j != i}(q_i - q_j) - sum_i q_i|, optionally divided by sum of |terms|."""
    q = np.asarray(q, dtype=float)
    if q.shape != (n,):
        raise DimensionError(f"expected {n} coordinates")
    gaps = np.abs(q[:, None] - q[None, :]) + np.eye(n)
    if np.any(gaps == 0.0):
        raise CollisionError(f"coordinate collision at q={q.tolist()}")
    terms = q ** n / node_products(q)
    res = abs(float(np.sum(terms) - np.sum(q)))
    if relative:
        res /= max(1.0, float(np.sum(np.abs(terms))))
    return res


def goldfish_newton_residual(m: GoldfishModel, x, h: float = 1e-5) -> np.ndarray:
    """q'' along the Hamiltonian flow minus 2 sum_{i != k} q'_k q'_i / (q_k - q_i) - a b q'_k.

    Second derivatives are central finite differences (step h) of the exact
    dual-number gradient field.
    """
    n = m.n
    x = np.asarray(x, dtype=float)
    m.check_collisions(x[:n])
    H = m.hamiltonian_expression()
    grad = differential(H, x)
    xdot = SymplecticForm(n).poisson @ grad
    qdot = xdot[:n]
    hess = np.zeros((2 * n, 2 * n))
    for c in range(2 * n):
        e = np.zeros(2 * n)
        e[c] = h
        hess[:, c] = (differential(H, x + e) - differential(H, x - e)) / (2 * h)
    qddot = hess[n:, :] @ xdot
    q = x[:n]
    rhs = np.empty(n)
    for k in range(n):
        s = sum(qdot[k] * qdot[i] / (q[k] - q[i]) for i in range(n) if i != k)
        rhs[k] = 2 * s - m.a * m.b * qdot[k]
    return qddot - rhs
