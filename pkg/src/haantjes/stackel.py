"""Generalized Stäckel systems: Hamiltonians, Haantjes operators, generators and bases.

Notation: ``S`` is the n x n Stäckel matrix (row i depends on q_i only),
``adj`` its adjugate, so that ``adj @ S = det(S) I``. The separable
Hamiltonians are ``H = S^{-1} f`` and the j-th Haantjes operator is the
diagonal lift of the eigenvalues ``adj[j, r] / adj[0, r]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dual import Dual, Jet
from .errors import CollisionError, DimensionError, LocalityError, ProjectionError, SingularMatrixError
from .expression import Expression, as_expression
from .fields import OperatorField, ScalarField, SymplecticForm, bracket_of_gradients
from .symmetric import control_transition, minimal_polynomial_coefficients, vandermonde
from .tensors import ChainSpec, HaantjesStructure

SINGULAR_COND = 1e14
COLLISION_GAP = 1e-8


def _names(vs) -> str:
    return ", ".join(f"{k}{i}" for k, i in sorted(vs))


class StackelMatrix:
    """n x n matrix of expressions whose i-th row depends on q_i only."""

    def __init__(self, rows: Sequence[Sequence], n: int | None = None, params: Mapping[str, float] | None = None):
        n = n or len(rows)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise DimensionError(f"Stäckel matrix must be {n}x{n}")
        self.n = n
        self.rows = [[as_expression(e, n, params) for e in row] for row in rows]
        for i, row in enumerate(self.rows):
            allowed = {("q", i + 1)}
            for e in row:
                bad = e.variables() - allowed
                if bad:
                    raise LocalityError(f"Stäckel row {i + 1} references {_names(bad)}; only q{i + 1} is allowed")
        self._cache: tuple = (None, None)

    def __repr__(self):
        return f"StackelMatrix({[[str(e) for e in r] for r in self.rows]})"

    def value(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)[: self.n]
        return np.array([[e.evaluate(q) for e in row] for row in self.rows])

    def jet(self, q) -> Jet:
        """Entries and their q-derivatives (derivative axis of length n)."""
        q = np.asarray(q, dtype=float)[: self.n]
        return Jet.from_duals([[e.eval_dual(q) for e in row] for row in self.rows], self.n)

    def rescaled(self, factors: Sequence) -> "StackelMatrix":
        """Multiply row i by the single-variable function F_i(q_i)."""
        F = [as_expression(f, self.n) for f in factors]
        return StackelMatrix([[e * F[i] for e in row] for i, row in enumerate(self.rows)], self.n)

    def inverse_jets(self, q) -> tuple[Jet, Dual, Jet]:
        """(adjugate, determinant, inverse) with q-derivatives, cached per point."""
        q = np.asarray(q, dtype=float)[: self.n]
        key = q.tobytes()
        if self._cache[0] == key:
            return self._cache[1]
        Sj = self.jet(q)
        S = Sj.value
        det = float(np.linalg.det(S))
        if not np.isfinite(det) or det == 0.0 or np.linalg.cond(S) > SINGULAR_COND:
            raise SingularMatrixError(f"Stäckel matrix singular at q={q.tolist()}", det)
        inv = np.linalg.inv(S)
        dinv = -np.einsum("ij,jkc,kl->ilc", inv, Sj.deriv, inv)
        ddet = det * np.einsum("ji,ijc->c", inv, Sj.deriv)
        adj = Jet(det * inv, ddet[None, None, :] * inv[..., None] + det * dinv)
        out = (adj, Dual(det, ddet), Jet(inv, dinv))
        self._cache = (key, out)
        return out

    def eigenvalue_jet(self, q) -> Jet:
        """mu[j, r] = adj[j, r] / adj[0, r]: eigenvalues of K_j on the r-th coordinate pair."""
        adj = self.inverse_jets(q)[0]
        first = adj.value[0]
        if np.any(first == 0.0):
            r = int(np.flatnonzero(first == 0.0)[0])
            raise SingularMatrixError(f"first-row cofactor {r + 1} vanishes at q={np.asarray(q)[: self.n].tolist()}", 0.0)
        mu = adj.value / first[None, :]
        dmu = (adj.deriv - mu[..., None] * adj.deriv[0][None, :, :]) / first[None, :, None]
        return Jet(mu, dmu)


class StackelSystem:
    """A Stäckel matrix with Stäckel functions f_k(q_k, p_k)."""

    def __init__(self, S: StackelMatrix, f: Sequence, params: Mapping[str, float] | None = None):
        self.S = S
        n = S.n
        if len(f) != n:
            raise DimensionError(f"{len(f)} Stäckel functions for n={n}")
        self.f = [as_expression(e, n, params) for e in f]
        for k, e in enumerate(self.f):
            bad = e.variables() - {("q", k + 1), ("p", k + 1)}
            if bad:
                raise LocalityError(f"Stäckel function f{k + 1} references {_names(bad)}; only q{k + 1}, p{k + 1} are allowed")

    @property
    def n(self) -> int:
        return self.S.n


def cofactors(S: StackelMatrix, q) -> tuple[np.ndarray, float]:
    """Adjugate (adj[j, k] = cofactor of S[k, j]) and determinant at q."""
    adj, det, _ = S.inverse_jets(q)
    return adj.value.copy(), det.value


def hamiltonian_jet(sys: StackelSystem, x) -> Jet:
    """H_j = sum_k adj[j, k] / det f_k(q_k, p_k) with gradients over the 2n phase coordinates."""
    n = sys.n
    x = np.asarray(x, dtype=float)
    if x.shape != (2 * n,):
        raise DimensionError(f"phase point of shape {x.shape} for n={n}")
    inv = sys.S.inverse_jets(x[:n])[2].pad(2 * n)
    f = Jet.from_duals([e.eval_dual(x) for e in sys.f], 2 * n)
    return inv @ f


def stackel_hamiltonians(sys: StackelSystem, x) -> np.ndarray:
    return hamiltonian_jet(sys, x).value


def hamiltonian_fields(sys: StackelSystem) -> list[ScalarField]:
    n = sys.n

    def member(j):
        return ScalarField.from_dual_function(lambda x: hamiltonian_jet(sys, x).entry(j), 2 * n, f"H{j + 1}")

    return [member(j) for j in range(n)]


def lift_diagonal(mu: Jet, n: int) -> Jet:
    """Phase-space operator sum_r mu_r (d/dq_r (x) dq_r + d/dp_r (x) dp_r) from q-dependent mu."""
    v = np.concatenate([mu.value, mu.value])
    d = np.zeros((2 * n, 2 * n, 2 * n))
    idx = np.arange(n)
    d[idx, idx, :n] = mu.deriv
    d[idx + n, idx + n, :n] = mu.deriv
    return Jet(np.diag(v), d)


def _row(jet: Jet, j: int) -> Jet:
    return Jet(jet.value[j], jet.deriv[j])


def stackel_operator_fields(S: StackelMatrix | StackelSystem) -> list[OperatorField]:
    S = S.S if isinstance(S, StackelSystem) else S
    n = S.n

    def op(j):
        if j == 0:
            return OperatorField.identity(2 * n, "K0")
        return OperatorField(2 * n, lambda x: lift_diagonal(_row(S.eigenvalue_jet(x[:n]), j), n), f"K{j}")

    return [op(j) for j in range(n)]


def stackel_operators(sys: StackelSystem | StackelMatrix, x) -> list[np.ndarray]:
    """Values of K_0 = I, K_1, ..., K_{n-1} at x (each 2n x 2n diagonal)."""
    return [K(x) for K in stackel_operator_fields(sys)]


def stackel_structure(S: StackelMatrix | StackelSystem) -> HaantjesStructure:
    n = (S.S if isinstance(S, StackelSystem) else S).n
    ops = stackel_operator_fields(S)
    return HaantjesStructure(SymplecticForm(n), ops, [K.name for K in ops])


def stackel_chain(sys: StackelSystem) -> ChainSpec:
    return ChainSpec(hamiltonian_fields(sys))


def projected_operator_fields(S: StackelMatrix | StackelSystem) -> list[OperatorField]:
    """Configuration-space operators diag(adj[j, r] / adj[0, r]) on Q."""
    S = S.S if isinstance(S, StackelSystem) else S
    n = S.n

    def op(j):
        def jet_fn(q):
            mu = _row(S.eigenvalue_jet(q), j)
            d = np.zeros((n, n, n))
            d[np.arange(n), np.arange(n)] = mu.deriv
            return Jet(np.diag(mu.value), d)

        return OperatorField(n, jet_fn, f"K{j}~")

    return [op(j) for j in range(n)]


class GeneratorSpec:
    """Eigenvalue functions lambda_r(q) of the generator K = sum lambda_r (dq_r + dp_r projectors)."""

    def __init__(self, lambdas: Sequence, n: int | None = None, params: Mapping[str, float] | None = None):
        n = n or len(lambdas)
        if len(lambdas) != n:
            raise DimensionError(f"{len(lambdas)} eigenvalue functions for n={n}")
        self.n = n
        self.lambdas = [as_expression(e, n, params) for e in lambdas]
        for r, e in enumerate(self.lambdas):
            if not e.is_configuration:
                raise LocalityError(f"eigenvalue function lambda{r + 1} depends on momenta")

    def values(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)[: self.n]
        return np.array([e.evaluate(q) for e in self.lambdas])

    def jet(self, q) -> Jet:
        q = np.asarray(q, dtype=float)[: self.n]
        return Jet.from_duals([e.eval_dual(q) for e in self.lambdas], self.n)


def check_distinct(lam: np.ndarray, gap: float = COLLISION_GAP) -> None:
    scale = max(1.0, float(np.max(np.abs(lam))))
    for i in range(len(lam)):
        for j in range(i):
            if abs(lam[i] - lam[j]) <= gap * scale:
                raise CollisionError(f"eigenvalues lambda{j + 1} and lambda{i + 1} collide ({lam[i]:.6g})")


def generator_field(gen: GeneratorSpec) -> OperatorField:
    n = gen.n
    return OperatorField(2 * n, lambda x: lift_diagonal(gen.jet(x[:n]), n), "K")


def generator(gen: GeneratorSpec, x) -> np.ndarray:
    return generator_field(gen)(np.asarray(x, dtype=float))


def interpolation_projectors(gen: GeneratorSpec, x) -> list[np.ndarray]:
    """Lagrange projectors pi_r = prod_{i != r}(K - lambda_i I) / prod_{i != r}(lambda_r - lambda_i)."""
    n = gen.n
    lam = gen.values(np.asarray(x)[:n])
    check_distinct(lam)
    K = generator(gen, x)
    eye = np.eye(2 * n)
    out = []
    for r in range(n):
        P = eye.copy()
        for i in range(n):
            if i != r:
                P = P @ (K - lam[i] * eye) / (lam[r] - lam[i])
        out.append(P)
    return out


@dataclass
class BasisCoefficients:
    """Representations of the Stäckel operators on the interpolation, cyclic and control bases."""

    eigenvalues: np.ndarray  # mu[j, r], interpolation-basis coordinates of K_j
    c: np.ndarray  # minimal-polynomial coefficients c_1..c_n
    cyclic: np.ndarray  # cyclic[j] = a^(j) with K_j = sum_i a_i K^i
    control: np.ndarray  # control[j] = b^(j) with K_j = sum_k b_k e_k(K)
    control_matrices: list[np.ndarray]  # e_1(K), ..., e_n(K)
    V: np.ndarray
    H_R: np.ndarray
    condition: float
    residuals: dict[str, float]


def control_basis(K: np.ndarray, c: Sequence[float]) -> list[np.ndarray]:
    """e_1 = I, e_k = K^(k-1) - c_1 K^(k-2) - ... - c_(k-1) I."""
    n = len(c)
    powers = [np.eye(K.shape[0])]
    for _ in range(n - 1):
        powers.append(powers[-1] @ K)
    out = []
    for k in range(1, n + 1):
        e = powers[k - 1].copy()
        for m in range(1, k):
            e -= c[m - 1] * powers[k - 1 - m]
        out.append(e)
    return out


def basis_coefficients(sys: StackelSystem | StackelMatrix, gen: GeneratorSpec, x) -> BasisCoefficients:
    S = sys.S if isinstance(sys, StackelSystem) else sys
    n = S.n
    x = np.asarray(x, dtype=float)
    if x.shape == (n,):
        x = np.concatenate([x, np.zeros(n)])
    lam = gen.values(x[:n])
    check_distinct(lam)
    mu = S.eigenvalue_jet(x[:n]).value
    c = np.array(minimal_polynomial_coefficients(list(lam)))
    V = vandermonde(lam)
    H_R = control_transition(c)
    cyclic = np.linalg.solve(V, mu.T).T
    control = np.linalg.solve(V @ H_R, mu.T).T

    K = generator(gen, x)
    powers = [np.eye(2 * n)]
    for _ in range(n - 1):
        powers.append(powers[-1] @ K)
    e = control_basis(K, c)
    projs = interpolation_projectors(gen, x)
    ops = [lift_diagonal(Jet(mu[j], np.zeros((n, n))), n).value for j in range(n)]
    res = {"cyclic": 0.0, "control": 0.0, "interpolation": 0.0, "minimal_polynomial": 0.0}
    for j in range(n):
        scale = 1.0 + np.max(np.abs(ops[j]))
        cyc = sum(cyclic[j, i] * powers[i] for i in range(n))
        con = sum(control[j, k] * e[k] for k in range(n))
        itp = sum(mu[j, r] * projs[r] for r in range(n))
        res["cyclic"] = max(res["cyclic"], float(np.max(np.abs(ops[j] - cyc))) / scale)
        res["control"] = max(res["control"], float(np.max(np.abs(ops[j] - con))) / scale)
        res["interpolation"] = max(res["interpolation"], float(np.max(np.abs(ops[j] - itp))) / scale)
    # m_K(K) = K^n - c_1 K^(n-1) - ... - c_n I must vanish
    mK = powers[-1] @ K - sum(c[k] * powers[n - 1 - k] for k in range(n))
    res["minimal_polynomial"] = float(np.max(np.abs(mK))) / (1.0 + np.max(np.abs(K))) ** n
    return BasisCoefficients(mu, c, cyclic, control, e, V, H_R, float(np.linalg.cond(V)), res)


def project_to_configuration(K: OperatorField, samples: Sequence, tol: float = 1e-10) -> OperatorField:
    """Project a phase-space operator along the fibres of T*Q onto its q-block.

    Requires that K maps vertical vectors to vertical vectors (zero upper-right
    block) and that the q-block does not depend on the momenta; both are
    checked at ``samples``.
    """
    if K.dim % 2:
        raise DimensionError("projection needs an operator on an even-dimensional phase space")
    n = K.dim // 2
    worst = 0.0
    for x in samples:
        j = K.jet(x)
        scale = 1.0 + np.max(np.abs(j.value))
        upper = float(np.max(np.abs(j.value[:n, n:]))) / scale
        pdep = float(np.max(np.abs(j.deriv[:n, :n, n:]))) / scale
        if upper > tol:
            raise ProjectionError(f"{K.name or 'operator'} does not preserve the vertical distribution (|upper block| = {upper:.3e})", upper)
        worst = max(worst, pdep)
    if worst > tol:
        raise ProjectionError(f"q-block of {K.name or 'operator'} depends on momenta (max |d/dp| = {worst:.3e})", worst)

    def jet_fn(q):
        j = K.jet(np.concatenate([q, np.zeros(n)]))
        return Jet(j.value[:n, :n], j.deriv[:n, :n, :n])

    return OperatorField(n, jet_fn, (K.name + "~") if K.name else "")


def relative_bracket(dF: np.ndarray, dG: np.ndarray) -> float:
    """|{F, G}| / (|dF|_inf |dG|_inf), zero when either gradient vanishes."""
    scale = float(np.max(np.abs(dF)) * np.max(np.abs(dG)))
    return abs(bracket_of_gradients(dF, dG)) / scale if scale > 0 else 0.0


@dataclass
class PotentialChain:
    T: np.ndarray
    V: np.ndarray
    residuals: dict[str, float]


def potential_chain(S: StackelMatrix, W: Sequence, psi: Sequence, x) -> PotentialChain:
    """Kinetic/potential chains T_j (f = psi_k(p_k)) and V_j (f = W_k(q_k)) with their involution residuals."""
    n = S.n
    x = np.asarray(x, dtype=float)
    Tj = hamiltonian_jet(StackelSystem(S, psi), x)
    Vj = hamiltonian_jet(StackelSystem(S, W), x)
    dT, dV = Tj.deriv, Vj.deriv
    res = {"TT": 0.0, "VV": 0.0, "TV": 0.0, "chain_Q": 0.0, "chain_T": 0.0, "chain_V": 0.0}
    for i in range(n):
        for j in range(n):
            res["TT"] = max(res["TT"], relative_bracket(dT[i], dT[j]))
            res["VV"] = max(res["VV"], relative_bracket(dV[i], dV[j]))
            mixed = bracket_of_gradients(dT[i], dV[j]) + bracket_of_gradients(dV[i], dT[j])
            scale = (np.max(np.abs(dT[i])) * np.max(np.abs(dV[j]))
                     + np.max(np.abs(dV[i])) * np.max(np.abs(dT[j])))
            res["TV"] = max(res["TV"], abs(mixed) / scale if scale > 0 else 0.0)
    mu = S.eigenvalue_jet(x[:n]).value
    for name, d in (("chain_T", dT), ("chain_V", dV)):
        s = np.max(np.abs(d[0]))
        for j in range(n):
            K = np.concatenate([mu[j], mu[j]])
            r = np.max(np.abs(d[j] - K * d[0]))
            res[name] = max(res[name], r / s if s > 0 else r)
    # projected chain on Q: dV_j = K~_{j-1}^T dV_1 with q-gradients only
    s = np.max(np.abs(dV[0, :n]))
    for j in range(n):
        r = np.max(np.abs(dV[j, :n] - mu[j] * dV[0, :n]))
        res["chain_Q"] = max(res["chain_Q"], r / s if s > 0 else r)
    return PotentialChain(Tj.value, Vj.value, res)


def random_polynomial(rng: np.random.Generator, variables: Sequence[str], degree: int, scale: float = 1.0) -> str:
    """Random polynomial (as source text) of total degree <= ``degree`` in the given variables."""
    terms = []
    if len(variables) == 1:
        monomials = [(k,) for k in range(degree + 1)]
    else:
        monomials = [(a, b) for a in range(degree + 1) for b in range(degree + 1 - a)]
    for powers in monomials:
        coef = rng.uniform(-scale, scale)
        factors = [f"{v}^{k}" if k > 1 else v for v, k in zip(variables, powers) if k]
        terms.append("*".join([f"({coef!r})"] + factors))
    return " + ".join(terms)


def random_stackel_system(rng: np.random.Generator, n: int = 3, degree: int = 3) -> StackelSystem:
    """Random Stäckel matrix with polynomial rows and random polynomial Stäckel functions.

    A unit diagonal is added to keep the matrix away from singularity in a
    neighbourhood of the origin.
    """
    rows = []
    for i in range(n):
        rows.append([
            random_polynomial(rng, [f"q{i + 1}"], degree, 0.5) + (" + 1.5" if k == i else "")
            for k in range(n)
        ])
    f = [random_polynomial(rng, [f"q{k + 1}", f"p{k + 1}"], degree, 1.0) for k in range(n)]
    return StackelSystem(StackelMatrix(rows, n), f)


def well_conditioned(S: StackelMatrix, q, cond_limit: float = 1e3, cofactor_floor: float = 1e-2) -> bool:
    """Sampling predicate: S well conditioned and first-row cofactors bounded away from zero."""
    try:
        adj, det, _ = S.inverse_jets(q)
    except SingularMatrixError:
        return False
    if np.linalg.cond(S.value(q)) > cond_limit:
        return False
    first = np.abs(adj.value[0])
    return bool(np.min(first) > cofactor_floor * np.max(np.abs(adj.value)))
