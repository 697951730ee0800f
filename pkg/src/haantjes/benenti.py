"""Classical Stäckel metrics, Killing tensors and the Benenti L-tensor tower.

Symmetric contravariant 2-tensors on the n-dimensional configuration space
are carried as operator fields of dimension n whose value is the symmetric
component matrix ``A[i, j] = A^{ij}``. The Schouten bracket of two of them is
the cubic symbol of the canonical Poisson bracket of their quadratic symbols
``A^{ij} p_i p_j`` and ``B^{kl} p_k p_l``.
"""

from __future__ import annotations

import itertools
from typing import Callable, Mapping, Sequence

import numpy as np

from .dual import Dual, Jet
from .errors import DimensionError
from .expression import as_expression
from .fields import OperatorField
from .report import Check
from .stackel import StackelMatrix, StackelSystem, hamiltonian_jet

# (X ⊙ G)^{ijk} = SYMMETRIC_PRODUCT_CONSTANT / 3 (X^i G^{jk} + X^j G^{ki} + X^k G^{ij}).
# The constant is fixed so that the trace-type conformal Killing equation
# [L, G] = -2 X ⊙ G holds with the bracket sign used in schouten_from_jets.
SYMMETRIC_PRODUCT_CONSTANT = -1.0

SymContraTensor = OperatorField


def symmetric_tensor(entries: Sequence[Sequence], n: int, params: Mapping[str, float] | None = None, name: str = "") -> OperatorField:
    """Symmetric contravariant 2-tensor on Q from an n x n array of expressions."""
    field = OperatorField.from_expressions(entries, n, params, space="config", name=name)
    for i, j in itertools.combinations(range(n), 2):
        a, b = field.expressions[i, j], field.expressions[j, i]
        if str(a) != str(b):
            # textual mismatch is allowed if the values agree; check at a probe point
            probe = np.linspace(0.31, 0.97, n)
            if not np.isclose(a.evaluate(probe), b.evaluate(probe), rtol=1e-12, atol=1e-12):
                raise ValueError(f"tensor {name or '?'} is not symmetric in entries ({i}, {j})")
    return field


class DiagonalMetric:
    """Inverse metric diag(g^1, ..., g^n) on Q."""

    def __init__(self, n: int, jet_fn: Callable[[np.ndarray], Jet], name: str = "G"):
        self.n = n
        self._jet_fn = jet_fn
        self.name = name

    @classmethod
    def from_expressions(cls, components: Sequence, n: int, params: Mapping[str, float] | None = None, name: str = "G"):
        exprs = [as_expression(e, n, params) for e in components]
        if len(exprs) != n:
            raise DimensionError(f"{len(exprs)} metric components for n={n}")
        for j, e in enumerate(exprs):
            if not e.is_configuration:
                raise DimensionError(f"metric component g^{j + 1} depends on momenta")
        return cls(n, lambda q: Jet.from_duals([e.eval_dual(q) for e in exprs], n), name)

    @classmethod
    def from_stackel(cls, S: StackelMatrix, name: str = "G"):
        """g^j = adj[0, j] / det S, the first row of S^{-1}."""
        def jet_fn(q):
            inv = S.inverse_jets(q)[2]
            return Jet(inv.value[0], inv.deriv[0])

        return cls(S.n, jet_fn, name)

    @classmethod
    def euclidean(cls, n: int, name: str = "G"):
        return cls(n, lambda q: Jet.constant(np.ones(n), n), name)

    def components(self, q) -> Jet:
        return self._jet_fn(np.asarray(q, dtype=float))

    def values(self, q) -> np.ndarray:
        return self.components(q).value

    @property
    def field(self) -> OperatorField:
        n = self.n

        def jet_fn(q):
            g = self.components(q)
            d = np.zeros((n, n, n))
            d[np.arange(n), np.arange(n)] = g.deriv
            return Jet(np.diag(g.value), d)

        return OperatorField(n, jet_fn, self.name)


def _metric_field(G) -> OperatorField:
    return G.field if isinstance(G, DiagonalMetric) else G


def classical_metric(S: StackelMatrix, W: Sequence, x) -> tuple[np.ndarray, float, float]:
    """Metric components g^j, potential V = sum g^j W_j and H = 1/2 sum g^j p_j^2 + V at x = (q, p)."""
    n = S.n
    x = np.asarray(x, dtype=float)
    if x.shape != (2 * n,):
        raise DimensionError(f"phase point of shape {x.shape} for n={n}")
    q, p = x[:n], x[n:]
    Wsys = StackelSystem(S, W)
    g = DiagonalMetric.from_stackel(S).values(q)
    V = float(g @ np.array([e.evaluate(x) for e in Wsys.f]))
    return g, V, 0.5 * float(g @ p ** 2) + V


def schouten_from_jets(A: Jet, B: Jet) -> np.ndarray:
    """Rank-3 symmetric components of [A, B] from the jets of A and B.

    Contracting the result with p (x) p (x) p gives the Poisson bracket
    {A^{ij} p_i p_j, B^{kl} p_k p_l}.
    """
    if A.shape != B.shape or A.dim != A.shape[0]:
        raise DimensionError("Schouten bracket needs two tensors on the same configuration space")
    c = 2.0 * (np.einsum("ijk,kl->ijl", A.deriv, B.value) - np.einsum("kl,ijk->ijl", A.value, B.deriv))
    return sum(np.transpose(c, perm) for perm in itertools.permutations(range(3))) / 6.0


def schouten_bracket(A: OperatorField, B: OperatorField, q) -> np.ndarray:
    return schouten_from_jets(A.jet(q), B.jet(q))


def _bracket_scale(A: Jet, B: Jet) -> float:
    s = (np.max(np.abs(A.value)) * np.max(np.abs(B.deriv), initial=0.0)
         + np.max(np.abs(A.deriv), initial=0.0) * np.max(np.abs(B.value)))
    return float(s) if s > 0 else 1.0


def relative_schouten(A: Jet, B: Jet) -> float:
    """max |[A, B]| / (|A| |dB| + |dA| |B|)."""
    return float(np.max(np.abs(schouten_from_jets(A, B)))) / _bracket_scale(A, B)


def raise_index(K: OperatorField, G) -> OperatorField:
    """Contravariant form K^{ij} = K^i_a g^{aj}."""
    Gf = _metric_field(G)
    return OperatorField(K.dim, lambda q: K.jet(q) @ Gf.jet(q), (K.name + "#") if K.name else "")


def killing_check(K: OperatorField, G, samples: Sequence, tol: float, check_id: str = "") -> Check:
    """Relative max component of [K, G] over samples; K is contravariant."""
    Gf = _metric_field(G)
    res = max(relative_schouten(K.jet(q), Gf.jet(q)) for q in samples)
    return Check(check_id or f"killing.{K.name or 'K'}", len(samples), res, tol)


def involution_check(A: OperatorField, B: OperatorField, samples: Sequence, tol: float, check_id: str = "") -> Check:
    res = max(relative_schouten(A.jet(q), B.jet(q)) for q in samples)
    return Check(check_id or f"schouten.{A.name or 'A'}.{B.name or 'B'}", len(samples), res, tol)


def _power_jets(L: Jet, n: int) -> list[Jet]:
    out = [Jet.identity(L.shape[0], L.dim)]
    for _ in range(n):
        out.append(out[-1] @ L)
    return out


def trace_coefficients(L: Jet) -> list[Dual]:
    """c_1..c_n of the characteristic polynomial t^n - c_1 t^(n-1) - ... - c_n from traces (Newton identities)."""
    n = L.shape[0]
    powers = _power_jets(L, n)
    s = [None] + [P.trace() for P in powers[1:]]
    sigma = [Dual.constant(1.0, L.dim)]
    for k in range(1, n + 1):
        acc = Dual.constant(0.0, L.dim)
        for i in range(1, k + 1):
            term = sigma[k - i] * s[i]
            acc = acc + term if i % 2 else acc - term
        sigma.append(acc * (1.0 / k))
    return [sigma[k] if k % 2 else -sigma[k] for k in range(1, n + 1)]


def tower_jets(L: Jet) -> list[Jet]:
    """K~_alpha = L^alpha - sum_{j < alpha} c_{alpha - j} L^j for alpha = 0..n-1."""
    n = L.shape[0]
    powers = _power_jets(L, n)
    c = trace_coefficients(L)
    out = []
    for alpha in range(n):
        K = powers[alpha]
        for j in range(alpha):
            K = K - powers[j] * c[alpha - j - 1]
        out.append(K)
    return out


def benenti_tower(L: OperatorField, q) -> list[np.ndarray]:
    return [K.value for K in tower_jets(L.jet(q))]


def tower_fields(L: OperatorField) -> list[OperatorField]:
    n = L.dim
    return [OperatorField(n, lambda q, a=a: tower_jets(L.jet(q))[a], f"K~{a}") for a in range(n)]


def symmetric_product(X: np.ndarray, G: np.ndarray) -> np.ndarray:
    t = np.einsum("i,jk->ijk", X, G)
    t = t + np.transpose(t, (1, 2, 0)) + np.transpose(t, (2, 0, 1))
    return SYMMETRIC_PRODUCT_CONSTANT * t / 3.0


def l_tensor_residual(L: OperatorField, G, q) -> float:
    """|[L#, G] + 2 X ⊙ G| with X = G d(tr L), relative to |L#| |dG| + |dL#| |G|."""
    Gj = _metric_field(G).jet(q)
    Lj = L.jet(q)
    Lsharp = Lj @ Gj
    X = Gj.value @ Lj.trace().grad
    r = schouten_from_jets(Lsharp, Gj) + 2.0 * symmetric_product(X, Gj.value)
    return float(np.max(np.abs(r))) / _bracket_scale(Lsharp, Gj)


def l_tensor_check(L: OperatorField, G, samples: Sequence, tol: float, check_id: str = "") -> Check:
    res = max(l_tensor_residual(L, G, q) for q in samples)
    return Check(check_id or f"ltensor.{L.name or 'L'}", len(samples), res, tol)


def tower_chain_residual(L: OperatorField, S: StackelMatrix, W: Sequence, q) -> float:
    """max_j |dV_j - K~_{j-1}^T dV_1| / |dV_1| on Q for the potentials V = S^{-1} W."""
    n = S.n
    x = np.concatenate([np.asarray(q, dtype=float), np.zeros(n)])
    dV = hamiltonian_jet(StackelSystem(S, W), x).deriv[:, :n]
    Ks = benenti_tower(L, q)
    scale = float(np.max(np.abs(dV[0]))) or 1.0
    return max(float(np.max(np.abs(dV[j] - Ks[j].T @ dV[0]))) for j in range(n)) / scale
