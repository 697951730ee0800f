"""Nijenhuis torsion, Haantjes tensor, and verification of symplectic-Haantjes structures.

Rank-(1,2) tensors are returned as arrays ``T[i, j, k] = T^i_{jk}``. An
operator jet carries ``L[i, j] = L^i_j`` and ``D[i, j, a] = dL^i_j/dx_a``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dual import Dual, Jet
from .errors import DimensionError
from .fields import Field, OperatorField, SymplecticForm, differential, lie_bracket, numerical_rank
from .report import Check, VerificationReport


def torsion_from_jet(jet: Jet) -> np.ndarray:
    L, D = jet.value, jet.deriv
    t = np.einsum("ika,aj->ijk", D, L)
    t -= np.einsum("ija,ak->ijk", D, L)
    t += np.einsum("ia,ajk->ijk", L, D)
    t -= np.einsum("ia,akj->ijk", L, D)
    return t


def haantjes_from_torsion(L: np.ndarray, T: np.ndarray) -> np.ndarray:
    h = np.einsum("ib,bjk->ijk", L @ L, T)
    h += np.einsum("iab,aj,bk->ijk", T, L, L)
    h -= np.einsum("ia,abk,bj->ijk", L, T, L)
    h -= np.einsum("ia,ajb,bk->ijk", L, T, L)
    return h


def nijenhuis_torsion(L: OperatorField, x) -> np.ndarray:
    return torsion_from_jet(L.jet(x))


def haantjes_tensor(L: OperatorField, x) -> np.ndarray:
    jet = L.jet(x)
    return haantjes_from_torsion(jet.value, torsion_from_jet(jet))


def haantjes_residual(jet: Jet) -> float:
    """max |H^i_jk| / (1 + max |L^i_j|)^3 at one point."""
    h = haantjes_from_torsion(jet.value, torsion_from_jet(jet))
    return float(np.max(np.abs(h)) / (1.0 + np.max(np.abs(jet.value))) ** 3)


@dataclass
class HaantjesStructure:
    """A symplectic form with operators K_0 = I, K_1, ..., K_{n-1} on a 2n-dimensional phase space."""

    omega: SymplecticForm
    operators: list[OperatorField]
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        n = self.omega.n
        if len(self.operators) != n:
            raise DimensionError(f"a structure on a {2 * n}-dimensional phase space needs {n} operators, got {len(self.operators)}")
        for K in self.operators:
            if K.dim != 2 * n:
                raise DimensionError(f"operator {K!r} does not act on a {2 * n}-dimensional space")
        if not self.names:
            self.names = [K.name or f"K{a}" for a, K in enumerate(self.operators)]

    @property
    def n(self) -> int:
        return self.omega.n


@dataclass
class ChainSpec:
    """Functions H_1..H_n claimed to satisfy dH_j = K_{j-1}^T dH_1."""

    members: list
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.names:
            self.names = [f"H{j + 1}" for j in range(len(self.members))]

    @property
    def generator(self):
        return self.members[0]


def verify_haantjes_vanishing(L: OperatorField, samples: Sequence, tol: float, check_id: str = "") -> Check:
    if not len(samples):
        raise ValueError("no sample points")
    res = max(haantjes_residual(L.jet(x)) for x in samples)
    return Check(check_id or f"haantjes.{L.name or 'L'}", len(samples), res, tol)


def _random_quadratic(rng: np.random.Generator, dim: int):
    c0 = rng.uniform(-1, 1)
    b = rng.uniform(-1, 1, dim)
    C = rng.uniform(-1, 1, (dim, dim)) / dim

    def coeff(x) -> Dual:
        return Dual(c0 + b @ x + x @ C @ x, b + (C + C.T) @ x)

    return coeff


def module_combination(jets: Sequence[Jet], coeffs: Sequence[Dual]) -> Jet:
    out = Jet.constant(np.zeros_like(jets[0].value), jets[0].dim)
    for j, a in zip(jets, coeffs):
        out = out + j * a
    return out


def verify_structure(
    s: HaantjesStructure,
    samples: Sequence,
    tol: float,
    rng: np.random.Generator | None = None,
    combinations: int = 10,
    prefix: str = "",
) -> VerificationReport:
    """Check K_0 = I, Haantjes vanishing, omega-compatibility, commutation and module closure."""
    if not len(samples):
        raise ValueError("no sample points")
    rng = rng if rng is not None else np.random.default_rng(0)
    Om = s.omega.omega
    names = s.names
    m = 2 * s.n
    coeffs = [[_random_quadratic(rng, m) for _ in s.operators] for _ in range(combinations)]

    ident = 0.0
    haan = np.zeros(len(s.operators))
    compat = np.zeros(len(s.operators))
    pairs = list(itertools.combinations(range(len(s.operators)), 2))
    comm = np.zeros(len(pairs))
    module = 0.0
    for x in samples:
        x = np.asarray(x, dtype=float)
        jets = [K.jet(x) for K in s.operators]
        ident = max(ident, float(np.max(np.abs(jets[0].value - np.eye(m)))))
        for a, j in enumerate(jets):
            K = j.value
            scale = 1.0 + np.max(np.abs(K))
            haan[a] = max(haan[a], haantjes_residual(j))
            compat[a] = max(compat[a], float(np.max(np.abs(K.T @ Om - Om @ K))) / scale)
        for i, (a, b) in enumerate(pairs):
            Ka, Kb = jets[a].value, jets[b].value
            scale = (1.0 + np.max(np.abs(Ka))) * (1.0 + np.max(np.abs(Kb)))
            comm[i] = max(comm[i], float(np.max(np.abs(Ka @ Kb - Kb @ Ka))) / scale)
        for cs in coeffs:
            combo = module_combination(jets, [c(x) for c in cs])
            module = max(module, haantjes_residual(combo))

    ns = len(samples)
    report = VerificationReport()
    report.add(Check(f"{prefix}identity", ns, ident, tol))
    for a, name in enumerate(names):
        report.add(Check(f"{prefix}haantjes.{name}", ns, float(haan[a]), tol))
        report.add(Check(f"{prefix}compat.{name}", ns, float(compat[a]), tol))
    for i, (a, b) in enumerate(pairs):
        report.add(Check(f"{prefix}commute.{names[a]}.{names[b]}", ns, float(comm[i]), tol))
    report.add(Check(f"{prefix}module", ns, module, tol, notes=f"{combinations} random quadratic coefficient sets"))
    return report


def chain_residuals(s: HaantjesStructure, c: ChainSpec, x) -> np.ndarray:
    """|dH_j - K_{j-1}^T dH_1|_inf / |dH_1|_inf for every member at one point."""
    if len(c.members) != len(s.operators):
        raise DimensionError(f"{len(c.members)} chain members for {len(s.operators)} operators")
    x = np.asarray(x, dtype=float)
    dH = differential(c.members[0], x)
    scale = max(float(np.max(np.abs(dH))), np.finfo(float).tiny)
    out = np.zeros(len(c.members))
    for j, (K, H) in enumerate(zip(s.operators, c.members)):
        r = differential(H, x) - K(x).T @ dH
        out[j] = np.max(np.abs(r)) / scale
    return out


def verify_lenard_chain(s: HaantjesStructure, c: ChainSpec, samples: Sequence, tol: float, prefix: str = "") -> list[Check]:
    res = np.zeros(len(c.members))
    for x in samples:
        res = np.maximum(res, chain_residuals(s, c, x))
    return [
        Check(f"{prefix}chain.{c.names[j]}", len(samples), float(res[j]), tol,
              notes=f"dH_{j + 1} = {s.names[j]}^T dH_1")
        for j in range(len(c.members))
    ]


@dataclass
class EigenAnalysis:
    eigenvalues: np.ndarray
    clusters: list[tuple[complex, int]]
    semisimple: bool
    distinct: bool
    condition: float
    error: str = ""


def eigen_analysis(L: OperatorField, x, tol: float = 1e-8, multiplicity: int = 1, cond_limit: float = 1e8) -> EigenAnalysis:
    """Eigenvalues of L(x), a numerical semisimplicity flag and an eigenvalue-distinctness flag.

    ``multiplicity`` is the expected multiplicity of every distinct value: 2 for
    operators lifted diagonally from configuration space to phase space.
    """
    A = L(x)
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        return EigenAnalysis(np.full(A.shape[0], np.nan), [], False, False, np.inf, str(exc))
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    V = V[:, order]
    cond = float(np.linalg.cond(V))
    clusters: list[list[complex]] = []
    for lam in w:
        if clusters and abs(lam - clusters[-1][-1]) <= tol * max(1.0, abs(lam)):
            clusters[-1].append(lam)
        else:
            clusters.append([lam])
    summary = [(complex(np.mean(c)), len(c)) for c in clusters]
    values = w.real if np.all(np.abs(w.imag) <= tol) else w
    return EigenAnalysis(
        eigenvalues=values,
        clusters=[(c.real if abs(c.imag) <= tol else c, k) for c, k in summary],
        semisimple=bool(np.isfinite(cond) and cond < cond_limit),
        distinct=all(k == multiplicity for _, k in summary),
        condition=cond,
    )


@dataclass
class FrameIntegrability:
    pairs: dict[tuple[int, int], bool]
    residuals: dict[tuple[int, int], float]
    skipped: list[int]
    samples_used: int

    @property
    def passed(self) -> bool:
        return all(self.pairs.values())


def check_frame_integrability(frame: Sequence[Field], samples: Sequence, tol: float = 1e-9) -> FrameIntegrability:
    """Pointwise involutivity: [Y_i, Y_j] must lie in span{Y_i, Y_j} for every pair.

    The residual is the component of the bracket orthogonal to the span,
    relative to |Y_i| |dY_j| + |Y_j| |dY_i|. Samples where the frame is
    degenerate are skipped and listed.
    """
    k = len(frame)
    pairs = list(itertools.combinations(range(k), 2))
    worst = {p: 0.0 for p in pairs}
    skipped = []
    used = 0
    for idx, x in enumerate(samples):
        jets = [Y.jet(x) for Y in frame]
        vals = np.array([j.value for j in jets])
        if numerical_rank(vals, 1e-9) < k:
            skipped.append(idx)
            continue
        used += 1
        for i, j in pairs:
            br = lie_bracket(frame[i], frame[j], x)
            span = vals[[i, j]].T
            coef, *_ = np.linalg.lstsq(span, br, rcond=None)
            off = br - span @ coef
            scale = (np.linalg.norm(vals[i]) * np.linalg.norm(jets[j].deriv, 2)
                     + np.linalg.norm(vals[j]) * np.linalg.norm(jets[i].deriv, 2))
            worst[(i, j)] = max(worst[(i, j)], float(np.linalg.norm(off) / max(scale, 1e-300)) if scale else 0.0)
    return FrameIntegrability({p: worst[p] <= tol for p in pairs}, worst, skipped, used)
