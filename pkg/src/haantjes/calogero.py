"""The three-particle Jacobi-Calogero model: integrals, Haantjes operators and their checks.

Phase coordinates are (x, y, z, p_x, p_y, p_z) = (q1, q2, q3, p1, p2, p3)
and the coupling is the parameter ``a``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .benenti import DiagonalMetric, killing_check
from .errors import CollisionError
from .expression import Expression, parse_expression
from .fields import OperatorField, ScalarField, SymplecticForm, differential, numerical_rank
from .report import Check, VerificationReport
from .sampling import min_pair_gap, sample_box, separated
from .stackel import project_to_configuration, relative_bracket
from .tensors import ChainSpec, HaantjesStructure, chain_residuals, haantjes_residual, verify_structure

BOX = 2.0
MARGIN = 0.1
WEBS = ("cyl", "sph", "par")

_NAMES = {"x": "q1", "y": "q2", "z": "q3", "px": "p1", "py": "p2", "pz": "p3"}


def _src(template: str) -> str:
    return re.sub(r"\b(px|py|pz|x|y|z)\b", lambda m: _NAMES[m.group(1)], template)


_V = "a/(x - y)^2 + a/(y - z)^2 + a/(z - x)^2"
_LU = "((y*pz - z*py) + (z*px - x*pz) + (x*py - y*px))"
_L2 = "((y*pz - z*py)^2 + (z*px - x*pz)^2 + (x*py - y*px)^2)"

OBSERVABLES = {
    "H": f"(px^2 + py^2 + pz^2)/2 + {_V}",
    "H2": f"{_LU}^2/6 + ((x - y)^2 + (x - z)^2 + (y - z)^2)*({_V})/3",
    "Hcyl": "(px + py + pz)^2/2",
    "Hsph": f"{_L2}/2 + (x^2 + y^2 + z^2)*({_V})",
    "Hpar": f"((px + py + pz)*(x*px + y*py + z*pz) - (x + y + z)*(px^2 + py^2 + pz^2))/2 - (x + y + z)*({_V})",
    "H3": "(px^3 + py^3 + pz^3)/3 + a*((px + py)/(x - y)^2 + (py + pz)/(y - z)^2 + (px + pz)/(x - z)^2)",
    # the four-term reading with the (x, z) pair counted twice; kept for comparison only
    "H3_literal": "(px^3 + py^3 + pz^3)/3 + a*((px + py)/(x - y)^2 + (px + pz)/(x - z)^2 + (py + pz)/(y - z)^2 + (px + pz)/(x - z)^2)",
    "P": "px + py + pz",
}

_A1 = [
    ["(y - z)^2/3", "(y - z)*(z - x)/3", "(y - z)*(x - y)/3"],
    ["(y - z)*(z - x)/3", "(x - z)^2/3", "(z - x)*(x - y)/3"],
    ["(y - z)*(x - y)/3", "(z - x)*(x - y)/3", "(x - y)^2/3"],
]
_b1 = "((x - y)*pz + (y - z)*px + (z - x)*py)/3"
_B1 = [["0", _b1, f"-({_b1})"], [f"-({_b1})", "0", _b1], [_b1, f"-({_b1})", "0"]]
_ACYL = [["1"] * 3 for _ in range(3)]
_ASPH = [
    ["y^2 + z^2", "-(x*y)", "-(z*x)"],
    ["-(x*y)", "x^2 + z^2", "-(y*z)"],
    ["-(z*x)", "-(y*z)", "x^2 + y^2"],
]
_BSPH = [
    ["0", "y*px - x*py", "z*px - x*pz"],
    ["-(y*px - x*py)", "0", "z*py - y*pz"],
    ["-(z*px - x*pz)", "-(z*py - y*pz)", "0"],
]
_APAR = [
    ["-(y + z)", "(x + y)/2", "(x + z)/2"],
    ["(x + y)/2", "-(x + z)", "(y + z)/2"],
    ["(x + z)/2", "(y + z)/2", "-(x + y)"],
]
_BPAR = [
    ["0", "(py - px)/2", "(pz - px)/2"],
    ["-(py - px)/2", "0", "(pz - py)/2"],
    ["-(pz - px)/2", "-(pz - py)/2", "0"],
]
_ZERO = [["0"] * 3 for _ in range(3)]


def _block(A, B) -> list[list[str]]:
    """[[A, 0], [B, A]]."""
    return [list(A[i]) + list(_ZERO[i]) for i in range(3)] + [list(B[i]) + list(A[i]) for i in range(3)]


OPERATORS = {
    "K1": _block(_A1, _B1),
    "Kcyl": _block(_ACYL, _ZERO),
    "Ksph": _block(_ASPH, _BSPH),
    "Kpar": _block(_APAR, _BPAR),
}

WEB_OPERATOR = {"cyl": "Kcyl", "sph": "Ksph", "par": "Kpar"}
WEB_INTEGRAL = {"cyl": "Hcyl", "sph": "Hsph", "par": "Hpar"}
CHAIN_OF = {"K1": "H2", "Kcyl": "Hcyl", "Ksph": "Hsph", "Kpar": "Hpar"}
PROJECTED = {"A": "K1", "Acyl": "Kcyl", "Asph": "Ksph", "Apar": "Kpar"}


@dataclass(frozen=True)
class CalogeroPoint:
    x: float
    y: float
    z: float
    px: float = 0.0
    py: float = 0.0
    pz: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if self.x == self.y or self.y == self.z or self.z == self.x:
            raise CollisionError(f"particles collide at (x, y, z) = ({self.x}, {self.y}, {self.z})")

    @classmethod
    def from_array(cls, v, a: float = 1.0) -> "CalogeroPoint":
        return cls(*(float(t) for t in v), a=a)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.px, self.py, self.pz])


class CalogeroModel:
    """Expression-backed integrals and operators for a fixed coupling ``a``."""

    def __init__(self, a: float = 1.0):
        self.a = float(a)
        self.params = {"a": self.a}
        self.expressions: dict[str, Expression] = {
            k: parse_expression(_src(v), 3, self.params) for k, v in OBSERVABLES.items()
        }
        self.observables = {k: ScalarField.from_expression(e, name=k) for k, e in self.expressions.items()}
        self.operators = {
            k: OperatorField.from_expressions([[_src(e) for e in row] for row in m], 3, self.params, name=k)
            for k, m in OPERATORS.items()
        }
        self.omega = SymplecticForm(3)

    def __repr__(self):
        return f"CalogeroModel(a={self.a})"

    def structure(self, web: str) -> HaantjesStructure:
        K = self.operators[WEB_OPERATOR[web]]
        return HaantjesStructure(self.omega, [OperatorField.identity(6, "I"), self.operators["K1"], K], ["I", "K1", K.name])

    def chain(self, web: str) -> ChainSpec:
        h = WEB_INTEGRAL[web]
        return ChainSpec([self.observables["H"], self.observables["H2"], self.observables[h]], ["H1", "H2", h])

    def sample(self, rng: np.random.Generator, count: int, box: float = BOX, margin: float = MARGIN) -> list[np.ndarray]:
        return sample_box(rng, -box, box, 6, count, separated(3, margin))


def _point(pt) -> tuple[np.ndarray, float]:
    if isinstance(pt, CalogeroPoint):
        return pt.as_array(), pt.a
    x = np.asarray(pt, dtype=float)
    if min_pair_gap(x[:3]) == 0.0:
        raise CollisionError(f"particles collide at {x[:3].tolist()}")
    return x, 1.0


_MODELS: dict[float, CalogeroModel] = {}


def model(a: float = 1.0) -> CalogeroModel:
    a = float(a)
    if a not in _MODELS:
        _MODELS[a] = CalogeroModel(a)
    return _MODELS[a]


def observable(name: str, pt) -> float:
    x, a = _point(pt)
    if name not in OBSERVABLES:
        raise KeyError(f"unknown Calogero observable {name!r}")
    return model(a).expressions[name].evaluate(x)


def operator(name: str, pt) -> np.ndarray:
    x, a = _point(pt)
    if name not in OPERATORS:
        raise KeyError(f"unknown Calogero operator {name!r}")
    return model(a).operators[name](x)


def verify_calogero_chains(samples: Sequence, tol: float, a: float = 1.0, rng: np.random.Generator | None = None) -> VerificationReport:
    """Chain residuals, Haantjes residuals and the axioms of the three web structures."""
    m = model(a)
    report = VerificationReport(title=f"Jacobi-Calogero chains (a={m.a})")
    ns = len(samples)
    H = m.observables["H"]
    worst = {k: 0.0 for k in OPERATORS}
    haan = {k: 0.0 for k in OPERATORS}
    for x in samples:
        dH = differential(H, x)
        scale = float(np.max(np.abs(dH)))
        for k, K in m.operators.items():
            jet = K.jet(x)
            r = differential(m.observables[CHAIN_OF[k]], x) - jet.value.T @ dH
            worst[k] = max(worst[k], float(np.max(np.abs(r))) / scale)
            haan[k] = max(haan[k], haantjes_residual(jet))
    for k in OPERATORS:
        report.add(Check(f"chain.{CHAIN_OF[k]}", ns, worst[k], tol, notes=f"d{CHAIN_OF[k]} = {k}^T dH"))
        report.add(Check(f"haantjes.{k}", ns, haan[k], tol))
    rng = rng if rng is not None else np.random.default_rng(0)
    for web in WEBS:
        sub = verify_structure(m.structure(web), samples, tol, rng=rng, prefix=f"{web}.")
        report.extend(c for c in sub if ".haantjes." not in c.id)
    return report


def gradient_family(m: CalogeroModel, x, names: Sequence[str]) -> np.ndarray:
    return np.array([differential(m.observables[k], x) for k in names])


FULL_FAMILY = ("H", "H2", "Hcyl", "Hsph", "Hpar")
SUBFAMILIES = (("H", "H2", "Hcyl", "Hsph"), ("H", "H2", "Hcyl", "Hpar"), ("H", "H2", "Hsph", "Hpar"))


def _relative_singular_values(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        return np.zeros(rows.shape[0])
    s = np.linalg.svd(rows / norms[:, None], compute_uv=False)
    return s / s[0]


def independence_report(samples: Sequence, tol: float = 1e-9, a: float = 1.0, flag: float = 1e-6) -> VerificationReport:
    """Ranks of the five chain integrals (expected 4) and of the three quoted 4-subfamilies (expected 4).

    A sample is flagged as near-degenerate, and excluded from the pass
    decision, when some 4-subfamily has a relative singular value below ``flag``.
    """
    m = model(a)
    report = VerificationReport(title="independence")
    flagged = []
    fifth = 0.0
    deficient = [0] * len(SUBFAMILIES)
    full_deficient = 0
    fourth_min = np.inf
    for idx, x in enumerate(samples):
        rows = gradient_family(m, x, FULL_FAMILY)
        sub_sv = [_relative_singular_values(rows[[FULL_FAMILY.index(k) for k in fam]]) for fam in SUBFAMILIES]
        if min(s[3] for s in sub_sv) < flag:
            flagged.append(idx)
            continue
        for i, s in enumerate(sub_sv):
            fourth_min = min(fourth_min, float(s[3]))
            deficient[i] += int(numerical_rank(rows[[FULL_FAMILY.index(k) for k in SUBFAMILIES[i]]], tol) != 4)
        s5 = _relative_singular_values(rows)
        fifth = max(fifth, float(s5[4]))
        full_deficient += int(numerical_rank(rows, tol) != 4)
    used = len(samples) - len(flagged)
    note = f"{len(flagged)} near-degenerate samples excluded" if flagged else ""
    report.add(Check("rank.full", used, fifth, tol, notes="relative 5th singular value of dH1..dHpar"))
    report.add(Check("rank.full.count", used, float(full_deficient), 0.0,
                     notes=(note or "samples with rank != 4")))
    for fam, bad in zip(SUBFAMILIES, deficient):
        report.add(Check("rank." + "_".join(fam[1:]), used, float(bad), 0.0,
                         notes=f"samples with rank != 4; min relative 4th singular value {fourth_min:.2e}"))
    report.flagged = flagged
    return report


def h3_involution(samples: Sequence, tol: float, a: float = 1.0, assert_h2: bool = True) -> VerificationReport:
    """{H3, H1} and {H3, H2}; {H3, Hsph} and the four-term reading are informational.

    {H3, H2} is not an identity (it is a nonzero rational function for a != 0);
    ``assert_h2=False`` reports it without letting it decide the outcome.
    """
    m = model(a)
    pairs = [
        ("H3", "H", True), ("H3", "H2", assert_h2), ("H3", "Hsph", False),
        ("H3_literal", "H", False), ("H3_literal", "H2", False),
    ]
    worst = {p: 0.0 for p in pairs}
    for x in samples:
        grads = {k: differential(m.observables[k], x) for k in ("H3", "H3_literal", "H", "H2", "Hsph")}
        for p in pairs:
            worst[p] = max(worst[p], relative_bracket(grads[p[0]], grads[p[1]]))
    report = VerificationReport(title="cubic integral")
    for (f, g, asserted), r in zip(pairs, worst.values()):
        report.add(Check(f"involution.{f}.{'H1' if g == 'H' else g}", len(samples), r, tol, asserted=asserted))
    return report


def involution_report(samples: Sequence, tol: float, a: float = 1.0, momentum_tol: float = 1e-10) -> VerificationReport:
    """Within-chain brackets (asserted), cross-web brackets (informational), total momentum (asserted)."""
    m = model(a)
    names = ("H", "H2", "Hcyl", "Hsph", "Hpar", "P")
    label = {"H": "H1"}
    within = {("H", "H2")} | {(f, WEB_INTEGRAL[w]) for w in WEBS for f in ("H", "H2")}
    cross = set(itertools.combinations(("Hcyl", "Hsph", "Hpar"), 2))
    pairs = sorted(within | cross) + [("P", "H")]
    worst = dict.fromkeys(pairs, 0.0)
    for x in samples:
        grads = {k: differential(m.observables[k], x) for k in names}
        for p in pairs:
            worst[p] = max(worst[p], relative_bracket(grads[p[0]], grads[p[1]]))
    report = VerificationReport(title="involution")
    for (f, g), r in worst.items():
        cid = f"involution.{label.get(f, f)}.{label.get(g, g)}"
        if (f, g) == ("P", "H"):
            report.add(Check("momentum.P.H1", len(samples), r, momentum_tol, notes="total linear momentum"))
        else:
            report.add(Check(cid, len(samples), r, tol, asserted=(f, g) in within,
                             notes="" if (f, g) in within else "cross-web, not claimed"))
    return report


def projected_field(name: str, a: float = 1.0, samples: Sequence | None = None) -> OperatorField:
    m = model(a)
    K = m.operators[PROJECTED[name]]
    probe = samples if samples is not None else [np.array([0.3, -0.8, 1.1, 0.5, -0.2, 0.9])]
    field = project_to_configuration(K, probe)
    field.name = name
    return field


def projected_killing(name: str, samples: Sequence, tol: float = 1e-9, a: float = 1.0) -> Check:
    """Killing residual of a projected A-block w.r.t. the Euclidean metric (A raised with G = I is A)."""
    phase = [np.concatenate([np.asarray(x, dtype=float)[:3], np.asarray(x, dtype=float)[3:6] if len(x) == 6 else np.zeros(3)])
             for x in samples]
    A = projected_field(name, a, phase[:5])
    return killing_check(A, DiagonalMetric.euclidean(3), [x[:3] for x in phase], tol, check_id=f"killing.{name}")
