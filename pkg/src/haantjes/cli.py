"""``verify`` command: load a model, run a verification suite, print a report."""

from __future__ import annotations

import argparse
import itertools
import sys
from typing import Sequence

import numpy as np

from .errors import HaantjesError
from .models import ModelSpec, resolve_model
from .report import Check, VerificationReport, emit_report

SUITES = ("structure", "chains", "involution", "killing", "independence", "all")
KILLING_TOL = 1e-9
MOMENTUM_TOL = 1e-10


class UnsupportedSuiteError(HaantjesError, ValueError):
    pass


def _suites(suite: str) -> tuple[str, ...]:
    if suite not in SUITES:
        raise UnsupportedSuiteError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    return SUITES[:-1] if suite == "all" else (suite,)


def model_samples(model: ModelSpec, rng: np.random.Generator, count: int) -> list[np.ndarray]:
    from .sampling import min_pair_gap, sample_box

    n = model.n
    lo, hi = model.box
    if model.kind == "calogero":
        return model.system.sample(rng, count)
    if model.kind in ("goldfish", "qbh"):
        gen = model.system.qbh_system().generator if model.kind == "goldfish" else model.system.generator

        def accept(x):
            return min_pair_gap(gen.values(x[:n])) >= model.margin

        return sample_box(rng, lo, hi, 2 * n, count, accept)
    if model.kind == "stackel":
        from .stackel import well_conditioned

        return sample_box(rng, lo, hi, 2 * n, count, lambda x: well_conditioned(model.system.S, x[:n]))
    return sample_box(rng, lo, hi, 2 * n, count)


def _stackel_system(model: ModelSpec):
    from .qbh import build_qbh

    if model.kind == "goldfish":
        return build_qbh(model.system.qbh_system())
    if model.kind == "qbh":
        return build_qbh(model.system)
    return model.system


def _stackel_checks(model: ModelSpec, suite: str, samples, tol: float, rng) -> list[Check]:
    from .benenti import DiagonalMetric, involution_check, killing_check, raise_index
    from .fields import covector_rank, differential, separable_involution_terms
    from .stackel import hamiltonian_fields, projected_operator_fields, relative_bracket, stackel_chain, stackel_structure
    from .tensors import verify_lenard_chain, verify_structure

    sys_ = _stackel_system(model)
    n = model.n
    ns = len(samples)
    if suite == "structure":
        checks = list(verify_structure(stackel_structure(sys_), samples, tol, rng=rng))
        if model.kind in ("goldfish", "qbh"):
            from .qbh import qbh_operators

            qsys = model.system.qbh_system() if model.kind == "goldfish" else model.system
            res = max(qbh_operators(qsys, x).control_residual for x in samples)
            checks.append(Check("control", ns, res, tol, notes="K_(j-1) = e_j(N)"))
        return checks
    if suite == "chains":
        return verify_lenard_chain(stackel_structure(sys_), stackel_chain(sys_), samples, tol)
    if suite == "involution":
        Hs = hamiltonian_fields(sys_)
        pairs = list(itertools.combinations(range(n), 2))
        worst = dict.fromkeys(pairs, 0.0)
        sep = 0.0
        for x in samples:
            d = [differential(H, x) for H in Hs]
            for i, j in pairs:
                worst[(i, j)] = max(worst[(i, j)], relative_bracket(d[i], d[j]))
                scale = float(np.max(np.abs(d[i])) * np.max(np.abs(d[j]))) or 1.0
                sep = max(sep, float(np.max(np.abs(separable_involution_terms(Hs[i], Hs[j], x)))) / scale)
        checks = [Check(f"involution.H{i + 1}.H{j + 1}", ns, r, tol) for (i, j), r in worst.items()]
        checks.append(Check("involution.separable", ns, sep, tol, notes="per-coordinate terms"))
        if model.kind == "goldfish":
            from .qbh import jacobi_identity_residual

            res = max(jacobi_identity_residual(n, x[:n], relative=True) for x in samples)
            checks.append(Check("jacobi", ns, res, tol))
        return checks
    if suite == "killing":
        G = DiagonalMetric.from_stackel(sys_.S)
        qs = [x[:n] for x in samples]
        raised = [raise_index(K, G) for K in projected_operator_fields(sys_)]
        checks = [killing_check(K, G, qs, KILLING_TOL, check_id=f"killing.K{j}") for j, K in enumerate(raised)]
        for a, b in itertools.combinations(range(n), 2):
            checks.append(involution_check(raised[a], raised[b], qs, KILLING_TOL, check_id=f"schouten.K{a}.K{b}"))
        return checks
    if suite == "independence":
        Hs = hamiltonian_fields(sys_)
        bad = sum(int(covector_rank(Hs, x) != n) for x in samples)
        return [Check("rank.chain", ns, float(bad), 0.0, notes=f"samples with rank != {n}")]
    raise UnsupportedSuiteError(suite)


def _calogero_checks(model: ModelSpec, suites: Sequence[str], samples, tol: float, rng) -> list[Check]:
    from . import calogero as cal

    a = model.params["a"]
    checks: list[Check] = []
    if "structure" in suites or "chains" in suites:
        for c in cal.verify_calogero_chains(samples, tol, a, rng):
            is_chain = c.id.startswith("chain.")
            if ("chains" in suites and is_chain) or ("structure" in suites and not is_chain):
                checks.append(c)
    if "involution" in suites:
        checks.extend(cal.involution_report(samples, tol, a, MOMENTUM_TOL))
        checks.extend(cal.h3_involution(samples, tol, a, assert_h2=False))
    if "killing" in suites:
        checks.extend(cal.projected_killing(k, samples, KILLING_TOL, a) for k in cal.PROJECTED)
    if "independence" in suites:
        checks.extend(cal.independence_report(samples, a=a))
    return checks


def _operator_checks(model: ModelSpec, suite: str, samples, tol: float, rng) -> list[Check]:
    from .fields import SymplecticForm
    from .tensors import ChainSpec, HaantjesStructure, verify_haantjes_vanishing, verify_lenard_chain, verify_structure

    ops = list(model.operators.values())
    if suite == "structure":
        if len(ops) == model.n:
            return list(verify_structure(HaantjesStructure(SymplecticForm(model.n), ops), samples, tol, rng=rng))
        return [verify_haantjes_vanishing(K, samples, tol) for K in ops]
    if suite == "chains" and model.chain:
        s = HaantjesStructure(SymplecticForm(model.n), ops)
        return verify_lenard_chain(s, ChainSpec(model.chain), samples, tol)
    raise UnsupportedSuiteError(f"suite {suite!r} is not available for operator models" +
                                (" without chain entries" if suite == "chains" else ""))


def run_verification(model: ModelSpec, suite: str = "all", seed: int = 0, samples: int = 100, tol: float = 1e-8) -> VerificationReport:
    """Run the requested suite(s) on seeded samples; records are sorted by id."""
    suites = _suites(suite)
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    pts = model_samples(model, rng, samples)
    coeff_rng = np.random.default_rng([seed, 1])
    report = VerificationReport(title=f"model {model.name or model.kind} (n={model.n}), suite {suite}, seed {seed}")
    if model.kind == "calogero":
        report.extend(_calogero_checks(model, suites, pts, tol, coeff_rng))
    else:
        runner = _operator_checks if model.kind == "operators" else _stackel_checks
        for s in suites:
            if model.kind == "operators" and suite == "all" and s not in ("structure", "chains"):
                continue
            if model.kind == "operators" and suite == "all" and s == "chains" and not model.chain:
                continue
            report.extend(runner(model, s, pts, tol, coeff_rng))
    report.checks = report.sorted()
    return report


def _param(text: str) -> tuple[str, float]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"--param expects name=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--param value {v!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="verify", description="Verify Haantjes structures and Lenard-Haantjes chains numerically.")
    p.add_argument("model", help="model file path or builtin:ID (calogero3, goldfish, stackel_random)")
    p.add_argument("--suite", default="all", choices=SUITES)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--format", dest="fmt", default="text", choices=("text", "machine"))
    p.add_argument("--param", type=_param, action="append", default=[], metavar="NAME=VALUE")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        model = resolve_model(args.model, dict(args.param))
        report = run_verification(model, args.suite, args.seed, args.samples, args.tol)
    except (HaantjesError, ValueError, RuntimeError) as exc:
        print(f"verify: error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(emit_report(report, args.fmt))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
