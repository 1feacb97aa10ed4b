"""
Glassbox — Command Line
Sub-commands: anonymize, attack, evaluate, verify, demo, synth.

Usage:
    glassbox anonymize --input data/samples/t5.csv --schema data/samples/hospital.schema --algo tailor --l 2 --output t6.csv
    glassbox attack --published data/samples/t2_star.csv --external data/samples/e1.csv --schema data/samples/hospital.schema --algo optgen --l 2
    glassbox demo example2

Exit codes: 0 ok, 1 io/config, 2 infeasible, 3 breach found, 4 limits, 5 demo mismatch.
"""

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

from config.settings import settings
from src.anonymization.adversary import (
    ProbabilityMode,
    credibility,
    disclosure_risk,
    enumerate_possible_instances,
    risk_report,
    verify_transparency,
)
from src.anonymization.ace import assign_skeleton, ace_distribution, enumerate_assign_executions
from src.anonymization.baselines import mask_consistency_attack, opt_gen_partition
from src.anonymization.dataio import (
    load_external,
    load_published,
    load_schema_config,
    load_table,
    synthesize,
    synthetic_schema,
    write_published,
    write_schema_config,
    write_table,
)
from src.anonymization.errors import (
    EnumerationLimitError,
    GlassboxError,
    InconsistentPublicationError,
    InfeasibleError,
    SchemaError,
)
from src.anonymization.fixtures import load_fixtures
from src.anonymization.hybrid import hybrid_partition
from src.anonymization.recoding import AnonymizationFunction, discernability
from src.anonymization.registry import Algorithm, AlgorithmSpec, run
from src.anonymization.reports import ReportDocument, RunMetadata
from src.anonymization.tailor import tailor, tailor_partition
from src.anonymization.utility import generate_workload, workload_error

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_INFEASIBLE = 2
EXIT_BREACH = 3
EXIT_LIMITS = 4
EXIT_MISMATCH = 5


# ─── Shared Helpers ───

def _protected(text: Optional[str]) -> frozenset[str]:
    return frozenset(v.strip() for v in (text or "").split(",") if v.strip())


def _spec(args) -> AlgorithmSpec:
    return AlgorithmSpec(
        Algorithm(args.algo),
        args.l,
        AnonymizationFunction(getattr(args, "format", AnonymizationFunction.MBR.value)),
        k=args.k,
        protected=_protected(args.V),
    )


def _mode(args) -> ProbabilityMode:
    return ProbabilityMode.exact() if args.mode == "exact" else ProbabilityMode.monte_carlo(args.trials)


def _metadata(command: str, args, spec: Optional[AlgorithmSpec] = None) -> RunMetadata:
    return RunMetadata(
        command=command,
        algorithm=spec.describe() if spec else None,
        l=spec.l if spec else None,
        seed=getattr(args, "seed", None),
        mode=getattr(args, "mode", None),
        trials=args.trials if getattr(args, "mode", None) == "mc" else None,
        limits={
            "instance_limit": settings.instance_limit,
            "instance_count_limit": settings.instance_count_limit,
            "partition_limit": settings.partition_limit,
            "assign_support_limit": settings.assign_support_limit,
        },
    )


def _emit(doc: ReportDocument, path: Optional[str]) -> None:
    text = doc.render()
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
        logger.info(f"Report saved to {path}")
    else:
        print(text)


def _add_algorithm_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--algo", required=required, choices=[a.value for a in Algorithm], help="Anonymization algorithm")
    p.add_argument("--l", type=int, default=settings.default_l, help="Diversity parameter")
    p.add_argument("--k", type=int, default=None, help="Mask: group size of the k-anonymous partition (default l)")
    p.add_argument("--V", type=str, default=None, help="Mask: comma-separated protected values")


def _add_mode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["exact", "mc"], default="exact", help="Probability mode")
    p.add_argument("--trials", type=int, default=settings.mc_trials, help="Monte Carlo trials")


# ─── Commands ───

def cmd_anonymize(args) -> int:
    table = load_table(args.input, args.schema)
    spec = _spec(args)
    published = run(spec, table, args.seed)
    if published is None:
        logger.error(f"{spec.describe()} produced no output: table is not {spec.l}-eligible")
        return EXIT_INFEASIBLE
    for path in write_published(published, args.output, table.schema):
        logger.info(f"Wrote {path}")
    return EXIT_OK


def cmd_attack(args) -> int:
    if not args.algo:
        logger.error("attack needs --algo: the adversary is assumed to know the algorithm")
        return EXIT_IO
    config = load_schema_config(args.schema)
    published = load_published(args.published)
    external = load_external(args.external, config, universe=sorted(published.sensitive_counts))
    spec = _spec(args)
    mode = _mode(args)
    who = [args.individual] if args.individual else None
    report = risk_report(spec, published, external, mode, individuals=who, seed=args.seed, progress=args.progress)
    doc = ReportDocument.from_risk_report(report, _metadata("attack", args, spec))
    _emit(doc, args.report)
    return EXIT_OK if report.passed else EXIT_BREACH


def cmd_evaluate(args) -> int:
    table = load_table(args.micro, args.schema)
    published = load_published(args.published, table.schema)
    workload = generate_workload(table.schema, args.qd, args.sel, args.queries, args.seed)
    delta = args.delta_pct / 100 * len(table)
    result = workload_error(table, published, workload, delta)
    doc = ReportDocument.from_eval_result(result, workload, _metadata("evaluate", args))
    _emit(doc, args.report)
    return EXIT_OK


def cmd_verify(args) -> int:
    table = load_table(args.input, args.schema)
    external = load_external(args.external, args.schema) if args.external else None
    spec = _spec(args)
    seeds = range(args.seed, args.seed + args.seeds)
    report = verify_transparency(spec, table, external, _mode(args), seeds)
    doc = ReportDocument.from_transparency(report, _metadata("verify", args, spec))
    _emit(doc, args.report)
    return EXIT_OK if report.passed else EXIT_BREACH


def cmd_synth(args) -> int:
    schema = synthetic_schema()
    table = synthesize(args.n, schema, args.rho, args.seed)
    write_table(table, args.output)
    schema_path = args.schema_out or str(Path(args.output).with_suffix(".schema"))
    write_schema_config(schema, schema_path)
    logger.info(f"Wrote {args.output} and {schema_path}")
    return EXIT_OK


# ─── Demos ───

Check = tuple[str, object, object]


def _demo_example2() -> list[Check]:
    fx = load_fixtures()
    spec = AlgorithmSpec(Algorithm.OPTGEN, 2)
    out = run(spec, fx.t1)
    flu_ed = fx.t1.with_sensitive({"Ed": "flu"})
    ed = disclosure_risk("Ed", fx.t2_star, fx.e1, spec)
    bruce = disclosure_risk("Bruce", fx.t2_star, fx.e1, spec)
    instances = list(enumerate_possible_instances(fx.e1, fx.t2_star))
    return [
        ("opt_gen(T1, 2) == T2*", out == fx.t2_star, True),
        ("discernability of opt_gen(T1, 2)", discernability(opt_gen_partition(fx.t1, 2)), 24),
        ("discernability with Ed = flu", discernability(opt_gen_partition(flu_ed, 2)), 22),
        ("possible instances of T2*", len(instances), 96),
        ("instances containing Bruce", sum("Bruce" in i.by_id for i in instances), 0),
        ("risk(Ed)", ed.risk, Fraction(1)),
        ("witness(Ed)", ed.witness, "gastritis"),
        ("risk(Bruce)", bruce.risk, Fraction(0)),
    ]


def _demo_example3() -> list[Check]:
    fx = load_fixtures()
    ed = credibility("Ed", fx.t2_star, fx.e1, 2)
    return [
        ("|S+|", ed.support_size, 96),
        ("cred(Ed)", ed.credibility, Fraction(1, 4)),
        ("cred(Ann)", credibility("Ann", fx.t2_star, fx.e1, 2).credibility, Fraction(1, 2)),
        ("cred(Fred)", credibility("Fred", fx.t2_star, fx.e1, 2).credibility, Fraction(1, 4)),
    ]


def _demo_example4() -> list[Check]:
    fx = load_fixtures()
    return [
        ("tailor(T5, 2) == T6*", tailor(fx.t5, 2)[1] == fx.t6_star, True),
        ("tailor(T3, 2) == T6*", tailor(fx.t3, 2)[1] == fx.t6_star, True),
    ]


def _demo_example6() -> list[Check]:
    fx = load_fixtures()
    skeleton = assign_skeleton(fx.t5.sensitive_counts, 2)
    steps = [(s.alpha, s.beta, s.signature) for s in skeleton]
    executions = list(enumerate_assign_executions(fx.t5, 2))
    dist = ace_distribution(fx.t5, 2)
    return [
        ("Assign skeleton", steps, [
            (2, 2, ("dyspepsia", "flu")),
            (1, 2, ("gastritis", "bronchitis")),
            (1, 2, ("diabetes", "gastritis")),
        ]),
        ("Assign executions", len(executions), 2),
        ("distinct Ace outputs", len(dist), 1),
        ("Pr{Ace(T5, 2) = T7*}", dist.get(fx.t7_star, Fraction(0)), Fraction(1)),
    ]


def _demo_hybrid_split() -> list[Check]:
    fx = load_fixtures()
    coarse = tailor_partition(fx.t5, 2)
    fine = hybrid_partition(fx.t5, 2, seed=0)
    refines = all(any(g.ids <= c.ids for c in coarse.groups) for g in fine.groups)
    return [
        ("Tailor group sizes", sorted(coarse.sizes), [2, 2, 4]),
        ("Hybrid group sizes", sorted(fine.sizes), [2, 2, 2, 2]),
        ("Hybrid refines Tailor", refines, True),
    ]


def _demo_mask_appendix() -> list[Check]:
    fx = load_fixtures()
    result = mask_consistency_attack(fx.t10_star, fx.t9.project(), 2, 2, {"dyspepsia"})
    return [
        ("consistent instances", result.instance_count, 8),
        ("posterior(Ann, dyspepsia)", result.posterior("Ann", "dyspepsia"), Fraction(5, 8)),
    ]


DEMOS: dict[str, Callable[[], list[Check]]] = {
    "example2": _demo_example2,
    "example3": _demo_example3,
    "example4": _demo_example4,
    "example6": _demo_example6,
    "hybrid-split": _demo_hybrid_split,
    "mask-appendix": _demo_mask_appendix,
}


def cmd_demo(args) -> int:
    checks = DEMOS[args.name]()
    ok = True
    print(f"Demo {args.name}")
    print("=" * 50)
    for label, computed, expected in checks:
        match = computed == expected
        ok &= match
        print(f"{'OK ' if match else 'BAD'} {label}: computed {computed}, expected {expected}")
    print("=" * 50)
    return EXIT_OK if ok else EXIT_MISMATCH


# ─── Entry Point ───

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glassbox", description="Transparent l-diversity anonymization toolkit")
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("anonymize", help="Anonymize a microdata CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    _add_algorithm_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=[f.value for f in AnonymizationFunction], default=AnonymizationFunction.MBR.value)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_anonymize)

    p = sub.add_parser("attack", help="Reverse-engineering attack on a published table")
    p.add_argument("--published", required=True)
    p.add_argument("--external", required=True)
    p.add_argument("--schema", required=True)
    _add_algorithm_flags(p, required=False)
    _add_mode_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--individual", default=None)
    p.add_argument("--report", default=None, help="Write the report here instead of stdout")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("evaluate", help="Count-query workload error of a publication")
    p.add_argument("--micro", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--published", required=True)
    p.add_argument("--qd", type=int, default=settings.default_qd)
    p.add_argument("--sel", type=float, default=settings.default_selectivity)
    p.add_argument("--queries", type=int, default=settings.default_queries)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta-pct", type=float, default=settings.default_delta_pct)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="Attack every output an algorithm can produce on a table")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--external", default=None)
    _add_algorithm_flags(p)
    _add_mode_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=10, help="Seeds sampled in Monte Carlo mode")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("demo", help="Re-run a worked example and compare with its expected values")
    p.add_argument("name", choices=sorted(DEMOS))
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("synth", help="Write a synthetic microdata CSV and its schema config")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--schema-out", default=None)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s | %(name)-25s | %(levelname)-7s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    try:
        return args.func(args)
    except EnumerationLimitError as e:
        logger.error(str(e))
        return EXIT_LIMITS
    except InfeasibleError as e:
        logger.error(str(e))
        return EXIT_INFEASIBLE
    except (OSError, SchemaError, InconsistentPublicationError, ValueError) as e:
        logger.error(str(e))
        return EXIT_IO
    except GlassboxError as e:
        logger.error(str(e))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
