"""Handler functions for each ``lmech`` subcommand.

Every handler prints a plain-text summary, writes its artifacts under the run's
output directory and returns the process exit code.
"""

import logging
from argparse import Namespace
from pathlib import Path
from typing import Any

import numpy as np

from leontief_mech.config import RunConfig
from leontief_mech.curves import ThresholdCurve
from leontief_mech.dist import Distribution, IndependentProductDistribution, validate
from leontief_mech.generators import random_mechanisms
from leontief_mech.mech import (
    GRID_CSV_HEADER,
    GridMechanism,
    Mechanism,
    Mesh,
    PostedPrice,
    RawGridMechanism,
    ThresholdPriceMechanism,
    load_mechanism,
)
from leontief_mech.report_formatter import ReportFormatter
from leontief_mech.solve import certify, choose_optimal, posted_price_search, solve_condition_b, solve_posted_price
from leontief_mech.verify import (
    REPORT_CSV_HEADER,
    check_characterization,
    check_ic_direct,
    check_ir,
    compare_checks,
    expected_revenue,
    virtual_surplus,
)
from leontief_mech.virtual import (
    ZERO_CURVE_NAME,
    check_condition_a,
    check_condition_b,
    check_condition_b_prime,
    check_regularity,
    condition_k_grid,
    zero_curve,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
# Share of random mechanisms on which the two IC checks must agree
AGREEMENT_THRESHOLD = 0.99


def display_result(title: str, lines: list[str]) -> None:
    """Print a titled block of result lines."""
    print("\n".join(["", *ReportFormatter.title(title), *lines]))


def _out(config: RunConfig, name: str) -> Path:
    return Path(config.out_dir) / name


def _saved(path: Path) -> None:
    print(f"Saved: {path}")


def _write_curve(curve: ThresholdCurve, path: Path, column: str) -> None:
    _saved(ReportFormatter.write_csv(path, ["k", column], curve.to_rows()))


def _mechanism_curve(m: Mechanism, d: Distribution) -> ThresholdCurve | None:
    if not isinstance(m, ThresholdPriceMechanism):
        return None
    k = condition_k_grid(d)
    return ThresholdCurve(k, m.price(k), name="psi")


def handle_validate(args: Namespace, config: RunConfig, d: Distribution) -> int:
    report = validate(d)
    display_result("Distribution validation", ReportFormatter.validation_lines(report))
    _saved(ReportFormatter.write_json(_out(config, "validation.json"), report.to_dict()))
    return EXIT_OK if report.passed else EXIT_FAILED


def handle_conditions(args: Namespace, config: RunConfig, d: Distribution) -> int:
    """Condition A, then B and B' on the zero curve, plus the informational regularity check."""
    verdict_a = check_condition_a(d)
    verdicts = [verdict_a]
    payload: dict[str, Any] = {"family": d.family, "A": verdict_a.to_dict()}
    if verdict_a.holds:
        curve = zero_curve(d)
        verdict_b = check_condition_b(d, curve, verdict_a)
        verdict_b_prime = check_condition_b_prime(d, curve, verdict_a)
        verdicts += [verdict_b, verdict_b_prime]
        payload |= {"B": verdict_b.to_dict(), "Bprime": verdict_b_prime.to_dict()}
        _write_curve(curve, _out(config, "zero_curve.csv"), ZERO_CURVE_NAME)
    else:
        print("Condition A fails; B and B' are not evaluated")
    regularity = check_regularity(d)
    verdicts.append(regularity)
    payload["Regularity"] = regularity.to_dict()

    display_result(f"Conditions for {d.family}", ReportFormatter.verdict_lines(verdicts))
    _saved(ReportFormatter.write_json(_out(config, "conditions.json"), payload))
    solvable = verdict_a.holds and any(v.holds for v in verdicts[1:3])
    return EXIT_OK if solvable or isinstance(d, IndependentProductDistribution) else EXIT_FAILED


def handle_solve(args: Namespace, config: RunConfig, d: Distribution) -> int:
    choice = choose_optimal(d)
    m = choice.mechanism
    revenue = expected_revenue(m, d)
    summary: dict[str, Any] = {"family": d.family, "path": choice.path, "kind": m.kind, "expected_revenue": revenue}
    if isinstance(m, ThresholdPriceMechanism):
        prices = m.price(condition_k_grid(d))
        summary |= {"price_min": float(prices.min()), "price_max": float(prices.max())}
    extra: dict[str, Any] = {}
    if isinstance(m, PostedPrice):
        extra["near_optimal"] = list(posted_price_search(d).near_optimal)
        summary["near_optimal"] = ", ".join(ReportFormatter.number(rho) for rho in extra["near_optimal"])
    display_result(f"Optimal mechanism for {d.family}", ReportFormatter.key_value_lines(summary))

    _saved(ReportFormatter.write_json(_out(config, "mechanism.json"), m.to_dict()))
    verdicts = [v.to_dict() for v in choice.verdicts]
    _saved(ReportFormatter.write_json(_out(config, "solve.json"), summary | extra | {"verdicts": verdicts}))
    curve = _mechanism_curve(m, d)
    if curve is not None:
        _write_curve(curve, _out(config, "psi.csv"), "psi")
    if isinstance(m, ThresholdPriceMechanism):
        grid = m.to_grid(Mesh.regular(config.verify_grid, d.k_floor))
        _saved(ReportFormatter.write_csv(_out(config, "mechanism_grid.csv"), GRID_CSV_HEADER, grid.grid_rows()))
    return EXIT_OK


def _verify_random(config: RunConfig, count: int) -> int:
    """Equivalence self-test on seeded valid and perturbed ratio-dependent mechanisms."""
    rng = np.random.default_rng(config.seed)
    mesh = Mesh.regular(config.verify_grid, config.numerics.k_floor)
    rows: list[dict[str, Any]] = []
    for label, perturbed in (("valid", False), ("perturbed", True)):
        agree = passed = 0
        for m in random_mechanisms(rng, mesh.k, count, perturbed=perturbed):
            result = compare_checks(m, mesh, config=config.numerics)
            agree += result.agree
            passed += result.direct.passed
        rows.append({"set": label, "count": count, "agreements": agree, "direct_passes": passed})

    total = sum(row["agreements"] for row in rows) / (2 * count)
    display_result(
        "Random equivalence self-test",
        [
            f"{row['set']:<10} {row['agreements']}/{row['count']} agree, {row['direct_passes']} pass direct IC"
            for row in rows
        ]
        + [f"agreement {ReportFormatter.number(total)} (seed {config.seed}, mesh {config.verify_grid}x{config.verify_grid})"],
    )
    payload = {"seed": config.seed, "sets": rows, "agreement": total}
    _saved(ReportFormatter.write_json(_out(config, "random_verify.json"), payload))
    return EXIT_OK if total >= AGREEMENT_THRESHOLD else EXIT_FAILED


def handle_verify(args: Namespace, config: RunConfig, d: Distribution) -> int:
    if args.random is not None:
        return _verify_random(config, args.random or config.random_count)

    m = load_mechanism(Path(args.mechanism))
    mesh = m.default_mesh(config.verify_grid, config.numerics.k_floor)
    report = check_ic_direct(m, mesh, config=config.numerics).merged(check_ir(m, mesh, config=config.numerics))
    display_result("Direct IC and IR", ReportFormatter.verification_lines(report))
    reports = [report]
    if not isinstance(m, RawGridMechanism):
        characterization = check_characterization(m, mesh, config=config.numerics)
        display_result("Characterization", ReportFormatter.verification_lines(characterization))
        reports.append(characterization)

    rows = [row for r in reports for row in ReportFormatter.verification_rows(r)]
    _saved(ReportFormatter.write_csv(_out(config, "report.csv"), REPORT_CSV_HEADER, rows))
    _saved(ReportFormatter.write_json(_out(config, "verify.json"), {"reports": [r.to_dict() for r in reports]}))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def handle_revenue(args: Namespace, config: RunConfig, d: Distribution) -> int:
    m = load_mechanism(Path(args.mechanism)) if args.mechanism else choose_optimal(d).mechanism
    if isinstance(m, (GridMechanism, RawGridMechanism)):
        logger.info("Integrating a %dx%d grid mechanism", len(m.k_nodes), len(m.v_nodes))
    revenue = expected_revenue(m, d)
    surplus = virtual_surplus(m, d)
    values = {
        "family": d.family,
        "kind": m.kind,
        "expected_revenue": revenue,
        "virtual_surplus": surplus,
        "difference": revenue - surplus,
    }
    display_result("Revenue", ReportFormatter.key_value_lines(values))
    _saved(ReportFormatter.write_json(_out(config, "revenue.json"), values))
    return EXIT_OK


def handle_certify(args: Namespace, config: RunConfig, d: Distribution) -> int:
    certificate = certify(d, config.oracle_k_nodes, config.oracle_rho_nodes)
    values = {
        "path": certificate.path,
        "candidate_revenue": certificate.candidate_revenue,
        "pointwise_bound": certificate.pointwise_bound,
        "oracle_best": certificate.oracle.revenue,
        "bound_minus_candidate": certificate.bound_gap,
        "candidate_minus_oracle": certificate.oracle_gap,
        "passed": certificate.passed,
    }
    display_result(f"Optimality certificate for {d.family}", ReportFormatter.key_value_lines(values))
    _saved(ReportFormatter.write_json(_out(config, "certificate.json"), certificate.to_dict()))
    return EXIT_OK if certificate.passed else EXIT_FAILED


def handle_sweep(args: Namespace, config: RunConfig, d: Distribution) -> int:
    """Zero curve and the optimal price curve, for plotting."""
    curve = zero_curve(d)
    _write_curve(curve, _out(config, "zero_curve.csv"), ZERO_CURVE_NAME)
    verdict_a = check_condition_a(d)
    price_curve: ThresholdCurve | None = None
    if verdict_a.holds and check_condition_b(d, curve, verdict_a).holds:
        price_curve = solve_condition_b(d).psi
    elif isinstance(d, IndependentProductDistribution) or (
        verdict_a.holds and check_condition_b_prime(d, curve, verdict_a).holds
    ):
        price_curve = ThresholdCurve.constant(solve_posted_price(d).rho_star, curve.k, name="psi")
    if price_curve is not None:
        _write_curve(price_curve, _out(config, "psi.csv"), "psi")

    lines = [
        f"{'k':>20} {ZERO_CURVE_NAME:>20} {'psi':>20}",
        *(
            f"{ReportFormatter.number(k):>20} {ReportFormatter.number(z):>20} "
            f"{ReportFormatter.number(float(price_curve(k))) if price_curve is not None else '':>20}"
            for k, z in zip(curve.k[::10], curve.values[::10], strict=True)
        ),
    ]
    display_result(f"Threshold curves for {d.family}", lines)
    return EXIT_OK


HANDLERS = {
    "validate": handle_validate,
    "conditions": handle_conditions,
    "solve": handle_solve,
    "verify": handle_verify,
    "revenue": handle_revenue,
    "certify": handle_certify,
    "sweep": handle_sweep,
}
