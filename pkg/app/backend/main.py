"""
BSD Lab 명령행 인터페이스
결과 JSON 은 stdout, 사람이 읽는 요약과 로그는 stderr 로 출력합니다.

종료 코드: 0 성공/성립, 1 판정 실패, 2 입력 오류, 3 수치 실패
"""

import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import orjson
import pandas as pd
import yaml
from pydantic import ValidationError

from app.backend.core.config import settings
from app.backend.core.exceptions import BsdLabError, MalformedInputError
from app.backend.core.logging import get_logger, log_context, setup_logging
from app.backend.schemas.distributions import Interval
from app.backend.schemas.portfolio import ProblemFile
from app.backend.schemas.reports import CommandOutcome
from app.backend.services.dist_core import (
    infer_interval,
    lpm_at,
    make_distribution,
    make_interval,
    read_distribution_csv,
    read_scenario_csv,
    theta_lottery,
    write_distribution_csv,
)
from app.backend.services.dominance import check_bsd, check_lpm_at, check_sd
from app.backend.services.harness import (
    run_corollary_sweep,
    run_membership_sweep,
    run_theorem1_harness,
    write_jsonl,
)
from app.backend.services.polyseg import lpm_curve
from app.backend.services.portfolio_opt import make_problem, solve
from app.backend.services.utility_classes import check_AP, check_G, check_LP, check_U, parse_utility

logger = get_logger(__name__)

_MEMBERSHIP_CHECKS = {"U": check_U, "AP": check_AP, "LP": check_LP, "G": check_G}


# ----- 명령 -----


def cmd_lpm(args: argparse.Namespace) -> CommandOutcome:
    dist = read_distribution_csv(args.dist, _interval_flags(args))
    if args.curve:
        curve = lpm_curve(dist, args.n)
        return CommandOutcome(
            exit_code=0,
            stdout_json={"curve": curve.to_dict()},
            summary=f"📈 LPM_{args.n} curve with {curve.piece_count} pieces",
        )
    value = lpm_at(dist, args.n, args.c)
    return CommandOutcome(
        exit_code=0, stdout_json={"lpm": value}, summary=f"📉 LPM_{args.n},{args.c:g} = {value:.12g}"
    )


def cmd_check(args: argparse.Namespace) -> CommandOutcome:
    interval = _interval_flags(args)
    F = read_distribution_csv(args.F, interval)
    G = read_distribution_csv(args.G, interval)
    if interval is None:
        # 두 파일 원자를 모두 감싸는 공통 구간
        interval = infer_interval(F.atoms + G.atoms)
        F = make_distribution(F.atoms, F.probs, interval)
        G = make_distribution(G.atoms, G.probs, interval)
    if args.order == "bsd":
        verdict = check_bsd(F, G, args.exponent, interval, args.tolerance)
    elif args.order == "sd":
        verdict = check_sd(F, G, args.exponent, args.tolerance)
    else:
        if args.c is None:
            raise MalformedInputError("--order at requires --c")
        verdict = check_lpm_at(F, G, args.exponent, args.c, args.tolerance)

    if verdict.holds:
        summary = f"✅ {verdict.degree_label} holds (min margin {verdict.min_margin:.3g})"
    else:
        summary = f"❌ {verdict.degree_label} fails at c = {verdict.witness_c:.6g}"
    return CommandOutcome(
        exit_code=0 if verdict.holds else 1,
        stdout_json=verdict.model_dump(mode="json"),
        summary=summary,
    )


def cmd_utility(args: argparse.Namespace) -> CommandOutcome:
    u = parse_utility(args.descriptor, make_interval(args.a, args.b))
    check = _MEMBERSHIP_CHECKS[args.membership_class]
    report = check(u, args.n, args.grid_size, args.tolerance)
    mark = "✅ member of" if report.member else "❌ not in"
    return CommandOutcome(
        exit_code=0 if report.member else 1,
        stdout_json=report.model_dump(mode="json"),
        summary=(
            f"{mark} {args.membership_class}_{args.n} ({u.label}, worst slack "
            f"{report.worst_slack:.3g} at x = {report.worst_location:.6g})"
        ),
    )


def cmd_verify(args: argparse.Namespace) -> CommandOutcome:
    n_set = _int_list(args.n_set)
    harness = run_theorem1_harness(
        args.trials,
        n_set,
        atom_budget=args.atom_budget,
        seed=args.seed,
        force_identical=args.force_identical,
        utilities=args.utilities,
        gap_tolerance=args.tolerance,
        threads=args.threads,
    )
    membership = run_membership_sweep(args.sweep_samples, n_set, args.seed)
    corollary = run_corollary_sweep(args.sweep_samples, n_set, args.seed, args.atom_budget)

    report_path = write_jsonl(harness.records, args.out) if args.out else None
    counterexamples = (
        harness.counterexamples + membership.counterexamples + corollary.counterexamples
    )
    stdout_json = {
        "harness": harness.model_dump(mode="json", exclude={"records"}),
        "membership_sweep": membership.model_dump(mode="json"),
        "corollary_sweep": corollary.model_dump(mode="json"),
        "counterexamples": counterexamples,
        "report_path": str(report_path) if report_path else None,
    }
    mark = "✅" if counterexamples == 0 else "❌"
    return CommandOutcome(
        exit_code=0 if counterexamples == 0 else 1,
        report_path=str(report_path) if report_path else None,
        stdout_json=stdout_json,
        summary=(
            f"{mark} {len(harness.records)} trials, {membership.samples} membership samples, "
            f"{corollary.samples} corollary samples, {counterexamples} counterexamples"
        ),
    )


def cmd_portfolio(args: argparse.Namespace) -> CommandOutcome:
    path = Path(args.problem)
    if not path.is_file():
        raise MalformedInputError(f"problem file not found: {path}", path=str(path))
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
        problem_file = ProblemFile.model_validate(raw).resolve(path.parent)
    except yaml.YAMLError as e:
        raise MalformedInputError(f"cannot parse problem file: {e}", path=str(path)) from e
    except ValidationError as e:
        raise MalformedInputError(
            "invalid problem file", path=str(path), errors=[err["msg"] for err in e.errors()]
        ) from e

    interval = make_interval(problem_file.a, problem_file.b)
    problem = make_problem(
        read_scenario_csv(problem_file.scenarios_csv),
        read_distribution_csv(problem_file.benchmark_csv, interval),
        problem_file.n,
        interval,
        constraint_direction=problem_file.constraint_direction,
        tolerance=problem_file.tolerance,
        extra_thresholds=problem_file.extra_thresholds,
    )
    solution = solve(problem, args.max_iterations or problem_file.max_iterations)

    if args.weights_csv:
        pd.DataFrame({"asset": solution.asset_names, "weight": solution.weights}).to_csv(
            args.weights_csv, index=False, float_format="%.17g"
        )
    return CommandOutcome(
        exit_code=0,
        report_path=args.weights_csv,
        stdout_json=solution.model_dump(mode="json"),
        summary=(
            f"💼 E[return] = {solution.expected_return:.6g} after {solution.iterations} "
            f"iterations (max violation {solution.max_violation:.2e})"
        ),
    )


def cmd_lottery(args: argparse.Namespace) -> CommandOutcome:
    F, G = theta_lottery(args.theta, args.n, make_interval(args.a, args.b))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"F": out_dir / "F.csv", "G": out_dir / "G.csv"}
    write_distribution_csv(F, paths["F"])
    write_distribution_csv(G, paths["G"])
    return CommandOutcome(
        exit_code=0,
        report_path=str(out_dir),
        stdout_json={
            "F": str(paths["F"]),
            "G": str(paths["G"]),
            "mean_F": F.mean,
            "mean_G": G.mean,
        },
        summary=f"🎲 θ-lottery (θ={args.theta:g}, n={args.n}) written to {out_dir}",
    )


# ----- 파서 -----


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsd-lab",
        description="LPM certificates for bounded stochastic dominance",
    )
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    parser.add_argument("--log-format", choices=["json", "text"])
    parser.add_argument("--version", action="version", version=settings.app_version)
    commands = parser.add_subparsers(dest="command", required=True)

    lpm = commands.add_parser("lpm", help="LPM value or curve of a distribution")
    lpm.add_argument("dist")
    lpm.add_argument("--n", type=int, required=True)
    target = lpm.add_mutually_exclusive_group(required=True)
    target.add_argument("--c", type=float)
    target.add_argument("--curve", action="store_true")
    _add_interval_flags(lpm, required=False)
    lpm.set_defaults(handler=cmd_lpm)

    check = commands.add_parser("check", help="dominance verdict between two distributions")
    check.add_argument("F")
    check.add_argument("G")
    check.add_argument("--order", choices=["bsd", "sd", "at"], default="bsd")
    check.add_argument("--exponent", type=int, required=True)
    check.add_argument("--c", type=float)
    check.add_argument("--tolerance", type=float)
    _add_interval_flags(check, required=False)
    check.set_defaults(handler=cmd_check)

    utility = commands.add_parser("utility", help="utility class membership")
    utility.add_argument("descriptor", help="JSON/YAML descriptor or a path to one")
    utility.add_argument(
        "--class", dest="membership_class", choices=list(_MEMBERSHIP_CHECKS), required=True
    )
    utility.add_argument("--n", type=int, required=True)
    utility.add_argument("--grid-size", type=int)
    utility.add_argument("--tolerance", type=float)
    _add_interval_flags(utility, required=True)
    utility.set_defaults(handler=cmd_utility)

    verify = commands.add_parser("verify", help="characterization harness and sweeps")
    verify.add_argument("--trials", type=int, default=100)
    verify.add_argument("--n-set", default="1,2,3")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--atom-budget", type=int, default=8)
    verify.add_argument("--utilities", type=int)
    verify.add_argument("--sweep-samples", type=int, default=50)
    verify.add_argument("--force-identical", action="store_true")
    verify.add_argument("--tolerance", type=float, help="expected-utility gap tolerance")
    verify.add_argument("--threads", type=int)
    verify.add_argument("--out", help="JSONL path for per-trial records")
    verify.set_defaults(handler=cmd_verify)

    portfolio = commands.add_parser("portfolio", help="LPM-constrained portfolio")
    portfolio.add_argument("problem", help="JSON/YAML problem file")
    portfolio.add_argument("--max-iterations", type=int)
    portfolio.add_argument("--weights-csv")
    portfolio.set_defaults(handler=cmd_portfolio)

    lottery = commands.add_parser("lottery", help="write the θ-lottery pair as CSV files")
    lottery.add_argument("--theta", type=float, required=True)
    lottery.add_argument("--n", type=int, required=True)
    lottery.add_argument("--out-dir", required=True)
    _add_interval_flags(lottery, required=False, default=(0.0, 1.0))
    lottery.set_defaults(handler=cmd_lottery)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help / --version 는 0, 사용법 오류는 2
        return int(e.code or 0)

    if args.log_level or args.log_format:
        setup_logging(args.log_level, args.log_format)

    handler: Callable[[argparse.Namespace], CommandOutcome] = args.handler
    try:
        outcome = handler(args)
    except BsdLabError as e:
        logger.error(
            "Command failed", extra=log_context(command=args.command, error=e.error, **e.details)
        )
        _emit(e.to_response().model_dump(mode="json"))
        print(f"⚠️  {e.error}: {e.message}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure", extra=log_context(command=args.command))
        _emit({"error": "internal_error", "message": str(e), "details": None})
        return 3

    _emit(outcome.stdout_json)
    print(outcome.summary, file=sys.stderr)
    return outcome.exit_code


# ----- 보조 함수 -----


def _emit(payload: dict[str, Any]) -> None:
    sys.stdout.write(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS).decode() + "\n")
    sys.stdout.flush()


def _add_interval_flags(
    parser: argparse.ArgumentParser,
    required: bool,
    default: tuple[float, float] | None = None,
) -> None:
    parser.add_argument("--a", type=float, required=required, default=default and default[0])
    parser.add_argument("--b", type=float, required=required, default=default and default[1])


def _interval_flags(args: argparse.Namespace) -> Interval | None:
    """--a/--b 가 모두 주어지면 구간, 아니면 None (파일별 원자 범위로 추론)"""
    if args.a is None and args.b is None:
        return None
    if args.a is None or args.b is None:
        raise MalformedInputError("--a and --b must be given together")
    return make_interval(args.a, args.b)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise MalformedInputError(f"expected a comma separated list of integers, got {text!r}") from e
    if not values:
        raise MalformedInputError("empty integer list")
    return values


if __name__ == "__main__":
    sys.exit(main())
