"""
정리 검증 하네스
무작위 분포 쌍에 대해 유계 확률지배와 생성자 효용의 기대효용 부등식이 일치하는지 확인하고,
효용 클래스 집합 동치와 따름정리(LPM 볼록성, 기대효용 부등식 사슬)를 표본 스윕으로 점검합니다.

각 시행은 (seed, n, trial) 에서 파생된 독립 난수열을 사용하므로 직렬/병렬 실행 결과가 같습니다.
"""

import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import orjson
from pydantic import BaseModel

from app.backend.core.config import settings
from app.backend.core.exceptions import (
    IntervalMismatchError,
    MalformedInputError,
    NumericalFailureError,
    PreconditionUViolatedError,
    PreconditionViolatedError,
)
from app.backend.core.logging import get_logger, log_context
from app.backend.schemas.distributions import DiscreteDistribution, Interval
from app.backend.schemas.reports import (
    Corollary1Report,
    Corollary2Report,
    CorollarySweepReport,
    DominanceVerdict,
    HarnessRecord,
    HarnessReport,
    MembershipSweepReport,
)
from app.backend.services.dist_core import make_distribution
from app.backend.services.dominance import check_bsd, expected_utility_gap
from app.backend.services.generator_lab import (
    build_lemma5_approximant,
    random_base_function,
    sample_generator_utility,
)
from app.backend.services.utility_classes import (
    Affine,
    CombinedUtility,
    CRRAUtility,
    NegPower,
    PowerCRRAVariant,
    Prop2Counterexample,
    UtilitySpec,
    check_AP,
    check_G,
    check_LP,
    check_U,
    convexity_slack,
    nth_root_with_noise,
    prop2_gamma,
)
from app.backend.workers.trial_pool import run_tasks

logger = get_logger(__name__)

PAIR_KINDS = ("independent", "spread", "shift")

_EPS = float(np.finfo(float).eps)


# ----- 무작위 입력 -----


def random_interval(rng: np.random.Generator, positive: bool = False) -> Interval:
    """무작위 구간 (positive 이면 a > 0)"""
    if positive:
        a = round(float(rng.uniform(0.05, 1.0)), 3)
        length = round(float(rng.uniform(0.5, 2.0)), 3)
    else:
        a = round(float(rng.uniform(-1.0, 1.0)), 3)
        length = round(float(rng.uniform(0.5, 3.0)), 3)
    return Interval(a=a, b=a + length)


def random_distribution(
    rng: np.random.Generator, interval: Interval, atom_budget: int
) -> DiscreteDistribution:
    count = int(rng.integers(1, atom_budget + 1))
    atoms = interval.a + interval.length * rng.random(count)
    if rng.random() < 0.2:
        atoms[0] = interval.b if rng.random() < 0.5 else interval.a
    probs = rng.dirichlet(np.ones(count))
    return make_distribution(atoms, probs, interval, normalize=True)


def random_pair(
    rng: np.random.Generator, interval: Interval, atom_budget: int, kind: str
) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    """
    무작위 분포 쌍

    kind: independent(독립), spread(평균 보존 확산), shift(하향 이동), identical(동일)
    """
    F = random_distribution(rng, interval, max(1, atom_budget - 1))
    if kind == "identical":
        return F, F

    G: DiscreteDistribution | None = None
    atoms, probs = F.atom_array, F.prob_array
    if kind == "spread":
        i = int(rng.integers(F.size))
        x, p = atoms[i], probs[i]
        left = float(rng.uniform(0.1, 1.0)) * (x - interval.a)
        right = float(rng.uniform(0.1, 1.0)) * (interval.b - x)
        if left > 0 and right > 0:
            new_atoms = np.concatenate((np.delete(atoms, i), [x - left, x + right]))
            split = [p * right / (left + right), p * left / (left + right)]
            new_probs = np.concatenate((np.delete(probs, i), split))
            G = make_distribution(new_atoms, new_probs, interval, normalize=True)
    elif kind == "shift":
        room = float(atoms.min() - interval.a)
        if room > 0:
            G = make_distribution(atoms - float(rng.uniform(0.1, 1.0)) * room, probs, interval)
    if G is None:
        G = random_distribution(rng, interval, atom_budget)
    return (F, G) if rng.random() < 0.5 else (G, F)


def harness_utilities(
    rng: np.random.Generator,
    n: int,
    interval: Interval,
    count: int,
    grid_resolution: int | None = None,
) -> list[UtilitySpec]:
    """
    G_n 에 속하는 검사용 효용 목록

    check_G 를 통과하는 명명된 효용(−(b−x)^m, v_γ)에 무작위 기저의 generator 효용과
    상수 기저 효용을 더해 count 개를 만듭니다.
    """
    named: list[UtilitySpec] = [NegPower(m, interval.b, interval) for m in range(n, n + 4)]
    if interval.a > 0:
        named += [PowerCRRAVariant(g, interval.b, interval) for g in (0.5, 1.0, 2.0, 5.0)]
    named = [u for u in named if check_G(u, n).member][: max(0, count - 1)]

    utilities = list(named)
    size = grid_resolution or settings.generator_grid_resolution
    utilities.append(sample_generator_utility(n, interval, np.ones(size), 0.0, size))
    while len(utilities) < count:
        boundary = float(rng.exponential()) if rng.random() < 0.7 else 0.0
        utilities.append(
            sample_generator_utility(
                n, interval, random_base_function(rng, interval), boundary, grid_resolution
            )
        )
    return utilities[:count]


# ----- 정리 하네스 -----


@dataclass(frozen=True)
class TrialTask:
    """하네스 시행 1회의 입력"""

    seed: int
    trial: int
    n: int
    atom_budget: int
    utilities: int
    gap_tolerance: float
    max_halvings: int
    force_identical: bool = False


def run_trial(task: TrialTask) -> HarnessRecord:
    """
    시행 1회

    성립하는 방향은 생성자 효용 전부에 대해 기대효용 차가 −tol·(1+scale) 이상인지,
    실패하는 방향은 위반 임계값에서 만든 LPM 근사 효용이 음의 차를 내는지 확인합니다.

    Raises:
        NumericalFailureError: 허용오차가 유한하지 않음
    """
    if not math.isfinite(task.gap_tolerance) or task.gap_tolerance < 0:
        raise NumericalFailureError(
            "harness gap tolerance is not a finite nonnegative number",
            tolerance=repr(task.gap_tolerance),
        )
    rng = np.random.default_rng(np.random.SeedSequence([task.seed, task.n, task.trial]))
    interval = random_interval(rng)
    kind = "identical" if task.force_identical else str(rng.choice(PAIR_KINDS))
    F, G = random_pair(rng, interval, task.atom_budget, kind)

    verdict_FG = check_bsd(F, G, task.n)
    verdict_GF = check_bsd(G, F, task.n)
    utilities: list[UtilitySpec] = []
    if verdict_FG.holds or verdict_GF.holds:
        utilities = harness_utilities(rng, task.n, interval, task.utilities)

    min_gap: float | None = None
    tested = 0
    refuted: bool | None = None
    width: float | None = None
    near_tie = False
    counterexample = False
    notes: list[str] = [kind]

    for X, Y, verdict, label in ((F, G, verdict_FG, "FG"), (G, F, verdict_GF, "GF")):
        if verdict.holds:
            gap, passed = _holding_direction(X, Y, utilities, task.gap_tolerance)
            tested += len(utilities)
            min_gap = gap if min_gap is None else min(min_gap, gap)
            if not passed:
                if verdict.min_margin < 0:
                    near_tie = True
                    notes.append(f"{label}: negative gap at a tolerance-level tie")
                else:
                    counterexample = True
                    notes.append(f"{label}: generator utility with negative gap")
        else:
            ok, used_width = _refute(X, Y, verdict, task)
            width = used_width if width is None else min(width, used_width)
            refuted = ok if refuted is None else (refuted and ok)
            if not ok:
                if abs(verdict.min_margin) <= _tie_band(verdict, task, interval):
                    near_tie = True
                    notes.append(f"{label}: violation below approximant resolution")
                else:
                    counterexample = True
                    notes.append(f"{label}: approximant failed to refute")

    record = HarnessRecord(
        seed=task.seed,
        trial=task.trial,
        n=task.n,
        interval=interval,
        bsd_FG=verdict_FG.holds,
        bsd_GF=verdict_GF.holds,
        margin_FG=verdict_FG.min_margin,
        margin_GF=verdict_GF.min_margin,
        utilities_tested=tested,
        min_gap=min_gap,
        refuted_by_approximant=refuted,
        refutation_width=width,
        near_tie=near_tie,
        counterexample=counterexample,
        note="; ".join(notes),
    )
    if counterexample:
        logger.warning("Harness counterexample", extra=log_context(**record.model_dump(mode="json")))
    return record


def run_theorem1_harness(
    trials: int,
    n_range: Iterable[int],
    atom_budget: int = 8,
    seed: int = 0,
    force_identical: bool = False,
    utilities: int | None = None,
    gap_tolerance: float | None = None,
    max_halvings: int | None = None,
    threads: int | None = None,
) -> HarnessReport:
    """
    n ∈ n_range 마다 trials 번의 무작위 시행

    Args:
        trials: n 당 시행 수 (≥ 1)
        n_range: 차수 집합
        atom_budget: 분포당 원자 수 상한
        seed: 재현용 시드
        force_identical: True 면 F = G 쌍만 사용
        threads: 병렬 워커 수 (기본값 BSD_LAB_THREADS)
    """
    if trials < 1:
        raise MalformedInputError(f"trials must be at least 1, got {trials}", trials=trials)
    orders = sorted(set(n_range))
    tasks = [
        TrialTask(
            seed=seed,
            trial=t,
            n=n,
            atom_budget=atom_budget,
            utilities=utilities or settings.harness_utilities,
            gap_tolerance=(
                settings.harness_gap_tolerance if gap_tolerance is None else gap_tolerance
            ),
            max_halvings=settings.harness_max_halvings if max_halvings is None else max_halvings,
            force_identical=force_identical,
        )
        for n in orders
        for t in range(trials)
    ]
    records = run_tasks(run_trial, tasks, threads)

    report = HarnessReport(
        seed=seed,
        n_range=orders,
        trials_per_n=trials,
        records=records,
        holding_directions=sum(r.bsd_FG + r.bsd_GF for r in records),
        failing_directions=sum((not r.bsd_FG) + (not r.bsd_GF) for r in records),
        refuted=sum(1 for r in records if r.refuted_by_approximant),
        near_ties=sum(r.near_tie for r in records),
        counterexamples=sum(r.counterexample for r in records),
    )
    logger.info(
        "Theorem harness finished",
        extra=log_context(
            trials=len(records),
            holding=report.holding_directions,
            failing=report.failing_directions,
            counterexamples=report.counterexamples,
        ),
    )
    return report


def _gap_scale(X: DiscreteDistribution, Y: DiscreteDistribution, u: UtilitySpec) -> float:
    atoms = np.concatenate((X.atom_array, Y.atom_array))
    return float(np.max(np.abs(u.value(atoms))))


def _holding_direction(
    X: DiscreteDistribution,
    Y: DiscreteDistribution,
    utilities: list[UtilitySpec],
    tolerance: float,
) -> tuple[float, bool]:
    worst = math.inf
    passed = True
    for u in utilities:
        gap = expected_utility_gap(X, Y, u)
        worst = min(worst, gap)
        if gap < -tolerance * (1.0 + _gap_scale(X, Y, u)):
            passed = False
    return worst, passed


def _refute(
    X: DiscreteDistribution, Y: DiscreteDistribution, verdict: DominanceVerdict, task: TrialTask
) -> tuple[bool, float]:
    """위반 임계값에서 폭을 반씩 줄이며 LPM 근사 효용의 기대효용 차가 음수가 되는지 확인"""
    interval = X.support_interval
    c = float(verdict.witness_c)  # type: ignore[arg-type]
    width = 0.1 * interval.length
    for halving in range(task.max_halvings + 1):
        width = 0.1 * interval.length / 2**halving
        u = build_lemma5_approximant(c, task.n, interval, width)
        gap = expected_utility_gap(X, Y, u)
        if gap < -task.gap_tolerance * (1.0 + _gap_scale(X, Y, u)):
            logger.debug(
                "Approximant refuted dominance",
                extra=log_context(c=c, width=width, gap=gap, margin=verdict.min_margin),
            )
            return True, width
    return False, width


def _tie_band(verdict: DominanceVerdict, task: TrialTask, interval: Interval) -> float:
    """가장 작은 완화 폭으로 구분할 수 없는 위반 크기 (Lipschitz 상수 × 폭)"""
    smallest = 0.1 * interval.length / 2**task.max_halvings
    lipschitz = task.n * interval.length ** (task.n - 1)
    return max(10.0 * verdict.tolerance, smallest * lipschitz)


# ----- 따름정리 -----


def check_corollary1(
    f: UtilitySpec,
    n: int,
    grid_size: int | None = None,
    tolerance: float | None = None,
    enforce_precondition: bool = True,
) -> Corollary1Report:
    """
    g_n(x) = (f(b) − f(x))^{1/n} 의 볼록성과 k_n(x) = −f(b − x^{1/n}) 의 볼록성 비교

    f ∈ U_n 이면 두 판정이 일치해야 합니다.

    Raises:
        PreconditionUViolatedError: enforce_precondition 이고 f ∉ U_n
    """
    tol = settings.membership_tolerance if tolerance is None else tolerance
    size = grid_size or settings.membership_grid_size
    if enforce_precondition:
        membership = check_U(f, n, size, tol)
        if not membership.member:
            raise PreconditionUViolatedError(
                f"{f.label} is not in U_{n}",
                worst_slack=membership.worst_slack,
                binding=membership.binding_criterion,
            )

    a, b = f.interval.a, f.interval.b
    x = f.interval.grid(size)
    values = f.value(x)
    f_b = float(f.value(b))
    g, g_noise = nth_root_with_noise(f_b - values, n, 4 * _EPS * (np.abs(values) + abs(f_b)))
    g_slack = convexity_slack(g, g_noise, x, "g_n convex")

    y = np.linspace(0.0, f.interval.length**n, size)
    points = np.clip(b - y ** (1.0 / n), a, b)
    k = -f.value(points)
    reach = max(abs(a), abs(b))
    k_noise = 4 * _EPS * (np.abs(k) + np.abs(f.derivative(points, 1)) * reach)
    k_slack = convexity_slack(k, k_noise, y, "k_n convex")

    g_convex = g_slack.slack >= -tol
    k_convex = k_slack.slack >= -tol
    return Corollary1Report(
        n=n,
        g_convex=g_convex,
        k_convex=k_convex,
        agree=g_convex == k_convex,
        g_worst_slack=g_slack.slack,
        k_worst_slack=k_slack.slack,
        precondition_checked=enforce_precondition,
    )


def check_corollary2(
    f: UtilitySpec,
    n: int,
    X: DiscreteDistribution,
    enforce_precondition: bool = True,
) -> Corollary2Report:
    """
    E f(X) ≤ f(b − (E(b−X)^n)^{1/n}) ≤ f(E X)

    Raises:
        PreconditionViolatedError: f ∉ U_n ∩ LP_n
        IntervalMismatchError: X 의 지지 구간이 f 의 구간과 다름
    """
    if X.support_interval != f.interval:
        raise IntervalMismatchError(
            f"distribution on {X.support_interval} but utility on {f.interval}"
        )
    if enforce_precondition:
        for report in (check_U(f, n), check_LP(f, n)):
            if not report.member:
                raise PreconditionViolatedError(
                    f"{f.label} is not in {report.class_id.value}_{n}",
                    binding=report.binding_criterion,
                    worst_slack=report.worst_slack,
                )

    b = f.interval.b
    lhs = X.expectation(f.value(X.atom_array))
    moment = X.expectation((b - X.atom_array) ** n)
    mid = float(f.value(b - moment ** (1.0 / n)))
    rhs = float(f.value(X.mean))
    slack = 1e-9 * max(1.0, abs(lhs), abs(rhs))
    return Corollary2Report(
        lhs=lhs, mid=mid, rhs=rhs, chain_holds=lhs <= mid + slack and mid <= rhs + slack
    )


# ----- 스윕 -----


def sweep_candidate(
    rng: np.random.Generator,
    n: int,
    interval: Interval,
    grid_resolution: int | None = None,
) -> tuple[str, UtilitySpec]:
    """
    집합 동치 스윕용 효용 표본

    generator 효용(G 원소), 여기에 ε·x 나 ε·(−(b−x)^m) (m < n) 을 더한 U \\ G 원소,
    그리고 명명된 닫힌 형태 중 하나를 고릅니다.
    """
    kind = str(rng.choice(["generator", "plus_linear", "plus_neg_power", "named"]))
    if kind == "named":
        return kind, _named_candidate(rng, n, interval)

    boundary = float(rng.exponential()) if rng.random() < 0.7 else 0.0
    base = sample_generator_utility(
        n, interval, random_base_function(rng, interval), boundary, grid_resolution
    )
    constant = float(rng.normal()) if rng.random() < 0.3 else 0.0
    if kind == "generator":
        return kind, CombinedUtility([(1.0, base)], constant) if constant else base

    slope_scale = max(1e-3, float(np.max(np.abs(base.derivative(interval.grid(65), 1)))))
    epsilon = float(rng.uniform(0.05, 1.0)) * slope_scale
    if kind == "plus_neg_power" and n > 1:
        m = int(rng.integers(1, n))
        weight = epsilon / (m * interval.length ** (m - 1))
        extra: UtilitySpec = NegPower(m, interval.b, interval)
    else:
        kind, weight, extra = "plus_linear", epsilon, Affine(1.0, 0.0, interval)
    return kind, CombinedUtility([(1.0, base), (weight, extra)], constant)


def _named_candidate(rng: np.random.Generator, n: int, interval: Interval) -> UtilitySpec:
    b = interval.b
    choice = int(rng.integers(4))
    if choice == 0:
        return NegPower(int(rng.integers(1, n + 3)), b, interval)
    if choice == 1:
        return PowerCRRAVariant(float(rng.uniform(0.3, 5.0)), b, interval)
    if choice == 2:
        return CRRAUtility(float(rng.uniform(0.3, 5.0)), interval)
    order = max(n, 2)
    return Prop2Counterexample(order, b, prop2_gamma(order, b), interval)


def run_membership_sweep(
    samples: int,
    n_set: Iterable[int],
    seed: int,
    grid_size: int | None = None,
    tolerance: float | None = None,
) -> MembershipSweepReport:
    """
    U_n 원소 표본에서 G ⟺ AP, AP ⟺ LP 판정 일치 여부 집계

    어느 판정이든 최악 여유값이 [−10·tol, −tol) 에 있으면 경계 표본으로 제외합니다.
    """
    tol = settings.membership_tolerance if tolerance is None else tolerance
    orders = sorted(set(n_set))
    accepted = excluded = g_ap = ap_lp = counterexamples = reading_flags = members_g = 0
    disagreements: list[dict[str, object]] = []

    attempt = 0
    while accepted < samples and attempt < 4 * samples:
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        attempt += 1
        n = int(rng.choice(orders))
        interval = random_interval(rng, positive=True)
        kind, u = sweep_candidate(rng, n, interval)
        if not check_U(u, n, grid_size, tol).member:
            continue
        accepted += 1

        reports = {
            "G": check_G(u, n, grid_size, tol),
            "AP": check_AP(u, n, grid_size, tol),
            "LP": check_LP(u, n, grid_size, tol),
        }
        if "monotonicity_readings_disagree" in reports["LP"].diagnostics:
            reading_flags += 1
        if any(-10 * tol <= r.worst_slack < -tol for r in reports.values()):
            excluded += 1
            continue

        members_g += reports["G"].member
        agree_g = reports["G"].member == reports["AP"].member
        agree_lp = reports["AP"].member == reports["LP"].member
        g_ap += agree_g
        ap_lp += agree_lp
        if not (agree_g and agree_lp):
            counterexamples += 1
            disagreements.append(
                {
                    "attempt": attempt - 1,
                    "kind": kind,
                    "n": n,
                    "utility": u.label,
                    **{name: r.member for name, r in reports.items()},
                    "binding": {name: r.binding_criterion for name, r in reports.items()},
                }
            )

    report = MembershipSweepReport(
        samples=accepted,
        excluded=excluded,
        excluded_fraction=excluded / accepted if accepted else 0.0,
        g_ap_agree=g_ap,
        ap_lp_agree=ap_lp,
        counterexamples=counterexamples,
        reading_flags=reading_flags,
        members_g=members_g,
        disagreements=disagreements,
    )
    logger.info(
        "Membership sweep finished",
        extra=log_context(samples=accepted, excluded=excluded, counterexamples=counterexamples),
    )
    return report


def run_corollary_sweep(
    samples: int,
    n_set: Iterable[int],
    seed: int,
    atom_budget: int = 8,
    grid_size: int | None = None,
) -> CorollarySweepReport:
    """
    U_n 원소 f 와 무작위 X 에 대해 따름정리 1 의 일치와 따름정리 2 의 부등식 사슬 확인

    best_improvement 는 f(E X) − f(b − (E(b−X)^n)^{1/n}) 의 최댓값입니다.
    """
    orders = sorted(set(n_set))
    accepted = agree = chains = counterexamples = 0
    best = 0.0
    disagreements: list[dict[str, object]] = []

    attempt = 0
    while accepted < samples and attempt < 4 * samples:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1, attempt]))
        attempt += 1
        n = int(rng.choice(orders))
        interval = random_interval(rng, positive=True)
        kind, f = sweep_candidate(rng, n, interval)
        if not check_U(f, n, grid_size).member:
            continue
        accepted += 1

        first = check_corollary1(f, n, grid_size, enforce_precondition=False)
        agree += first.agree
        chain_ok = True
        if check_LP(f, n, grid_size).member:
            X = random_distribution(rng, interval, atom_budget)
            second = check_corollary2(f, n, X, enforce_precondition=False)
            chains += second.chain_holds
            chain_ok = second.chain_holds
            best = max(best, second.rhs - second.mid)
        if not (first.agree and chain_ok):
            counterexamples += 1
            disagreements.append(
                {
                    "attempt": attempt - 1,
                    "kind": kind,
                    "n": n,
                    "utility": f.label,
                    "corollary1_agree": first.agree,
                    "chain_holds": chain_ok,
                }
            )

    return CorollarySweepReport(
        samples=accepted,
        corollary1_agree=agree,
        corollary2_chain_holds=chains,
        counterexamples=counterexamples,
        best_improvement=best,
        disagreements=disagreements,
    )


def write_jsonl(records: Iterable[BaseModel], path: str | Path) -> Path:
    """보고서 레코드를 키 정렬된 JSON lines 로 저장 (같은 입력이면 같은 바이트)"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("wb") as handle:
        for record in records:
            handle.write(orjson.dumps(record.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS))
            handle.write(b"\n")
    return target
