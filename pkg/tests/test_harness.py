import pytest

from app.backend.core.exceptions import (
    IntervalMismatchError,
    MalformedInputError,
    NumericalFailureError,
    PreconditionUViolatedError,
)
from app.backend.services.dist_core import make_distribution, make_interval
from app.backend.services.harness import (
    TrialTask,
    check_corollary1,
    check_corollary2,
    harness_utilities,
    random_distribution,
    random_pair,
    run_corollary_sweep,
    run_membership_sweep,
    run_theorem1_harness,
    run_trial,
    write_jsonl,
)
from app.backend.services.utility_classes import (
    NegPower,
    PowerCRRAVariant,
    check_G,
    prop2_counterexample,
)


def _task(**overrides) -> TrialTask:
    fields = dict(
        seed=7,
        trial=0,
        n=2,
        atom_budget=6,
        utilities=5,
        gap_tolerance=1e-9,
        max_halvings=10,
    )
    fields.update(overrides)
    return TrialTask(**fields)


class TestRandomInputs:
    def test_distribution_stays_in_interval(self, rng, unit_interval):
        for _ in range(20):
            dist = random_distribution(rng, unit_interval, 5)
            assert 1 <= dist.size <= 5
            assert min(dist.atoms) >= 0.0 and max(dist.atoms) <= 1.0

    @pytest.mark.parametrize("kind", ["independent", "spread", "shift", "identical"])
    def test_pair_kinds_share_interval(self, rng, unit_interval, kind):
        F, G = random_pair(rng, unit_interval, 6, kind)
        assert F.support_interval == G.support_interval == unit_interval
        if kind == "identical":
            assert F == G

    def test_harness_utilities_are_generators(self, rng, unit_interval):
        utilities = harness_utilities(rng, 2, unit_interval, 6, grid_resolution=65)
        assert len(utilities) == 6
        assert all(check_G(u, 2).member for u in utilities)


class TestTrial:
    def test_identical_pair_has_no_counterexample(self):
        record = run_trial(_task(force_identical=True))
        assert record.bsd_FG and record.bsd_GF
        assert record.min_gap == pytest.approx(0.0, abs=1e-12)
        assert not record.counterexample
        assert record.refuted_by_approximant is None

    def test_same_seed_same_record(self):
        assert run_trial(_task(trial=3)) == run_trial(_task(trial=3))

    @pytest.mark.parametrize("tolerance", [float("nan"), float("inf"), -1.0])
    def test_bad_tolerance(self, tolerance):
        with pytest.raises(NumericalFailureError):
            run_trial(_task(gap_tolerance=tolerance))


class TestTheoremHarness:
    def test_small_run_has_no_counterexamples(self):
        report = run_theorem1_harness(4, [1, 2, 3], seed=11, utilities=5)
        assert len(report.records) == 12
        assert report.counterexamples == 0
        assert report.holding_directions + report.failing_directions == 24

    def test_deterministic(self):
        first = run_theorem1_harness(3, [2], seed=5, utilities=4)
        second = run_theorem1_harness(3, [2], seed=5, utilities=4)
        assert first == second

    @pytest.mark.slow
    def test_parallel_matches_serial(self):
        serial = run_theorem1_harness(3, [1, 2], seed=2, utilities=4, threads=0)
        parallel = run_theorem1_harness(3, [1, 2], seed=2, utilities=4, threads=2)
        assert serial.records == parallel.records

    def test_forced_identical_pairs(self):
        report = run_theorem1_harness(2, [1, 2], seed=1, utilities=3, force_identical=True)
        assert report.failing_directions == 0
        assert report.counterexamples == 0

    def test_needs_a_trial(self):
        with pytest.raises(MalformedInputError):
            run_theorem1_harness(0, [2])


class TestCorollaries:
    def test_power_utility_agrees(self, unit_interval):
        report = check_corollary1(NegPower(3, 1.0, unit_interval), 2, grid_size=513)
        assert report.g_convex and report.k_convex
        assert report.agree

    def test_counterexample_outside_u_disagrees(self):
        report = check_corollary1(prop2_counterexample(2, 1.0), 2, enforce_precondition=False)
        assert not report.g_convex
        assert report.k_convex
        assert not report.agree
        assert not report.precondition_checked

    def test_precondition_enforced(self):
        with pytest.raises(PreconditionUViolatedError):
            check_corollary1(prop2_counterexample(2, 1.0), 2)

    def test_chain_for_quadratic_loss(self, unit_interval, rng):
        u = NegPower(2, 1.0, unit_interval)
        for _ in range(10):
            X = random_distribution(rng, unit_interval, 6)
            report = check_corollary2(u, 2, X)
            assert report.chain_holds
            # −(b−x)^2 에서는 가운데 항이 기대효용과 같음
            assert report.mid == pytest.approx(report.lhs, abs=1e-12)

    @pytest.mark.parametrize(
        ("n", "expected"),
        [(2, (-0.5, -0.5, -0.25)), (3, (-0.5, -0.5, -0.125))],
    )
    def test_chain_values_for_two_point_distribution(self, unit_interval, n, expected):
        X = make_distribution([0.0, 1.0], [0.5, 0.5], unit_interval)
        report = check_corollary2(NegPower(n, 1.0, unit_interval), n, X)
        assert (report.lhs, report.mid, report.rhs) == pytest.approx(expected, abs=1e-12)
        assert report.chain_holds

    def test_chain_collapses_for_point_mass(self, unit_interval):
        X = make_distribution([0.4], [1.0], unit_interval)
        report = check_corollary2(NegPower(3, 1.0, unit_interval), 2, X)
        assert report.lhs == pytest.approx(report.mid, abs=1e-12)
        assert report.mid == pytest.approx(report.rhs, abs=1e-12)

    def test_power_crra_variant_agrees(self):
        v = PowerCRRAVariant(2.0, 1.0, make_interval(0.1, 1.0))
        report = check_corollary1(v, 2, grid_size=513)
        assert report.agree
        assert report.g_convex and report.k_convex

    def test_chain_interval_mismatch(self, unit_interval):
        X = make_distribution([0.5], [1.0], make_interval(0.0, 2.0))
        with pytest.raises(IntervalMismatchError):
            check_corollary2(NegPower(2, 1.0, unit_interval), 2, X)


@pytest.mark.slow
class TestSweeps:
    def test_membership_sweep(self):
        report = run_membership_sweep(8, [2, 3], seed=4, grid_size=513)
        assert report.samples <= 8
        assert report.counterexamples == len(report.disagreements) == 0
        kept = report.samples - report.excluded
        assert report.g_ap_agree == report.ap_lp_agree == kept

    def test_corollary_sweep(self):
        report = run_corollary_sweep(6, [2, 3], seed=4, grid_size=513)
        assert report.counterexamples == 0
        assert report.corollary1_agree == report.samples
        assert report.best_improvement >= 0.0


class TestJsonl:
    def test_same_records_same_bytes(self, tmp_path):
        report = run_theorem1_harness(2, [2], seed=3, utilities=3)
        first = write_jsonl(report.records, tmp_path / "a.jsonl")
        second = write_jsonl(report.records, tmp_path / "nested" / "b.jsonl")
        assert first.read_bytes() == second.read_bytes()
        assert len(first.read_bytes().splitlines()) == 2

    def test_records_are_sorted_json(self, tmp_path):
        record = run_trial(_task(force_identical=True))
        line = write_jsonl([record], tmp_path / "r.jsonl").read_text(encoding="utf-8")
        assert line.endswith("\n")
        assert line.index('"bsd_FG"') < line.index('"seed"')
