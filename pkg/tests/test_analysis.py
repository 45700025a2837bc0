import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from pbvote import (
    BallotFormat,
    InputError,
    Instance,
    Project,
    cross_format_welfare,
    derive_valuations,
    entropy,
    frequency_heatmap,
    load_election,
    project_scores,
    run_stability,
)
from pbvote.analysis import entropy_comparison, entropy_table, heatmap_column_order
from pbvote.io import export_report
from synth import all_format_profiles, synthetic_profile

CAT = "Education"


def make_instance(costs, budget, name="t"):
    projects = tuple(
        Project(id=pid, name=pid.upper(), category=CAT, cost=cost)
        for pid, cost in sorted(costs.items())
    )
    return Instance(projects=projects, budget=budget, name=name)


class TestEntropy:
    def test_degenerate_frequencies(self):
        assert entropy([1, 1, 0, 1, 0]) == 0.0

    def test_maximal_at_half(self):
        assert entropy([0.5, 0.5, 0.5]) == 1.0

    def test_quarter_frequency(self):
        assert entropy([0.25]) == pytest.approx(0.8112781244591328, abs=1e-12)

    def test_accepts_fractions(self):
        assert entropy([Fraction(1, 4)]) == pytest.approx(0.811278, abs=1e-6)

    def test_empty_is_zero(self):
        assert entropy([]) == 0.0

    def test_rejects_out_of_range(self):
        with pytest.raises(InputError):
            entropy([1.2])

    @given(st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=10))
    def test_bounds_and_zero_iff_degenerate(self, freqs):
        h = entropy(freqs)
        assert 0.0 <= h <= 1.0
        if all(f in (0.0, 1.0) for f in freqs):
            assert h == 0.0
        elif any(0.05 < f < 0.95 for f in freqs):
            assert h > 0.0

    @given(st.lists(st.floats(min_value=0, max_value=1), min_size=2, max_size=8))
    def test_relabeling_invariance(self, freqs):
        assert entropy(freqs) == pytest.approx(entropy(list(reversed(freqs))))


@pytest.fixture(scope="module")
def small_instance():
    return make_instance({"a": 4, "b": 3, "c": 5, "d": 9}, 10, name="mini")


@pytest.fixture(scope="module")
def kapp_profile(small_instance):
    return synthetic_profile(small_instance, BallotFormat.KAPPROVAL, 12, seed=9, k=2)


class TestRunStability:
    def test_full_sample_is_identity(self, small_instance, kapp_profile):
        n = kapp_profile.n
        reports = run_stability(kapp_profile, ["greedy", "mes"], n, 25, master_seed=3)
        for report in reports.values():
            assert set(report.frequencies.values()) <= {Fraction(0), Fraction(1)}
            assert report.entropy == 0.0
            assert len(set(report.sample_digests)) == 1

    def test_determinism(self, kapp_profile):
        a = run_stability(kapp_profile, ["greedy"], 5, 30, master_seed=11)["greedy"]
        b = run_stability(kapp_profile, ["greedy"], 5, 30, master_seed=11)["greedy"]
        assert json.dumps(export_report(a), sort_keys=True) == json.dumps(
            export_report(b), sort_keys=True
        )

    def test_different_seeds_differ_in_samples(self, kapp_profile):
        a = run_stability(kapp_profile, ["greedy"], 5, 10, master_seed=1)["greedy"]
        b = run_stability(kapp_profile, ["greedy"], 5, 10, master_seed=2)["greedy"]
        assert a.sample_digests != b.sample_digests

    def test_identical_ballots_yield_degenerate_frequencies(self, small_instance):
        from pbvote import ApprovalBallot, Profile

        ballots = tuple(
            (
                f"v{i:02d}",
                ApprovalBallot(approved=frozenset({"a", "b"}), format=BallotFormat.KNAPSACK),
            )
            for i in range(58)
        )
        profile = Profile(
            instance=small_instance, format=BallotFormat.KNAPSACK, ballots=ballots
        )
        reports = run_stability(profile, ["greedy", "mes"], 40, 15, master_seed=5)
        for report in reports.values():
            assert set(report.frequencies.values()) <= {Fraction(0), Fraction(1)}

    def test_paired_sampling_shares_digests(self, kapp_profile):
        reports = run_stability(kapp_profile, ["greedy", "mes"], 6, 20, master_seed=42)
        assert reports["greedy"].sample_digests == reports["mes"].sample_digests

    def test_counts_match_funded_set_reconstruction(self, kapp_profile):
        report = run_stability(
            kapp_profile, ["mes"], 6, 20, master_seed=8, keep_funded_sets=True
        )["mes"]
        for pid, count in report.counts.items():
            assert count == sum(pid in funded for funded in report.funded_sets)
        for f in report.frequencies.values():
            assert Fraction(f).limit_denominator(20) == f  # denominator divides R

    def test_nprime_exceeding_pool_rejected(self, kapp_profile):
        with pytest.raises(InputError, match="exceeds"):
            run_stability(kapp_profile, ["greedy"], kapp_profile.n + 1, 5, master_seed=1)

    def test_consistent_pool_respected(self, small_instance):
        profile = synthetic_profile(
            small_instance,
            BallotFormat.KNAPSACK,
            20,
            seed=4,
            consistent_fraction=0.5,
        )
        pool = profile.sampling_pool()
        assert 0 < len(pool) < profile.n
        report = run_stability(profile, ["greedy"], len(pool), 5, master_seed=0)["greedy"]
        assert report.config.pool == "consistent"
        with pytest.raises(InputError):
            run_stability(profile, ["greedy"], len(pool) + 1, 5, master_seed=0)

    def test_entropy_recomputable_from_frequencies(self, kapp_profile):
        report = run_stability(kapp_profile, ["greedy"], 4, 40, master_seed=13)["greedy"]
        assert report.entropy == pytest.approx(
            entropy(report.frequencies.values()), abs=0
        )


class TestHeatmap:
    def test_all_ones_row(self, small_instance, kapp_profile):
        reports = run_stability(
            kapp_profile, ["greedy"], kapp_profile.n, 5, master_seed=3
        )
        rows = frequency_heatmap([reports["greedy"]], small_instance)
        assert rows[0] == ["format"] + heatmap_column_order(small_instance)
        assert len(rows) == 2
        assert set(rows[1][1:]) <= {0.0, 1.0}

    def test_small_a_cost_order(self):
        inst = load_election("small-a")
        order = heatmap_column_order(inst)
        assert order[0] == "bus-monitors"  # 24K
        assert order[-1] == "toilet-24h"  # 320K

    def test_empty_reports_header_only(self, small_instance):
        rows = frequency_heatmap([], small_instance)
        assert len(rows) == 1
        assert rows[0][0] == "format"

    def test_mixed_elections_rejected(self, small_instance, kapp_profile):
        other = make_instance({"a": 4}, 10, name="other")
        p2 = synthetic_profile(other, BallotFormat.KNAPSACK, 5, seed=1)
        r1 = run_stability(kapp_profile, ["greedy"], 4, 3, master_seed=1)["greedy"]
        r2 = run_stability(p2, ["greedy"], 4, 3, master_seed=1)["greedy"]
        with pytest.raises(InputError, match="elections"):
            frequency_heatmap([r1, r2], small_instance)

    def test_entropy_table_shape(self, kapp_profile):
        reports = run_stability(kapp_profile, ["greedy", "mes"], 6, 4, master_seed=2)
        rows = entropy_table(list(reports.values()))
        assert rows[0] == ["format", "rule", "nprime", "entropy"]
        assert len(rows) == 3

    def test_entropy_comparison_pairs(self, kapp_profile):
        reports = run_stability(kapp_profile, ["greedy", "mes"], 6, 4, master_seed=2)
        summary = entropy_comparison(list(reports.values()))
        assert len(summary["pairs"]) == 1
        pair = summary["pairs"][0]
        assert {"format", "nprime", "greedy_entropy", "mes_entropy"} <= set(pair)


@pytest.fixture(scope="module")
def profiles(small_instance):
    return all_format_profiles(small_instance, 15, seed=21)


class TestCrossFormatWelfare:
    def test_self_reference_optimum_normalizes_to_one(self, profiles):
        matrix = cross_format_welfare(
            profiles, ["optimal"], BallotFormat.POINTS, normalize=True
        )
        assert matrix.normalized[(BallotFormat.POINTS, "optimal")] == pytest.approx(1.0)

    def test_empty_outcome_scores_zero(self, small_instance):
        # nothing affordable for greedy if every voter ignores the cheap ones
        with pytest.warns(UserWarning):
            dear = make_instance({"a": 11, "b": 12}, 10, name="dear")
        profiles = all_format_profiles(dear, 8, seed=3)
        matrix = cross_format_welfare(profiles, ["greedy"], BallotFormat.KNAPSACK)
        for value in matrix.entries.values():
            assert value == 0.0

    def test_identical_outcomes_give_identical_entries(self, small_instance):
        from pbvote import ApprovalBallot, Profile

        def unanimous(fmt):
            ballots = tuple(
                (f"{fmt.value}{i}", ApprovalBallot(approved=frozenset({"a"}), format=fmt))
                for i in range(4)
            )
            return Profile(instance=small_instance, format=fmt, ballots=ballots, t=1)

        profiles = {
            BallotFormat.KNAPSACK: unanimous(BallotFormat.KNAPSACK),
            BallotFormat.TAPPROVAL: unanimous(BallotFormat.TAPPROVAL),
        }
        matrix = cross_format_welfare(profiles, ["greedy"], BallotFormat.KNAPSACK)
        assert matrix.entries[(BallotFormat.KNAPSACK, "greedy")] == matrix.entries[
            (BallotFormat.TAPPROVAL, "greedy")
        ]

    def test_welfare_linearity(self, small_instance, profiles):
        from pbvote import aggregate_greedy

        matrix = cross_format_welfare(profiles, ["greedy"], BallotFormat.POINTS)
        ref_scores = project_scores(derive_valuations(profiles[BallotFormat.POINTS]))
        n_ref = profiles[BallotFormat.POINTS].n
        for fmt, profile in profiles.items():
            outcome = aggregate_greedy(small_instance, derive_valuations(profile))
            expected = sum(ref_scores[p] for p in outcome.funded) / n_ref
            assert matrix.entries[(fmt, "greedy")] == pytest.approx(expected)

    def test_missing_reference_rejected(self, profiles):
        subset = {BallotFormat.POINTS: profiles[BallotFormat.POINTS]}
        with pytest.raises(InputError, match="reference"):
            cross_format_welfare(subset, ["greedy"], BallotFormat.KNAPSACK)
