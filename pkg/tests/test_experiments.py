"""Experiment tests: exact oracle cross-checks, calibration, cost math."""

import io
import math
from decimal import Decimal
from fractions import Fraction

import pytest
import scipy.stats

from anonboot import _kernels as kernels
from anonboot.election import aggregate_requests, derive_seed, elect
from anonboot.errors import ConfigError
from anonboot.experiments import (
    InfiltrationConfig,
    estimate_cost,
    footprint_csv,
    hypergeom_tail,
    infiltration_cell_seed,
    infiltration_csv,
    run_footprint,
    run_infiltration,
    threshold_count,
    trial_election_seed,
)
from anonboot.pulse import PeerRecord, PeerStats, Position
from anonboot.wire import peer_capabilities, request_capabilities

from helpers import make_ad, make_request


class TestThresholdCount:
    @pytest.mark.parametrize("n,expected", [(4, 2), (16, 6), (31, 11), (100, 34)])
    def test_ceil_reading(self, n, expected):
        assert threshold_count(Fraction(1, 3), n, "ceil") == expected

    @pytest.mark.parametrize("n,expected", [(4, 1), (16, 5), (31, 10), (100, 33)])
    def test_floor_reading(self, n, expected):
        assert threshold_count(Fraction(1, 3), n, "floor") == expected

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            threshold_count(Fraction(1, 3), 4, "round")


class TestHypergeomOracle:
    def test_edge_cases(self):
        assert hypergeom_tail(10, 5, 3, 0) == 1
        assert hypergeom_tail(10, 5, 3, -2) == 1
        assert hypergeom_tail(10, 5, 3, 4) == 0
        assert hypergeom_tail(10, 0, 3, 1) == 0
        assert hypergeom_tail(10, 10, 3, 3) == 1

    def test_pmf_sums_to_one(self):
        total, tagged, draws = 40, 12, 9
        acc = sum(
            Fraction(
                math.comb(tagged, h) * math.comb(total - tagged, draws - h),
                math.comb(total, draws),
            )
            for h in range(0, draws + 1)
        )
        assert acc == 1
        assert hypergeom_tail(total, tagged, draws, 0) == 1

    def test_against_scipy(self):
        for total, tagged, draws, at_least in [
            (1000, 250, 100, 34),
            (1000, 500, 100, 34),
            (1000, 50, 4, 2),
            (1000, 333, 31, 11),
            (50, 20, 10, 4),
        ]:
            exact = float(hypergeom_tail(total, tagged, draws, at_least))
            reference = scipy.stats.hypergeom.sf(
                at_least - 1, total, tagged, draws
            )
            assert exact == pytest.approx(reference, rel=1e-9)


class TestEstimateCost:
    def test_reference_fee(self):
        estimate = estimate_cost(307, 6, 9067)
        assert estimate.fee_sat == 1842
        assert estimate.fee_usd == Decimal("0.17")

    def test_zero_rate(self):
        estimate = estimate_cost(307, 0, 9067)
        assert estimate.fee_sat == 0
        assert estimate.fee_usd == Decimal("0.00")

    def test_linear_in_rate(self):
        estimate = estimate_cost(307, 12, 9067)
        assert estimate.fee_sat == 3684
        assert estimate.fee_usd == Decimal("0.33")

    def test_negative_rejected(self):
        with pytest.raises(ConfigError):
            estimate_cost(-1, 6, 9067)


class TestFootprint:
    def test_reference_points(self):
        rows = run_footprint(
            message_counts=(0, 10_000),
            capacities=(Fraction("0.05"), Fraction("0.10"), Fraction("1.00")),
        )
        table = {(row.capacity, row.messages): row.blocks for row in rows}
        assert table[(Fraction("0.10"), 10_000)] == 23
        assert table[(Fraction("1.00"), 10_000)] == 3
        assert table[(Fraction("0.05"), 10_000)] in (45, 46)
        assert table[(Fraction("0.05"), 0)] == 0

    def test_monotonicity(self):
        counts = (0, 2_000, 5_000, 10_000)
        caps = (Fraction("0.05"), Fraction("0.25"), Fraction("1.00"))
        rows = run_footprint(message_counts=counts, capacities=caps)
        table = {(row.capacity, row.messages): row.blocks for row in rows}
        for cap in caps:
            blocks = [table[(cap, count)] for count in counts]
            assert blocks == sorted(blocks)  # non-decreasing in count
        for count in counts:
            blocks = [table[(cap, count)] for cap in caps]
            assert blocks == sorted(blocks, reverse=True)  # non-increasing in c

    def test_csv_shape(self):
        rows = run_footprint(message_counts=(0, 100), capacities=(Fraction(1),))
        out = io.StringIO()
        footprint_csv(rows, out)
        lines = out.getvalue().strip().splitlines()
        assert lines[0] == "capacity,messages,blocks"
        assert len(lines) == 3


def small_config(**overrides) -> InfiltrationConfig:
    fields = dict(
        repository_size=50,
        adversary_fractions=(Fraction(0), Fraction(2, 5)),
        network_sizes=(4, 10),
        trials=400,
        master_seed=7,
    )
    fields.update(overrides)
    return InfiltrationConfig(**fields)


class TestInfiltration:
    def test_zero_fraction_never_infiltrated(self):
        rows = run_infiltration(small_config())
        for row in rows:
            if row.adversary_fraction == 0:
                assert row.infiltrated == 0
                assert row.exact_rate == 0.0
                assert row.robustness == 1.0

    def test_reproducible(self):
        assert run_infiltration(small_config()) == run_infiltration(small_config())

    def test_thread_count_invariance(self):
        one = run_infiltration(small_config(threads=1))
        two = run_infiltration(small_config(threads=2))
        assert one == two

    def test_measured_tracks_exact(self):
        config = small_config(trials=4000)
        for row in run_infiltration(config):
            sigma = math.sqrt(row.exact_rate * (1 - row.exact_rate) / row.trials)
            assert abs(row.rate - row.exact_rate) <= 4 * sigma + 1e-12

    def test_shortcut_statistically_consistent(self):
        full = run_infiltration(small_config(trials=4000))
        short = run_infiltration(small_config(trials=4000, shortcut=True))
        for row_full, row_short in zip(full, short):
            sigma = math.sqrt(
                max(row_full.exact_rate * (1 - row_full.exact_rate), 1e-9)
                / row_full.trials
            )
            assert abs(row_full.rate - row_short.rate) <= 8 * sigma

    def test_rejects_oversized_network(self):
        with pytest.raises(ConfigError):
            InfiltrationConfig(repository_size=10, network_sizes=(20,))

    def test_csv_round_trip(self):
        rows = run_infiltration(small_config())
        out = io.StringIO()
        infiltration_csv(rows, out)
        lines = out.getvalue().strip().splitlines()
        header = lines[0].split(",")
        assert header == [
            "f_R", "n", "threshold_count", "trials", "infiltrated",
            "rate", "exact_rate", "robustness",
        ]
        assert len(lines) == len(rows) + 1
        first = lines[1].split(",")
        assert int(first[3]) == 400


def test_full_path_matches_object_level_election():
    """The fused Monte Carlo kernel is the real election path: replaying a
    cell trial-by-trial through the object-level API (PeerRecords, request
    aggregation, seed derivation, elect) yields identical outcomes."""
    repository_size, adv_count, network_size, needed = 50, 20, 10, 4
    trials = 150
    cell_seed = infiltration_cell_seed(123, adv_count, network_size)

    repository = []
    for index in range(repository_size):
        ad = make_ad(index, capabilities=peer_capabilities())
        repository.append(PeerRecord(ad, Position(1, index), PeerStats.fresh(0)))
    adversarial = {record.pubkey for record in repository[:adv_count]}

    object_level = 0
    for trial in range(trials):
        trial_seed = kernels.sha256(cell_seed + trial.to_bytes(8, "big"))
        entropy = kernels.prng_block(trial_seed, 0)
        nonce = kernels.prng_block(trial_seed, 1)[:8]
        request = make_request(k=network_size, nonce=nonce, extra=b"")
        (request_class,) = aggregate_requests([request])
        seed = derive_seed(entropy, request_class)
        assert seed == trial_election_seed(cell_seed, trial)
        instance = elect(repository, request_class, seed)
        hits = sum(1 for peer in instance.peers if peer.pubkey in adversarial)
        if hits >= needed:
            object_level += 1

        fused_so_far = kernels.infiltration_cell(
            cell_seed, trial + 1, repository_size, network_size,
            adv_count, needed,
        )
        assert fused_so_far == object_level
