import math

import numpy as np
import pytest

from mutants import rx_ignores_state_bit, rx_swapped_letters
from zefchan.codebook import Codebook
from zefchan.dmc import bec, identity_channel, z_channel
from zefchan.errors import BudgetExceeded, DegenerateSamples, NonterminatingConfig
from zefchan.protocol import NoiselessSessionConfig, NoisySessionConfig
from zefchan.sim import (
    chunk_generator,
    comparison_rows,
    explore_exhaustive,
    geometric_bins,
    geometric_fit,
    mean_within,
    monte_carlo,
    predict_session,
)


@pytest.fixture
def bec_z(all_words_2):
    return NoisySessionConfig(bec(0.3), z_channel(0.4), all_words_2, gamma=1)


class TestMonteCarlo:
    def test_identity(self, all_words_2):
        cfg = NoisySessionConfig(identity_channel(2), identity_channel(2), all_words_2, gamma=1)
        st = monte_carlo(cfg, 1000, seed=1)
        assert (st.rounds == 1).all()
        assert st.undetected_errors == 0
        assert st.mean_delay == 3
        assert st.empirical_rate == pytest.approx(2 / 3)
        assert st.payload_rate == pytest.approx(1 / 3)

    def test_repetition_code_identity_feedback(self, rep_code):
        # k = 1: the codeword carries only the state bit.
        cfg = NoisySessionConfig(bec(0.5), identity_channel(2), rep_code, gamma=1)
        assert cfg.payload_bits == 0
        st = monte_carlo(cfg, 10**5, seed=3)
        ok, mean, se = mean_within(st.rounds, 0.75)
        assert ok, (mean, se)
        assert abs(mean - 1 / 0.75) <= 3 * se

    def test_noiseless_scheme(self, rep_code):
        cfg = NoiselessSessionConfig(bec(0.5), rep_code, gamma=2)
        st = monte_carlo(cfg, 20_000, seed=4)
        assert st.undetected_errors == 0
        assert mean_within(st.rounds, 0.5625)[0]

    def test_deterministic(self, bec_z):
        a = monte_carlo(bec_z, 5000, seed=11, chunk_size=1000)
        b = monte_carlo(bec_z, 5000, seed=11, chunk_size=1000)
        assert (a.rounds == b.rounds).all() and (a.payloads == b.payloads).all()
        assert a.to_json() == b.to_json()
        c = monte_carlo(bec_z, 5000, seed=12, chunk_size=1000)
        assert not (a.rounds == c.rounds).all()

    def test_worker_count_irrelevant(self, bec_z):
        a = monte_carlo(bec_z, 3000, seed=5, chunk_size=700, workers=1)
        b = monte_carlo(bec_z, 3000, seed=5, chunk_size=700, workers=2)
        assert (a.rounds == b.rounds).all() and (a.payloads == b.payloads).all()

    def test_chunks_independent(self):
        a = chunk_generator(7, 0).random(4)
        b = chunk_generator(7, 1).random(4)
        assert not np.allclose(a, b)
        assert np.array_equal(a, chunk_generator(7, 0).random(4))

    def test_transcript_and_csv(self, bec_z):
        st = monte_carlo(bec_z, 50, seed=2, record=True)
        assert len(st.transcript) == int(st.rounds.sum())
        rows = list(st.csv_rows())
        assert rows[0] == "msg_index,payload,rounds,delay_uses,committed_ok"
        assert len(rows) == 51
        doc = st.to_json()
        assert doc["messages_sent"] == 50 and doc["undetected_errors"] == 0

    def test_screen(self):
        code = Codebook(1, [(0,), (1,)])
        from zefchan.dmc import validate_dmc

        ch = validate_dmc([[0.5, 0.5, 0.0], [0.0, 1.0, 0.0]])
        with pytest.raises(NonterminatingConfig):
            monte_carlo(NoiselessSessionConfig(ch, code), 10, seed=0)

    def test_bad_count(self, bec_z):
        with pytest.raises(ValueError):
            monte_carlo(bec_z, 0, seed=0)


class TestGeometricFit:
    def test_true_law_passes(self):
        samples = np.random.default_rng(0).geometric(0.75, 10**5)
        fit = geometric_fit(samples, 0.75)
        assert fit.passed
        assert fit.dof >= 1 and fit.statistic < fit.critical

    def test_constant_fails(self):
        assert not geometric_fit(np.ones(1000, dtype=int), 0.5).passed

    def test_wrong_p_fails(self):
        samples = np.random.default_rng(1).geometric(0.6, 10**5)
        assert not geometric_fit(samples, 0.5).passed

    def test_certain_success(self):
        assert geometric_fit(np.ones(100, dtype=int), 1.0).passed
        assert not geometric_fit(np.array([1, 2]), 1.0).passed

    def test_degenerate(self):
        with pytest.raises(DegenerateSamples):
            geometric_fit(np.array([1, 1]), 0.5)
        with pytest.raises(DegenerateSamples):
            geometric_fit(np.array([0, 1, 2] * 100), 0.5)

    def test_bins_cover_support(self):
        bins = geometric_bins(10**4, 0.3)
        assert bins[0][0] == 1 and bins[-1][1] is None
        assert sum(b[2] for b in bins) == pytest.approx(10**4)
        assert all(b[2] >= 5 for b in bins)

    def test_mean_within(self):
        s = np.random.default_rng(2).geometric(0.4, 10**5)
        ok, mean, se = mean_within(s, 0.4)
        assert ok and se == pytest.approx(math.sqrt(0.6) / 0.4 / math.sqrt(10**5), rel=0.05)
        assert not mean_within(s, 0.45)[0]


class TestExplorer:
    def test_identity(self):
        code = Codebook(1, [(0,), (1,)])
        cfg = NoisySessionConfig(identity_channel(2), identity_channel(2), code, gamma=1)
        assert cfg.payload_bits == 0
        rep = explore_exhaustive(cfg, 3)
        assert rep.safe and rep.liveness_ok and rep.executions == 1

    def test_identity_two_payload_bits(self):
        code = Codebook(3, [tuple(int(b) for b in f"{i:03b}") for i in range(8)])
        cfg = NoisySessionConfig(identity_channel(2), identity_channel(2), code, gamma=1)
        assert cfg.payload_bits == 2
        rep = explore_exhaustive(cfg, 3)
        assert rep.safe and rep.liveness_ok
        assert rep.payload_sequences == 4**3

    def test_bec_z(self, bec_z):
        rep = explore_exhaustive(bec_z, 4)
        assert rep.violations == [] and rep.violation_count == 0
        assert rep.liveness_ok
        assert rep.executions > 1000

    @pytest.mark.parametrize("mutant", [rx_ignores_state_bit, rx_swapped_letters])
    def test_mutants_caught(self, bec_z, mutant):
        rep = explore_exhaustive(bec_z, 4, rx=mutant, keep=2)
        assert not rep.safe
        assert rep.violation_count >= len(rep.violations) == 2
        v = rep.violations[0]
        assert v["reason"] and v["transcript"]

    def test_budget(self, bec_z):
        with pytest.raises(BudgetExceeded):
            explore_exhaustive(bec_z, 4, budget=1000)

    def test_report_json(self, bec_z):
        doc = explore_exhaustive(bec_z, 2).to_json()
        assert doc["violations"] == [] and doc["depth"] == 2


class TestComparison:
    def test_rows(self, bec_z):
        st = monte_carlo(bec_z, 20_000, seed=8)
        rows = comparison_rows(st.to_json(), predict_session(bec_z).to_json())
        assert [r["quantity"] for r in rows] == ["mean_rounds", "rate", "delay", "undetected_errors"]
        assert all(r["pass"] for r in rows)

    def test_tolerance(self):
        pred = {"mean_rounds": 2.0, "r_bar": 0.5, "n_bar": 4.0}
        stats = {"mean_rounds": 2.05, "empirical_rate": 0.5, "mean_delay": 4.0, "undetected_errors": 1}
        rows = {r["quantity"]: r for r in comparison_rows(stats, pred, 0.02)}
        assert not rows["mean_rounds"]["pass"] and rows["rate"]["pass"]
        assert not rows["undetected_errors"]["pass"]
        assert rows["mean_rounds"]["delta"] == pytest.approx(0.05)
