from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from vdsa.core import (ChannelSet, CbrEstimate, SensingLedger, estimate_cbr, sample_channels,
                       select_channel)
from vdsa.errors import DomainError


def test_estimate_direct():
    est = CbrEstimate((2,), (8,))
    assert est.fractions() == (Fraction(1, 4),)
    assert est.values[0] == 0.25


def test_never_busy_channel():
    assert CbrEstimate((0,), (5,)).values[0] == 0.0


def test_estimate_sums_over_iterations():
    ledger = SensingLedger([[0, 1], [1, 2]], [[2, 2], [2, 2]])
    est = estimate_cbr(ledger)
    assert est.busy == (1, 3) and est.samples == (4, 4)
    assert est.fractions() == (Fraction(1, 4), Fraction(3, 4))


def test_estimate_at_earlier_iteration():
    ledger = SensingLedger([[0, 1], [1, 2]], [[2, 2], [2, 2]])
    assert estimate_cbr(ledger, 0).fractions() == (Fraction(0), Fraction(1, 2))


def test_unobserved_channel_gets_sentinel():
    est = CbrEstimate((1, 0), (2, 0))
    assert est.observed == (True, False)
    assert est.fractions()[1] == Fraction(1, 2)


def test_ledger_rejects_busy_above_samples():
    with pytest.raises(DomainError):
        SensingLedger([[3, 0]], [[2, 2]])


def test_ledger_rejects_negative():
    with pytest.raises(DomainError):
        SensingLedger([[-1, 0]], [[2, 2]])


def test_empty_ledger_cumulative_raises():
    with pytest.raises(DomainError):
        SensingLedger.empty(3).cumulative()


def test_ledger_is_read_only():
    ledger = SensingLedger.empty(2).append([1, 0], [2, 2])
    with pytest.raises(ValueError):
        ledger.busy[0, 0] = 0
    assert ledger.n_iterations == 1 and ledger.budget(0) == 4


def test_ledger_channel_count_fixed():
    ledger = SensingLedger.empty(2).append([1, 0], [2, 2])
    with pytest.raises(DomainError):
        ledger.append([0, 0, 0], [1, 1, 1])


def test_select_unique_minimum():
    assert select_channel([0.3, 0.1, 0.6]) == 1


def test_select_single_channel():
    assert select_channel([0.0]) == 0


def test_select_ties_uniform():
    rng = np.random.default_rng(2024)
    n = 20_000
    picks = np.array([select_channel([0.2, 0.2, 0.9], rng) for _ in range(n)])
    assert set(np.unique(picks)) == {0, 1}
    # two-sided binomial test at 1e-4
    assert stats.binomtest(int((picks == 0).sum()), n, 0.5).pvalue > 1e-4


def test_select_exact_rational_comparison():
    # 1/3 and 2/6 are equal as rationals
    est = CbrEstimate((1, 2, 5), (3, 6, 6))
    picks = {select_channel(est, np.random.default_rng(s)) for s in range(50)}
    assert picks == {0, 1}


def test_select_all_unobserved_raises():
    with pytest.raises(DomainError):
        select_channel(CbrEstimate((0, 0), (0, 0)))


def test_channel_set_validation():
    with pytest.raises(DomainError):
        ChannelSet((0.2,))
    with pytest.raises(DomainError):
        ChannelSet((0.2, 1.2))
    cs = ChannelSet((0.2, 0.1, 0.1))
    assert cs.optimal_set() == (1, 2) and cs.wrong_set() == (0,)


def test_sample_degenerate_probabilities():
    k = sample_channels(ChannelSet((0.0, 1.0)), (3, 3), seed=1)
    assert k.tolist() == [0, 3]


def test_sample_law_of_large_numbers():
    k = sample_channels(ChannelSet((0.5, 0.5)), (10**6, 1), seed=11)
    assert abs(k[0] / 10**6 - 0.5) < 0.002


def test_sample_deterministic():
    cs = ChannelSet((0.2, 0.35, 0.6, 0.8))
    a = sample_channels(cs, (5, 5, 5, 5), seed=42)
    b = sample_channels(cs, (5, 5, 5, 5), seed=42)
    assert a.tolist() == b.tolist()


def test_sample_plan_validation():
    cs = ChannelSet((0.2, 0.3))
    with pytest.raises(DomainError):
        sample_channels(cs, (1, 2, 3))
    with pytest.raises(DomainError):
        sample_channels(cs, (1, -1))
