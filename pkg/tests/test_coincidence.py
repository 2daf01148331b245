import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fockconvert.coincidence import (
    DETECTORS,
    PAIR_NAMES,
    PAIRS,
    CoincidenceCounts,
    PortLosses,
    SourceModel,
    effective_success,
    effective_transmittance,
    run_pulses,
    spurious_fraction,
    sweep,
    sweep_to_csv,
    tag,
    tag_pair,
)
from fockconvert.fock import DomainError


def counts_with(pairs=None, singles=None, **kw):
    c = CoincidenceCounts(**kw)
    for name, n in (pairs or {}).items():
        c.pairs[PAIR_NAMES.index(name)] = n
    for name, n in (singles or {}).items():
        c.singles[DETECTORS.index(name)] = n
    return c


def idx(name):
    return DETECTORS.index(name)


def test_tag_out_with_aux1():
    t = tag_pair(idx("D2A"), idx("D1B"))
    assert t.successful and t.weight == 1


def test_tag_out_with_aux2():
    t = tag_pair(idx("D0A"), idx("D2B"))
    assert t.successful and t.weight == 1


@pytest.mark.parametrize("a,b", [("D1A", "D1B"), ("D0A", "D0B"), ("D2A", "D2B")])
def test_tag_same_port_double_weight(a, b):
    t = tag_pair(idx(a), idx(b))
    assert not t.successful and t.weight == 2


def test_tag_aux_cross_pair():
    t = tag_pair(idx("D0B"), idx("D1A"))
    assert not t.successful and t.weight == 1


def test_tag_empty():
    assert tag(CoincidenceCounts()) == (0, 0)


def test_tag_class_census():
    weights = [tag_pair(a, b) for a, b in PAIRS]
    assert len(weights) == 15
    assert sum(t.successful for t in weights) == 8
    assert sum(t.weight == 2 for t in weights) == 3


@given(st.lists(st.integers(0, 10_000), min_size=15, max_size=15))
def test_weighted_total(pair_counts):
    c = CoincidenceCounts(pairs=np.array(pair_counts, dtype=np.int64))
    same = sum(n for (a, b), n in zip(PAIRS, pair_counts) if a // 2 == b // 2)
    other = sum(pair_counts) - same
    assert sum(tag(c)) == other + 2 * same


def test_effective_transmittance_equal_singles():
    c = CoincidenceCounts(singles=np.full(6, 500, dtype=np.int64))
    assert effective_transmittance(c)[0] == pytest.approx(2 / 3)


def test_effective_transmittance_no_aux1():
    c = counts_with(singles={"D0A": 3, "D2B": 7})
    assert effective_transmittance(c)[0] == 1.0


def test_effective_transmittance_empty():
    with pytest.raises(DomainError):
        effective_transmittance(CoincidenceCounts())


def test_effective_success_all_successful():
    c = counts_with({"D0A-D2A": 40, "D1B-D2B": 60})
    P, se = effective_success(c)
    assert P == 1.0 and se == 0.0


def test_effective_success_weighted():
    c = counts_with({"D1A-D2A": 30, "D2A-D2B": 10, "D0A-D1A": 5})
    P, _ = effective_success(c)
    assert P == pytest.approx(30 / (30 + 20 + 5))


def test_effective_success_empty():
    with pytest.raises(DomainError):
        effective_success(CoincidenceCounts())


def test_transparent_first_splitter():
    # no reflection at BS1 and none at BS2 with T2=1
    c = run_pulses(SourceModel.fock2(), 1.0, 1.0, n_pulses=20_000, seed=1)
    assert c.pair("D2A", "D2B") == c.pairs.sum()
    assert c.singles[:4].sum() == 0


def test_feedforward_optimum_fock2():
    c = run_pulses(SourceModel.fock2(), 2 / 3, 0.5, n_pulses=10**6, seed=2)
    P, se = effective_success(c)
    assert abs(P - 2 / 3) <= 4 * se
    assert spurious_fraction(c) == 0.0


def test_coherent_matches_fock2():
    c = run_pulses(SourceModel.coherent(0.05), 2 / 3, 0.5, n_pulses=4 * 10**6, seed=3)
    P, se = effective_success(c)
    assert abs(P - 2 / 3) <= 4 * se
    assert 0.0 < spurious_fraction(c) < 0.015


@pytest.mark.parametrize("t1", [0.2, 0.5, 0.8, 0.95])
def test_feedforward_curve_fock2(t1):
    # Fock(2) singles are biased by same-detector pile-up, so read the
    # curve at the configured splitter setting
    row = sweep(SourceModel.fock2(), [t1], 0.5, n_pulses=10**6, seed=int(100 * t1))[0]
    assert abs(row.P_exp - (2 * t1 - 1.5 * t1**2)) <= 4 * row.se


@pytest.mark.parametrize("t1", [0.25, 0.5, 0.75])
def test_single_block_curve_fock2(t1):
    row = sweep(SourceModel.fock2(), [t1], 1.0, n_pulses=10**6, seed=int(100 * t1), feedforward=False)[0]
    assert row.scheme == "k=1"
    assert abs(row.P_exp - 2 * t1 * (1 - t1)) <= 4 * row.se


@pytest.mark.parametrize("t1", [0.25, 0.75])
def test_fock2_singles_pileup(t1):
    # lossless, T2 = 1: photons sharing a port give 2 clicks half the time
    T = t1
    split = 2 * T * (1 - T)
    expected = (1.5 * T**2 + split) / (1.5 * T**2 + 1.5 * (1 - T) ** 2 + 2 * split)
    c = run_pulses(SourceModel.fock2(), t1, 1.0, n_pulses=10**6, seed=3, feedforward=False)
    T_eff, se = effective_transmittance(c)
    assert abs(T_eff - expected) <= 4 * se


@pytest.mark.parametrize("t1,feedforward", [(0.4, True), (0.663, True), (0.3, False), (0.6, False)])
def test_curves_against_effective_transmittance(t1, feedforward):
    row = sweep(SourceModel.coherent(0.05), [t1], 0.5 if feedforward else 1.0, n_pulses=2 * 10**6, seed=17,
                feedforward=feedforward)[0]
    T = row.T_eff
    bound = 2 * T - 1.5 * T**2 if feedforward else 2 * T * (1 - T)
    assert abs(row.P_exp - bound) <= 4 * row.se


@pytest.mark.parametrize("t1", [0.4, 0.663])
def test_balanced_losses_keep_transmittance(t1):
    c = run_pulses(SourceModel.coherent(0.05), t1, 0.5, PortLosses.balanced(0.7), 0.8, 10**6, seed=4)
    T, se = effective_transmittance(c)
    assert abs(T - t1) <= 4 * se


def test_unbalanced_losses_bias_transmittance():
    c = run_pulses(SourceModel.coherent(0.05), 0.5, 0.5, PortLosses(0.5, 1.0, 1.0), 1.0, 10**6, seed=4)
    T, se = effective_transmittance(c)
    assert T - 0.5 > 10 * se


def test_spurious_tracks_ground_truth():
    c = run_pulses(SourceModel.coherent(0.05), 0.663, 0.5, n_pulses=4 * 10**6, seed=6)
    truth = c.true_spurious / c.pairs.sum()
    est = spurious_fraction(c)
    assert truth / 2 <= est <= truth * 2


def test_halving_mu_lowers_fraction_and_rate():
    hi = run_pulses(SourceModel.coherent(0.05), 0.663, 0.5, n_pulses=4 * 10**6, seed=7)
    lo = run_pulses(SourceModel.coherent(0.025), 0.663, 0.5, n_pulses=4 * 10**6, seed=7)
    assert spurious_fraction(lo) < spurious_fraction(hi)
    assert lo.pairs.sum() < hi.pairs.sum()


def test_pairs_only_from_two_click_pulses():
    c = run_pulses(SourceModel.coherent(0.5), 0.5, 0.5, n_pulses=200_000, seed=8)
    assert c.higher > 0
    # every pair event contributes exactly two singles; higher events at least three
    assert c.singles.sum() >= 2 * c.pairs.sum() + 3 * c.higher


def test_deterministic_and_thread_independent():
    a = run_pulses(SourceModel.coherent(0.1), 0.6, 0.4, n_pulses=300_000, seed=9, threads=1)
    b = run_pulses(SourceModel.coherent(0.1), 0.6, 0.4, n_pulses=300_000, seed=9, threads=3)
    assert a.to_json() == b.to_json()


def test_counts_json_roundtrip():
    c = run_pulses(SourceModel.coherent(0.2), 0.6, 0.5, n_pulses=50_000, seed=10)
    doc = json.loads(json.dumps(c.to_json()))
    assert set(doc) == {"singles", "pairs", "higher", "pulses"}
    assert "D0A-D1B" in doc["pairs"] and len(doc["pairs"]) == 15
    back = CoincidenceCounts.from_json(doc, c.source)
    assert back.to_json() == c.to_json()
    assert spurious_fraction(back) == spurious_fraction(c)


def test_sweep_csv_header():
    rows = sweep(SourceModel.fock2(), [0.5, 0.7], 0.5, n_pulses=10_000, seed=0)
    lines = sweep_to_csv(rows).splitlines()
    assert lines[0] == "T_eff,P_exp,SE,scheme"
    assert len(lines) == 3 and lines[1].endswith(",k=2")


def test_validation():
    with pytest.raises(DomainError):
        SourceModel.coherent(0.0)
    with pytest.raises(DomainError):
        SourceModel("thermal")
    with pytest.raises(DomainError):
        PortLosses(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        run_pulses(SourceModel.fock2(), 0.5, 0.5, n_pulses=0)
    with pytest.raises(DomainError):
        run_pulses(SourceModel.fock2(), 1.5, 0.5, n_pulses=10)
