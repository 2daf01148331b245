import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockconvert.fock import (
    BeamSplitter,
    ClickPair,
    DetectorModel,
    DomainError,
    IdealPNR,
    InefficientPNR,
    PhotonNumberMixture,
    apply_loss,
    detect,
    splitting_distribution,
)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@st.composite
def mixtures(draw, max_photons=12):
    cap = draw(st.integers(0, max_photons))
    w = draw(st.lists(st.floats(0.0, 1.0), min_size=cap + 1, max_size=cap + 1))
    if sum(w) == 0.0:
        w[-1] = 1.0
    _, mix = PhotonNumberMixture.from_weights(w)
    return mix


def path_enumeration(m, T):
    """Each photon independently transmits (prob T) or reflects; sum over all 2^m paths."""
    T = Fraction(T)
    out = {}
    for path in itertools.product((0, 1), repeat=m):
        r = sum(path)
        p = Fraction(1)
        for reflected in path:
            p *= (1 - T) if reflected else T
        out[(m - r, r)] = out.get((m - r, r), 0) + p
    return out


def test_split_two_photons_balanced():
    d = splitting_distribution(2, 0.5)
    assert d == pytest.approx({(2, 0): 0.25, (1, 1): 0.5, (0, 2): 0.25}, abs=1e-15)


def test_split_fully_transmitting():
    d = splitting_distribution(5, 1.0)
    assert d[(5, 0)] == 1.0
    assert sum(d.values()) == 1.0


def test_split_three_photons_third():
    expected = path_enumeration(3, Fraction(1, 3))
    assert expected == {(3, 0): Fraction(1, 27), (2, 1): Fraction(6, 27), (1, 2): Fraction(12, 27), (0, 3): Fraction(8, 27)}
    d = splitting_distribution(3, 1 / 3)
    for key, p in expected.items():
        assert d[key] == pytest.approx(float(p), abs=1e-15)


@pytest.mark.parametrize("m", [0, 1, 4, 7])
@pytest.mark.parametrize("T", [0.0, 0.3, 0.5, 1.0])
def test_split_matches_path_enumeration(m, T):
    expected = path_enumeration(m, Fraction(T).limit_denominator(100))
    d = splitting_distribution(m, T)
    for key, p in expected.items():
        assert d[key] == pytest.approx(float(p), abs=1e-14)


@pytest.mark.parametrize("T", [-0.1, 1.5, float("nan")])
def test_split_rejects_bad_transmittance(T):
    with pytest.raises(DomainError):
        splitting_distribution(2, T)
    with pytest.raises(DomainError):
        BeamSplitter(T)


@given(st.integers(0, 64), unit)
def test_split_normalized(m, T):
    assert sum(splitting_distribution(m, T).values()) == pytest.approx(1.0, abs=1e-12)


def test_loss_examples():
    assert apply_loss(PhotonNumberMixture.fock(2), 1.0).to_dict() == {2: 1.0}
    assert apply_loss(PhotonNumberMixture.fock(1), 0.6).probs == pytest.approx((0.4, 0.6))
    assert apply_loss(PhotonNumberMixture.fock(2), 0.5).probs == pytest.approx((0.25, 0.5, 0.25))


def test_loss_equals_splitter_marginal():
    d = splitting_distribution(6, 0.35)
    thinned = apply_loss(PhotonNumberMixture.fock(6), 0.35)
    for (t, _), p in d.items():
        assert thinned[t] == pytest.approx(p, abs=1e-15)


@given(mixtures(), unit, unit)
def test_loss_composition(state, a, b):
    lhs = apply_loss(apply_loss(state, a), b).as_array()
    rhs = apply_loss(state, a * b).as_array()
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@given(mixtures(), unit)
def test_loss_mean_scales_linearly(state, eta):
    assert apply_loss(state, eta).mean() == pytest.approx(eta * state.mean(), abs=1e-12)


@given(mixtures(), unit)
def test_loss_preserves_normalization(state, eta):
    assert sum(apply_loss(state, eta).probs) == pytest.approx(1.0, abs=1e-12)


def test_mixture_validation():
    with pytest.raises(DomainError):
        PhotonNumberMixture((0.5, 0.4))
    with pytest.raises(DomainError):
        PhotonNumberMixture((1.1, -0.1))
    with pytest.raises(DomainError):
        PhotonNumberMixture((0.0, 0.0, 1.0), max_photons=1)
    with pytest.raises(DomainError):
        PhotonNumberMixture.fock(65)
    mix = PhotonNumberMixture.from_dict({0: 0.25, 3: 0.75})
    assert mix.max_photons == 3
    assert mix.to_json() == {"0": 0.25, "3": 0.75}
    assert PhotonNumberMixture.from_weights([0.0, 0.0]) == (0.0, None)


def _as_map(outcomes):
    return {o.label: o.prob for o in outcomes}


def test_detect_ideal_single_photon():
    assert _as_map(detect(PhotonNumberMixture.fock(1), IdealPNR())) == {1: 1.0}


def test_detect_click_pair_two_photons():
    assert _as_map(detect(PhotonNumberMixture.fock(2), ClickPair(1.0))) == pytest.approx({2: 0.5, 1: 0.5})


def test_detect_inefficient_two_photons():
    out = _as_map(detect(PhotonNumberMixture.fock(2), InefficientPNR(0.6)))
    assert out == pytest.approx({2: 0.36, 1: 0.48, 0: 0.16}, abs=1e-15)


def test_detect_removed_photons():
    state = PhotonNumberMixture((0.0, 0.5, 0.5))
    zero = [o for o in detect(state, InefficientPNR(0.5)) if o.label == 0][0]
    # P(n=1, miss) = 0.25, P(n=2, miss both) = 0.125
    assert zero.prob == pytest.approx(0.375)
    assert zero.removed.probs == pytest.approx((0.0, 2 / 3, 1 / 3))


def test_click_pair_many_photons():
    for n in range(1, 8):
        out = _as_map(detect(PhotonNumberMixture.fock(n), ClickPair(1.0)))
        assert out.get(2, 0.0) == pytest.approx(1 - 2.0 ** (1 - n))
        assert out[1] == pytest.approx(2.0 ** (1 - n))


def test_detector_validation():
    with pytest.raises(DomainError):
        DetectorModel("ideal_pnr", 0.5)
    with pytest.raises(DomainError):
        InefficientPNR(1.2)
    with pytest.raises(DomainError):
        DetectorModel("bolometer")


@given(mixtures(), st.sampled_from(["ideal", "pnr", "click"]), unit)
def test_detect_normalized(state, kind, eta):
    det = {"ideal": IdealPNR(), "pnr": InefficientPNR(eta), "click": ClickPair(eta)}[kind]
    assert sum(o.prob for o in detect(state, det)) == pytest.approx(1.0, abs=1e-12)


@given(mixtures(), unit)
def test_detector_loss_commutation(state, eta):
    lhs = _as_map(detect(state, InefficientPNR(eta)))
    rhs = _as_map(detect(apply_loss(state, eta), IdealPNR()))
    for label in set(lhs) | set(rhs):
        assert lhs.get(label, 0.0) == pytest.approx(rhs.get(label, 0.0), abs=1e-12)
