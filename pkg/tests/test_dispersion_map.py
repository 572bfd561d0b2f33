import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmnls.dispersion_map import (
    NAMED_MAPS,
    SYMMETRIC,
    THREE_PIECE,
    TWO_PIECE,
    UNIT,
    Gamma,
    gamma_at,
    gamma_deviation_sup,
    named_map,
    one_period_extremum,
    validate_admissible,
)
from dmnls.errors import AdmissibilityError, InvalidParameterError

from oracles import brute_force_extremum, gamma_by_quadrature

EPS_SWEEP = [2.0**-k for k in range(2, 11)]


def test_single_segment_is_unit():
    m = validate_admissible([(1.0, 1.0)])
    assert m.is_unit and m.mean == 1.0
    assert gamma_at(m, 0.3) == 1.0


def test_two_piece_accepted_with_mean_one():
    m = validate_admissible([(0.5, 3.0), (0.5, -1.0)])
    assert m.mean == 1.0
    assert (m.gamma_min, m.gamma_max) == (1.0, 3.0)


@pytest.mark.parametrize(
    "segments,condition",
    [
        ([(0.5, 2.0), (0.5, 0.0)], "zero-value"),
        ([(0.5, 1.0), (0.4, 1.0)], "coverage"),
        ([(0.5, 2.0), (0.5, 1.0)], "mean"),
        ([(1.0, float("inf"))], "bounded"),
        ([(1.5, 1.0), (-0.5, 1.0)], "coverage"),
        ([], "empty"),
    ],
)
def test_rejections_name_the_condition(segments, condition):
    with pytest.raises(AdmissibilityError) as info:
        validate_admissible(segments)
    assert info.value.condition == condition


def test_three_piece_with_quarter_lengths_has_mean_zero_and_is_rejected():
    # {2, 2, -2} on lengths {1/4, 1/4, 1/2} averages to 0, not 1
    with pytest.raises(AdmissibilityError) as info:
        validate_admissible([(0.25, 2.0), (0.25, 2.0), (0.5, -2.0)])
    assert info.value.condition == "mean"


def test_named_maps_are_admissible_and_lookup_is_forgiving():
    for m in NAMED_MAPS.values():
        assert abs(m.mean - 1.0) <= 1e-12
    assert named_map("Two_Piece") is TWO_PIECE
    with pytest.raises(KeyError):
        named_map("four-piece")
    assert SYMMETRIC.is_symmetric() and not TWO_PIECE.is_symmetric()


@pytest.mark.parametrize("t,expected", [(0.25, 3.0), (1.75, -1.0), (0.5, -1.0), (0.0, 3.0), (-0.25, -1.0)])
def test_gamma_at_lookup_periodicity_and_right_continuity(t, expected):
    assert gamma_at(TWO_PIECE, t) == expected


def test_gamma_unit_map_is_identity():
    t = np.linspace(-3, 7, 11)
    np.testing.assert_array_equal(Gamma(UNIT, 0.01, 0.0, t), t)


@pytest.mark.parametrize("dmap", [TWO_PIECE, SYMMETRIC, THREE_PIECE], ids=lambda m: m.name)
@pytest.mark.parametrize("k", [1, 3, 17, -5])
def test_whole_periods_contribute_their_length(dmap, k):
    eps, t0 = 0.1, 0.037
    assert Gamma(dmap, eps, t0, t0 + k * eps) == pytest.approx(k * eps, abs=1e-13)


def test_hand_computed_partial_segment():
    assert Gamma(TWO_PIECE, 0.1, 0.0, 0.05) == pytest.approx(0.15, abs=1e-15)


@pytest.mark.parametrize("eps", [0.0, -0.1])
def test_nonpositive_eps_rejected(eps):
    with pytest.raises(InvalidParameterError):
        Gamma(TWO_PIECE, eps, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        gamma_deviation_sup(TWO_PIECE, eps, 1.0)


times = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(eps=st.floats(1e-3, 1.0), t0=times, t1=times, t2=times, name=st.sampled_from(sorted(NAMED_MAPS)))
def test_additivity_and_antisymmetry(eps, t0, t1, t2, name):
    m = NAMED_MAPS[name]
    span = max(1.0, abs(t0), abs(t1), abs(t2))
    lhs = Gamma(m, eps, t0, t1) + Gamma(m, eps, t1, t2)
    assert abs(lhs - Gamma(m, eps, t0, t2)) <= 1e-12 * span
    assert Gamma(m, eps, t0, t1) == -Gamma(m, eps, t1, t0)


@pytest.mark.parametrize("dmap", [TWO_PIECE, THREE_PIECE], ids=lambda m: m.name)
def test_agrees_with_adaptive_quadrature(dmap):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        eps = 10 ** rng.uniform(-2, 0)
        t0, t = rng.uniform(-2, 2, size=2)
        exact = gamma_by_quadrature(lambda s: gamma_at(dmap, s), eps, t0, t, dmap.breakpoints)
        worst = max(worst, abs(Gamma(dmap, eps, t0, t) - exact))
    assert worst <= 1e-9


def test_deviation_examples():
    assert gamma_deviation_sup(UNIT, 0.1, 10.0) == 0.0
    for eps in (0.25, 0.125):
        assert gamma_deviation_sup(TWO_PIECE, eps, 10.0) == pytest.approx(eps, rel=1e-12)


@pytest.mark.parametrize("dmap", [TWO_PIECE, SYMMETRIC, THREE_PIECE], ids=lambda m: m.name)
def test_deviation_is_linear_in_eps(dmap):
    ratios = [gamma_deviation_sup(dmap, e, 10.0) / e for e in EPS_SWEEP]
    assert max(ratios) - min(ratios) <= 1e-9 * ratios[0]
    assert ratios[0] == pytest.approx(one_period_extremum(dmap), rel=1e-9)


@pytest.mark.parametrize("dmap", [TWO_PIECE, SYMMETRIC, THREE_PIECE], ids=lambda m: m.name)
def test_one_period_extremum_matches_brute_force(dmap):
    lengths = [length for length, _ in dmap.segments()]
    assert one_period_extremum(dmap) == pytest.approx(brute_force_extremum(dmap.values, lengths), abs=1e-9)


def test_hand_extrema():
    assert one_period_extremum(TWO_PIECE) == 1.0
    assert one_period_extremum(SYMMETRIC) == 0.5
    assert one_period_extremum(THREE_PIECE) == pytest.approx(0.75, abs=1e-15)
