import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isred import scenarios
from isred.core import (
    AffineObservation,
    AffinePolicy,
    Dm,
    Exact,
    FinitePrimitives,
    GameSpec,
    GaussianPrimitives,
    MonteCarlo,
    PolicyProfile,
    QuadraticCost,
    Variant,
    check_condition_C,
    compose_actions,
    expected_cost,
    validate_partial_nestedness,
    zero_profile,
)
from isred.errors import ArgumentError, StructuralError


# -- validation --------------------------------------------------------------


def test_example_games_are_nested():
    game = scenarios.example_nonexistence()
    report = validate_partial_nestedness(game)
    assert report.nested
    assert report.witnesses[1] == [0]


def test_uncoupled_game_is_trivially_nested():
    prims = GaussianPrimitives(np.zeros(2), np.eye(2), (("a", 1), ("b", 1)))
    obs = (AffineObservation([[1.0, 0.0]]), AffineObservation([[0.0, 1.0]]))
    game = GameSpec(prims, (Dm("x", 1, 1), Dm("y", 2, 1)), obs, (QuadraticCost.zero(4),) * 2)
    assert validate_partial_nestedness(game).nested


def test_missing_forwarded_information_is_a_violation():
    game = scenarios.gaussian_channel()
    report = validate_partial_nestedness(game)
    assert not report.nested
    assert report.violations == [((2, 1), (1, 1))]


def test_dynamic_variant_rejects_non_nested_game():
    game = scenarios.gaussian_channel()
    with pytest.raises(StructuralError):
        game.with_variant(Variant.DYNAMIC)


def test_forward_reference_is_rejected():
    prims = GaussianPrimitives(np.zeros(1), np.eye(1), (("a", 1),))
    obs = (AffineObservation([[1.0]], D=[[1.0]], precedence=(1,)), AffineObservation([[1.0]]))
    with pytest.raises(StructuralError):
        GameSpec(prims, (Dm("x", 1, 1), Dm("y", 2, 1)), obs, (QuadraticCost.zero(3),) * 2)


def test_bad_dimensions_are_rejected():
    prims = GaussianPrimitives(np.zeros(1), np.eye(1), (("a", 1),))
    obs = (AffineObservation([[1.0]]), AffineObservation([[1.0]], D=[[1.0, 2.0]], precedence=(0,)))
    with pytest.raises(StructuralError):
        GameSpec(prims, (Dm("x", 1, 1), Dm("y", 2, 1)), obs, (QuadraticCost.zero(3),) * 2)


def test_primitive_invariants():
    with pytest.raises(StructuralError):
        GaussianPrimitives(np.zeros(2), np.diag([1.0, 0.0]), (("a", 2),))
    with pytest.raises(StructuralError):
        FinitePrimitives((("a", [0.5, 0.6]),))


def test_zero_sum_flag_requires_negated_costs():
    game = scenarios.example_concave_reduction()
    with pytest.raises(StructuralError):
        game.replace(costs=(game.costs[0], game.costs[0]))


# -- composition -------------------------------------------------------------


def test_zero_profile_composes_to_zero():
    game = scenarios.example_nonexistence()
    amap = compose_actions(game, zero_profile(game))
    L, m = amap.stacked()
    assert not L.any() and not m.any()


def test_copying_policy_passes_noise_through():
    game = scenarios.example_concave_reduction()
    amap = compose_actions(game, scenarios.two_dm_profile(1.0))
    np.testing.assert_array_equal(amap.gains[0], [[0.0, 0.0]])
    np.testing.assert_array_equal(amap.gains[1], [[0.0, 1.0]])


def test_finite_relay_composition():
    game = scenarios.relay_game()
    prof = scenarios.table_profile([0, 1], [1, 0])
    table = compose_actions(game, prof).as_dict(game)
    assert table == {(0,): (0, 1), (1,): (1, 0)}


def _random_nested_chain(seed):
    rng = np.random.default_rng(seed)
    n = 4
    prims = GaussianPrimitives(rng.normal(size=n), np.eye(n) + 0.2 * np.ones((n, n)), (("z", n),))
    obs = [AffineObservation(rng.normal(size=(1, n)))]
    obs.append(AffineObservation(rng.normal(size=(1, n)), G=[[2.0]], D=rng.normal(size=(1, 1)), precedence=(0,), forward=(0,)))
    obs.append(AffineObservation(rng.normal(size=(2, n))))
    obs.append(
        AffineObservation(rng.normal(size=(1, n)), D=rng.normal(size=(1, 2)), precedence=(1, 2), forward=(0, 1, 2))
    )
    dms = (Dm("a", 1, 1), Dm("b", 2, 1), Dm("c", 1, 2), Dm("d", 2, 2))
    nz = n + 4
    A = rng.normal(size=(nz, nz))
    costs = (QuadraticCost(A @ A.T, rng.normal(size=nz), 1.0), QuadraticCost(np.eye(nz), np.zeros(nz), 0.0))
    game = GameSpec(prims, dms, obs, costs, Variant.DYNAMIC)
    pols = tuple(
        AffinePolicy(rng.normal(size=(1, game.info_dim(d))), rng.normal(size=1)) for d in range(4)
    )
    return game, PolicyProfile(pols, Variant.DYNAMIC)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_composition_ignores_processing_order(seed):
    game, prof = _random_nested_chain(seed)
    base = compose_actions(game, prof)
    alt = compose_actions(game, prof, order=[0, 2, 1, 3])
    for a, b in zip(base.gains + base.offsets, alt.gains + alt.offsets):
        np.testing.assert_allclose(a, b, atol=1e-14, rtol=0)


def test_non_topological_order_is_rejected():
    game, prof = _random_nested_chain(0)
    with pytest.raises(StructuralError):
        compose_actions(game, prof, order=[1, 0, 2, 3])


# -- expected cost -----------------------------------------------------------


def test_zero_cost_is_zero():
    game = scenarios.example_nonexistence()
    game = game.replace(costs=(QuadraticCost.zero(4), QuadraticCost.zero(4)))
    np.testing.assert_array_equal(expected_cost(game, zero_profile(game)).values, [0.0, 0.0])


def test_copying_maximizer_cancels_quadratic_term():
    game = scenarios.example_concave_reduction(0.5)
    J = expected_cost(game, scenarios.two_dm_profile(1.0)).values
    assert J[0] == pytest.approx(0.0, abs=1e-14)


def test_cancelling_policy_costs_target_squared():
    game = scenarios.example_nonexistence(1.0)
    J = expected_cost(game, scenarios.two_dm_profile(-1.0)).values
    np.testing.assert_allclose(J, [1.0, 0.0], atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 3)
)
def test_exact_cost_matches_hand_formula(a, c, p, q, r, B):
    game = scenarios.example_nonexistence(B)
    prof = PolicyProfile(
        (AffinePolicy([[a]], [c]), AffinePolicy([[p, q]], [r])), Variant.DYNAMIC
    )
    want = ((1 + q) * a + p) ** 2 + (1 + q) ** 2 + ((1 + q) * c + r - B) ** 2
    got = expected_cost(game, prof).values[0]
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_monte_carlo_agrees_with_exact():
    game = scenarios.example_nonexistence(1.0)
    prof = PolicyProfile((AffinePolicy([[0.3]], [0.2]), AffinePolicy([[0.1, -0.5]], [0.4])), Variant.DYNAMIC)
    exact = expected_cost(game, prof).values
    mc = expected_cost(game, prof, MonteCarlo(n=200_000, seed=7))
    assert np.all(np.abs(mc.values - exact) <= 4 * mc.stderr)


def test_monte_carlo_needs_samples():
    game = scenarios.example_nonexistence()
    with pytest.raises(ArgumentError):
        expected_cost(game, zero_profile(game), MonteCarlo(n=0))


def test_zero_sum_costs_negate():
    game = scenarios.example_concave_lift()
    prof = scenarios.two_dm_profile(0.7, 0.2, variant=Variant.STATIC)
    J = expected_cost(game, prof, Exact()).values
    assert abs(J[0] + J[1]) <= 1e-12


def test_finite_exact_cost_by_enumeration():
    game = scenarios.relay_game(p=0.3)
    prof = scenarios.table_profile([0, 1], [0, 0])
    # mismatch only when w0 = 1
    np.testing.assert_allclose(expected_cost(game, prof).values, [0.3, 0.3], atol=1e-15)


def test_profile_variant_must_match_game():
    game = scenarios.example_nonexistence()
    with pytest.raises(StructuralError):
        expected_cost(game, scenarios.two_dm_profile(1.0, variant=Variant.STATIC))


# -- condition C --------------------------------------------------------------


def test_affine_profiles_satisfy_condition_c():
    game = scenarios.example_nonexistence()
    res = check_condition_C(game, scenarios.two_dm_profile(-1.0))
    assert all(r.holds for r in res)
    np.testing.assert_array_equal(res[1].coefficient, [[-1.0]])


def test_xor_response_violates_condition_c():
    game = scenarios.xor_channel_game()
    prof = scenarios.table_profile([0, 1], [0, 1])
    res = check_condition_C(game, prof)
    assert res[0].holds
    assert not res[1].holds


def test_copy_response_satisfies_condition_c():
    game = scenarios.relay_game()
    res = check_condition_C(game, scenarios.table_profile([0, 1], [0, 1]))
    assert res[1].holds
    np.testing.assert_allclose(res[1].coefficient, [1.0])
