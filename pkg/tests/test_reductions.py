import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isred import scenarios
from isred.core import (
    AffineObservation,
    AffinePolicy,
    Dm,
    FinitePrimitives,
    GameSpec,
    GaussianPrimitives,
    MonteCarlo,
    PolicyProfile,
    QuadraticCost,
    TableCost,
    TableObservation,
    TablePolicy,
    Variant,
    compose_actions,
    expected_cost,
)
from isred.errors import IsredError, ReductionRefused
from isred.finite import all_tables
from isred.reductions import (
    control_sharing_expand,
    control_sharing_lift,
    control_sharing_reduce,
    embed_profile,
    policy_dependent_lift,
    policy_dependent_reduce,
    policy_independent_reduce,
)


# -- policy-independent reduction ---------------------------------------------


def _own_noise_game():
    # DM observes a fair coin that is its own noise block; cost ignores it
    prims = FinitePrimitives((("w0", [0.3, 0.7]), ("n", [0.5, 0.5])))
    table = np.array([0, 1, 0, 1])  # outcome = 2*w0 + n
    obs = (TableObservation(2, table, noise_block="n"),)
    cost = np.array([[0.0, 1.0], [0.0, 1.0], [2.0, 0.5], [2.0, 0.5]])
    game = GameSpec(prims, (Dm("a", 1, 1, 2),), obs, (TableCost(cost),))
    return game


def test_action_free_uniform_measurement_has_unit_ratio():
    game = _own_noise_game()
    reduced, cert = policy_independent_reduce(game)
    np.testing.assert_array_equal(cert.density_ratio.factors[0], np.ones((2, 2)))
    # reduced outcomes are (w0, y); the tilted cost equals the original one
    np.testing.assert_array_equal(reduced.costs[0].values, game.costs[0].values)


def test_xor_channel_ratio_against_uniform_reference():
    p = 0.3
    game = scenarios.xor_channel_game(p)
    _, cert = policy_independent_reduce(game)
    f2 = cert.density_ratio.factors[1]  # indexed [w0, y, u1]
    for w in range(2):
        for u in range(2):
            for y in range(2):
                want = 2 * (1 - p) if y == u else 2 * p
                assert f2[w, y, u] == pytest.approx(want, abs=1e-15)
    assert cert.density_ratio.normalization_error() <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 15), st.integers(0, 15), st.floats(0.05, 0.95))
def test_finite_measure_change_identity(t1, t2, p):
    game = scenarios.xor_channel_game(p)
    tabs = all_tables(2, 2)
    prof = scenarios.table_profile(tabs[t1 % 4], tabs[t2 % 4])
    reduced, _ = policy_independent_reduce(game)
    a = expected_cost(game, prof).values
    b = expected_cost(reduced, prof).values
    np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)


def test_gaussian_channel_factor_is_mean_shift():
    game = scenarios.gaussian_channel()
    reduced, cert = policy_independent_reduce(game)
    ratio = cert.density_ratio
    rng = np.random.default_rng(3)
    zeta = rng.normal(size=(5, reduced.n_zeta))  # (w0, y1, y2)
    u = rng.normal(size=(5, 2))
    w0, y1, y2 = zeta.T
    want = (w0 * y1 - w0**2 / 2) + (u[:, 0] * y2 - u[:, 0] ** 2 / 2)
    np.testing.assert_allclose(ratio.log_ratio(zeta, u), want, atol=1e-12)


def test_gaussian_measure_change_monte_carlo():
    game = scenarios.gaussian_channel()
    prof = scenarios.gaussian_channel_profile()
    reduced, _ = policy_independent_reduce(game)
    exact = expected_cost(game, prof).values
    mc = expected_cost(reduced, prof, MonteCarlo(n=200_000, seed=11))
    assert np.all(np.abs(mc.values - exact) <= 4 * mc.stderr)


def test_noiseless_channel_is_refused():
    with pytest.raises(ReductionRefused):
        policy_independent_reduce(scenarios.example_nonexistence())


# -- policy-dependent reduction -----------------------------------------------


def test_copying_profile_reduces_to_noise_copy():
    game = scenarios.example_concave_reduction()
    red = policy_dependent_reduce(game, scenarios.two_dm_profile(1.0))
    np.testing.assert_array_equal(red[1].gain, [[0.0, 1.0]])
    amap = compose_actions(game.with_variant(Variant.STATIC), red)
    np.testing.assert_array_equal(amap.gains[1], [[0.0, 1.0]])


def test_cancelling_profile_reduces_with_first_policy_subtracted():
    game = scenarios.example_nonexistence()
    # DM 1 plays 0.4 w1 + 0.1; DM 2 plays -y2 so u2 = -w2 - u1
    prof = PolicyProfile((AffinePolicy([[0.4]], [0.1]), AffinePolicy([[0.0, -1.0]], [0.0])), Variant.DYNAMIC)
    red = policy_dependent_reduce(game, prof)
    np.testing.assert_allclose(red[1].gain, [[-0.4, -1.0]], atol=1e-15)
    np.testing.assert_allclose(red[1].offset, [-0.1], atol=1e-15)


def test_lift_of_copy_subtracts_first_policy():
    game = scenarios.example_concave_lift(variant=Variant.DYNAMIC)
    prof = PolicyProfile((AffinePolicy([[0.3]], [0.2]), AffinePolicy([[0.0, 1.0]], [0.0])), Variant.STATIC)
    lifted = policy_dependent_lift(game, prof)
    np.testing.assert_allclose(lifted[1].gain, [[-0.3, 1.0]], atol=1e-15)
    np.testing.assert_allclose(lifted[1].offset, [-0.2], atol=1e-15)


def test_zero_static_profile_lifts_to_zero():
    game = scenarios.example_concave_lift(variant=Variant.DYNAMIC)
    prof = scenarios.two_dm_profile(0.0, variant=Variant.STATIC)
    lifted = policy_dependent_lift(game, prof)
    assert all(not p.gain.any() and not p.offset.any() for p in lifted.policies)


def test_decoupled_game_reduces_verbatim():
    prims = GaussianPrimitives(np.zeros(2), np.eye(2), (("a", 1), ("b", 1)))
    obs = (AffineObservation([[1.0, 0.0]]), AffineObservation([[0.5, 1.0]], G=[[2.0]], forward=(0,)))
    game = GameSpec(prims, (Dm("x", 1, 1), Dm("y", 2, 1)), obs, (QuadraticCost.zero(4),) * 2, Variant.DYNAMIC)
    prof = PolicyProfile((AffinePolicy([[0.7]], [0.1]), AffinePolicy([[0.2, -0.3]], [0.5])), Variant.DYNAMIC)
    red = policy_dependent_reduce(game, prof)
    np.testing.assert_allclose(red[0].gain, prof[0].gain)
    # own block picks up G because the static measurement is H zeta
    np.testing.assert_allclose(red[1].gain, [[0.2, -0.6]])


def random_chain(rng, n_zeta=4):
    prims = GaussianPrimitives(rng.normal(size=n_zeta), np.eye(n_zeta) * 0.5 + 0.5 * np.diag(rng.uniform(0.5, 2, n_zeta)),
                               (("z", n_zeta),))
    G1 = rng.normal(size=(2, 2)) + 3 * np.eye(2)
    obs = (
        AffineObservation(rng.normal(size=(1, n_zeta)), G=[[1.5]]),
        AffineObservation(rng.normal(size=(2, n_zeta)), G=G1, D=rng.normal(size=(2, 1)), precedence=(0,), forward=(0,)),
        AffineObservation(rng.normal(size=(1, n_zeta)), G=[[-0.7]], D=rng.normal(size=(1, 3)), precedence=(0, 1),
                          forward=(0, 1)),
    )
    dms = (Dm("a", 1, 1), Dm("b", 2, 1, 2), Dm("c", 1, 2))
    nz = n_zeta + 4
    A = rng.normal(size=(nz, nz))
    costs = (QuadraticCost(A @ A.T, rng.normal(size=nz)), QuadraticCost(np.eye(nz), np.zeros(nz)))
    return GameSpec(prims, dms, obs, costs, Variant.DYNAMIC)


def random_profile(rng, game, variant):
    return PolicyProfile(
        tuple(AffinePolicy(rng.normal(size=(dm.size, game.info_dim(d, variant))), rng.normal(size=dm.size))
              for d, dm in enumerate(game.dms)),
        variant,
    )


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_lift_reduce_round_trips(seed):
    rng = np.random.default_rng(seed)
    game = random_chain(rng)
    prof_s = random_profile(rng, game, Variant.STATIC)
    back = policy_dependent_reduce(game, policy_dependent_lift(game, prof_s))
    for a, b in zip(prof_s.policies, back.policies):
        np.testing.assert_allclose(a.gain, b.gain, atol=1e-12)
        np.testing.assert_allclose(a.offset, b.offset, atol=1e-12)
    prof_d = random_profile(rng, game, Variant.DYNAMIC)
    back = policy_dependent_lift(game, policy_dependent_reduce(game, prof_d))
    for a, b in zip(prof_d.policies, back.policies):
        np.testing.assert_allclose(a.gain, b.gain, atol=1e-12)
        np.testing.assert_allclose(a.offset, b.offset, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_reduction_preserves_actions_and_costs(seed):
    rng = np.random.default_rng(seed)
    game = random_chain(rng)
    prof_d = random_profile(rng, game, Variant.DYNAMIC)
    prof_s = policy_dependent_reduce(game, prof_d)
    static = game.with_variant(Variant.STATIC)
    La, oa = compose_actions(game, prof_d).stacked()
    Lb, ob = compose_actions(static, prof_s).stacked()
    np.testing.assert_allclose(La, Lb, atol=1e-10)
    np.testing.assert_allclose(oa, ob, atol=1e-10)
    Ja = expected_cost(game, prof_d).values
    Jb = expected_cost(static, prof_s).values
    np.testing.assert_allclose(Ja, Jb, rtol=1e-10)


def test_singular_kernel_is_refused():
    rng = np.random.default_rng(0)
    game = random_chain(rng)
    obs = list(game.observations)
    o = obs[1]
    obs[1] = AffineObservation(o.H, np.zeros((2, 2)), o.D, o.precedence, o.forward)
    bad = game.replace(observations=tuple(obs))
    with pytest.raises(ReductionRefused):
        policy_dependent_reduce(bad, random_profile(rng, bad, Variant.DYNAMIC))


def test_non_affine_policy_is_refused():
    game = scenarios.example_nonexistence()
    prof = scenarios.table_profile([0, 1], [0, 1], variant=Variant.DYNAMIC)
    with pytest.raises(IsredError):
        policy_dependent_reduce(game, prof)


# -- control sharing -----------------------------------------------------------


def test_expansion_without_precedence_is_identity():
    prims = GaussianPrimitives(np.zeros(2), np.eye(2), (("a", 1), ("b", 1)))
    obs = (AffineObservation([[1.0, 0.0]]), AffineObservation([[0.0, 1.0]], forward=(0,)))
    game = GameSpec(prims, (Dm("x", 1, 1), Dm("y", 2, 1)), obs, (QuadraticCost.zero(4),) * 2, Variant.STATIC)
    cs = control_sharing_expand(game)
    assert all(game.info_layout(d) == cs.info_layout(d) for d in range(2))


def test_expansion_appends_precedent_action():
    cs = control_sharing_expand(scenarios.example_nonexistence(variant=Variant.STATIC))
    assert cs.variant is Variant.STATIC_CS
    assert cs.info_layout(1) == (("obs", 0), ("act", 0), ("obs", 1))


def test_cs_reduce_gain_formula():
    rng = np.random.default_rng(5)
    game = control_sharing_expand(random_chain(rng))
    prof = random_profile(rng, game, Variant.DYNAMIC_CS)
    red = control_sharing_reduce(game, prof)
    # DM c: layout (obs a, obs b, act a, act b, obs c)
    g = prof[2].gain
    P_a, P_b, Q, R = g[:, 0:1], g[:, 1:3], g[:, 3:6], g[:, 6:7]
    oa, ob, oc = game.observations
    want = np.hstack([
        P_a @ oa.G,
        P_b @ ob.G,
        Q + np.hstack([P_b @ ob.D, np.zeros((1, 2))]) + R @ oc.D,
        R @ oc.G,
    ])
    np.testing.assert_allclose(red[2].gain, want, atol=1e-14)


def test_cs_reduce_ignores_precedent_policies():
    rng = np.random.default_rng(6)
    game = control_sharing_expand(random_chain(rng))
    prof = random_profile(rng, game, Variant.DYNAMIC_CS)
    base = control_sharing_reduce(game, prof)
    other = random_profile(rng, game, Variant.DYNAMIC_CS)
    swapped = prof.with_policy(0, other[0]).with_policy(1, other[1])
    changed = control_sharing_reduce(game, swapped)
    assert np.array_equal(base[2].gain, changed[2].gain)
    assert np.array_equal(base[2].offset, changed[2].offset)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_cs_round_trip_and_action_equality(seed):
    rng = np.random.default_rng(seed)
    game = control_sharing_expand(random_chain(rng))
    prof = random_profile(rng, game, Variant.DYNAMIC_CS)
    red = control_sharing_reduce(game, prof)
    back = control_sharing_lift(game, red)
    for a, b in zip(prof.policies, back.policies):
        np.testing.assert_allclose(a.gain, b.gain, atol=1e-12)
    La, _ = compose_actions(game, prof).stacked()
    Lb, _ = compose_actions(game.with_variant(Variant.STATIC_CS), red).stacked()
    np.testing.assert_allclose(La, Lb, atol=1e-10)


def test_zero_padding_preserves_costs_exactly():
    rng = np.random.default_rng(8)
    game = random_chain(rng)
    prof = random_profile(rng, game, Variant.DYNAMIC)
    emb = embed_profile(game, prof)
    cs = game.with_variant(Variant.DYNAMIC_CS)
    assert np.array_equal(expected_cost(game, prof).values, expected_cost(cs, emb).values)


def test_finite_zero_padding_preserves_costs():
    rng = np.random.default_rng(4)
    game = scenarios.random_finite_game(rng, 3, nested=True)
    prof = PolicyProfile(
        tuple(TablePolicy(rng.integers(0, 2, game.n_info_cells(d))) for d in range(3)), Variant.DYNAMIC
    )
    emb = embed_profile(game, prof)
    cs = control_sharing_expand(game)
    assert emb[2].actions.shape == (cs.n_info_cells(2),)
    assert np.array_equal(expected_cost(game, prof).values, expected_cost(cs, emb).values)
