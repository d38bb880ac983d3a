import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isred import scenarios
from isred.core import (
    AffineObservation,
    AffinePolicy,
    Dm,
    GameSpec,
    GaussianPrimitives,
    PolicyProfile,
    QuadraticCost,
    Variant,
    expected_cost,
)
from isred.equilibria import (
    Concept,
    DeviationClass,
    Verdict,
    best_response_iteration,
    brute_force_equilibria,
    essential_equivalence,
    interchangeability_check,
    solve_affine_stationary,
    stationarity_details,
    stationarity_residual,
    verify_equilibrium,
)
from isred.errors import ArgumentError, PrimitiveMismatch, SizeGuardError
from isred.reductions import (
    control_sharing_expand,
    embed_profile,
    policy_dependent_lift,
    policy_dependent_reduce,
    policy_independent_reduce,
)


def _keys(profiles):
    return sorted(tuple(tuple(int(a) for a in p.actions) for p in prof.policies) for prof in profiles)


# -- brute force ---------------------------------------------------------------


def test_guessing_game_has_identity_as_unique_equilibrium():
    eqs = brute_force_equilibria(scenarios.guessing_game(0.3), Concept.PL_NE)
    assert _keys(eqs) == [((0, 1),)]


def _relay_oracle(p):
    # direct evaluation of 1{g1(w) != g2(g1(w))} over the 16 pure profiles
    tabs = list(itertools.product(range(2), repeat=2))
    probs = (1 - p, p)

    def cost(t1, t2):
        return sum(probs[w] * float(t1[w] != t2[t1[w]]) for w in range(2))

    out = []
    for t1 in tabs:
        for t2 in tabs:
            c = cost(t1, t2)
            if all(cost(s, t2) >= c - 1e-12 for s in tabs) and all(cost(t1, s) >= c - 1e-12 for s in tabs):
                out.append((t1, t2))
    return sorted(out)


@pytest.mark.parametrize("p", [0.5, 0.3])
def test_relay_equilibria_match_direct_enumeration(p):
    eqs = brute_force_equilibria(scenarios.relay_game(p), Concept.PL_NE)
    assert _keys(eqs) == _relay_oracle(p)


def test_brute_force_output_is_lexicographic():
    eqs = brute_force_equilibria(scenarios.relay_game(), Concept.PL_NE)
    keys = [tuple(tuple(int(a) for a in p.actions) for p in prof.policies) for prof in eqs]
    assert keys == sorted(keys)


def test_size_guard():
    with pytest.raises(SizeGuardError):
        brute_force_equilibria(scenarios.relay_game(), Concept.PL_NE, guard=10)


def test_equilibrium_sets_survive_measure_change():
    game = scenarios.xor_channel_game(0.3)
    reduced, _ = policy_independent_reduce(game)
    for concept in (Concept.PL_NE, Concept.DM_NE):
        assert _keys(brute_force_equilibria(game, concept)) == _keys(brute_force_equilibria(reduced, concept))


def test_player_and_dm_level_differ_on_multi_dm_player():
    # player 1 owns two DMs; a joint deviation can help where single ones do not
    found = False
    for seed in range(30):
        game = scenarios.random_finite_game(np.random.default_rng(seed), 3, n_players=2, noise=False)
        pl = set(_keys(brute_force_equilibria(game, Concept.PL_NE)))
        dm = set(_keys(brute_force_equilibria(game, Concept.DM_NE)))
        assert pl <= dm
        found |= pl != dm
    assert found


def test_finite_verification_agrees_with_brute_force():
    game = scenarios.relay_game(0.3)
    eqs = set(_keys(brute_force_equilibria(game, Concept.DM_NE)))
    tabs = [(0, 0), (0, 1), (1, 0), (1, 1)]
    for t1 in tabs:
        for t2 in tabs:
            rep = verify_equilibrium(game, scenarios.table_profile(t1, t2), Concept.DM_NE)
            assert (rep.verdict is Verdict.CERTIFIED) == ((t1, t2) in eqs)
            if rep.verdict is Verdict.REFUTED:
                assert rep.witness.improvement > 1e-6


# -- canonical examples ----------------------------------------------------------


def test_example_nonexistence_dynamic_profile_is_dm_ne():
    game = scenarios.example_nonexistence()
    rep = verify_equilibrium(game, scenarios.two_dm_profile(-1.0), Concept.DM_NE)
    assert rep.verdict is Verdict.CERTIFIED
    assert max(rep.residuals.values()) < 1e-10


def test_example_nonexistence_static_form_has_no_stationary_profile():
    sol = solve_affine_stationary(scenarios.example_nonexistence(variant=Variant.STATIC))
    assert not sol.feasible
    assert sol.residual == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("B", [0.5, 2.0])
def test_nonexistence_residual_scales_with_target(B):
    sol = solve_affine_stationary(scenarios.example_nonexistence(B, variant=Variant.STATIC))
    assert sol.residual == pytest.approx(B, abs=1e-10)


def test_example_concave_reduction():
    game = scenarios.example_concave_reduction(0.5)
    prof = scenarios.two_dm_profile(1.0)
    assert verify_equilibrium(game, prof, Concept.PL_SPE).verdict is Verdict.CERTIFIED
    red = policy_dependent_reduce(game, prof)
    rep = verify_equilibrium(game.with_variant(Variant.STATIC), red, Concept.PL_SPE)
    assert rep.verdict is Verdict.REFUTED
    assert "(1, 1)" in rep.witness.who
    assert rep.witness.improvement >= 0.5 - 1e-9


def test_example_concave_lift():
    game = scenarios.example_concave_lift(0.5, 2.0)
    sol = solve_affine_stationary(game)
    assert sol.unique
    np.testing.assert_allclose(sol.profile[1].gain, [[0.0, 1.0]], atol=1e-12)
    np.testing.assert_allclose(sol.profile[0].gain, [[0.0]], atol=1e-12)
    assert verify_equilibrium(game, sol.profile, Concept.PL_SPE).verdict is Verdict.CERTIFIED
    dyn = game.with_variant(Variant.DYNAMIC)
    lifted = policy_dependent_lift(dyn, sol.profile)
    rep = verify_equilibrium(dyn, lifted, Concept.PL_SPE)
    assert rep.verdict is Verdict.REFUTED
    assert rep.witness.improvement >= 2.5 - 1e-9


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.25, 0.75), st.floats(1.5, 3.0))
def test_counterexamples_stay_refuted_over_parameter_ranges(B, alpha, beta):
    g41 = scenarios.example_concave_reduction(alpha)
    red = policy_dependent_reduce(g41, scenarios.two_dm_profile(1.0))
    rep = verify_equilibrium(g41.with_variant(Variant.STATIC), red, Concept.PL_SPE)
    assert rep.verdict is Verdict.REFUTED and rep.witness.improvement >= (1 - alpha) - 1e-9
    g42 = scenarios.example_concave_lift(alpha, beta, Variant.DYNAMIC)
    lifted = policy_dependent_lift(g42, scenarios.two_dm_profile(1.0, variant=Variant.STATIC))
    rep = verify_equilibrium(g42, lifted, Concept.PL_SPE)
    assert rep.verdict is Verdict.REFUTED and rep.witness.improvement >= alpha + beta - 1e-9
    sol = solve_affine_stationary(scenarios.example_nonexistence(B, variant=Variant.STATIC))
    assert not sol.feasible and sol.residual == pytest.approx(B, abs=1e-9)


def test_zero_sum_concepts_need_zero_sum_games():
    with pytest.raises(ArgumentError):
        verify_equilibrium(scenarios.example_nonexistence(), scenarios.two_dm_profile(-1.0), Concept.PL_SPE)


def test_deviation_class_label_is_reported():
    game = scenarios.example_concave_lift()
    rep = verify_equilibrium(game, scenarios.two_dm_profile(1.0, variant=Variant.STATIC), "pl-spe",
                             DeviationClass("affine"))
    assert rep.deviation_class == "affine"
    assert rep.verdict is Verdict.CERTIFIED


# -- stationarity ------------------------------------------------------------------


def test_cost_free_dm_has_zero_residual():
    prims = GaussianPrimitives(np.zeros(1), np.eye(1), (("w", 1),))
    obs = (AffineObservation([[1.0]]), AffineObservation([[1.0]]))
    # z = [w, u1, u2]; player 2 pays u1^2, which its own action cannot move
    c1 = QuadraticCost.from_squares(3, [(1.0, [1.0, -1.0, 0.0], 0.0)])
    c2 = QuadraticCost.from_squares(3, [(1.0, [0.0, 1.0, 0.0], 0.0)])
    game = GameSpec(prims, (Dm("a", 1, 1), Dm("b", 2, 1)), obs, (c1, c2), Variant.STATIC)
    prof = PolicyProfile((AffinePolicy([[0.3]], [0.2]), AffinePolicy([[0.7]], [1.0])), Variant.STATIC)
    res = stationarity_residual(game, prof)
    assert res[1] == 0.0
    assert res[0] > 0.1


def _second_moment(game, profile, d):
    from isred import affine

    sysm = affine.linearize(game, profile)
    F, f = sysm.info_F[d], sysm.info_f[d]
    mean, cov = game.primitives.mean, game.primitives.cov
    m = F @ mean + f
    k = m.size
    S = np.empty((k + 1, k + 1))
    S[:k, :k] = F @ cov @ F.T + np.outer(m, m)
    S[:k, k] = S[k, :k] = m
    S[k, k] = 1.0
    return S


def _bump(profile, d, i, j, h):
    pols = list(profile.policies)
    gain, off = pols[d].gain.copy(), pols[d].offset.copy()
    if j < gain.shape[1]:
        gain[i, j] += h
    else:
        off[i] += h
    pols[d] = AffinePolicy(gain, off)
    return PolicyProfile(tuple(pols), profile.variant)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_conditional_gradient_matches_finite_differences(seed, zero_sum):
    rng = np.random.default_rng(seed)
    game = scenarios.random_gaussian_game(rng, zero_sum)
    prof = scenarios.random_affine_profile(rng, game, scale=0.5)
    h = 1e-5
    for d, det in enumerate(stationarity_details(game, prof)):
        player = game.dms[d].player
        k = det.raw_gain.shape[1]
        fd = np.zeros((game.dms[d].size, k + 1))
        for i in range(fd.shape[0]):
            for j in range(k + 1):
                up = expected_cost(game, _bump(prof, d, i, j, h)).values[player - 1]
                dn = expected_cost(game, _bump(prof, d, i, j, -h)).values[player - 1]
                fd[i, j] = (up - dn) / (2 * h)
        closed = np.hstack([det.raw_gain, det.raw_offset[:, None]]) @ _second_moment(game, prof, d)
        scale = max(1.0, np.max(np.abs(fd)))
        assert np.max(np.abs(closed - fd)) <= 1e-6 * scale


def test_single_dm_regulator_matches_scalar_formula():
    r, s, nv = 2.0, 1.0, 0.5
    sol = solve_affine_stationary(scenarios.single_dm_regulator(r, s, nv))
    assert sol.unique
    # u = -(s / r) E[w0 | y], with E[w0 | y] = y / (1 + nv)
    assert sol.profile[0].gain[0, 0] == pytest.approx(-(s / r) / (1 + nv), abs=1e-12)
    assert sol.profile[0].offset[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("zero_sum", [False, True])
def test_reduction_keeps_stationarity_verdicts(zero_sum):
    for seed in range(5):
        rng = np.random.default_rng(seed)
        game = scenarios.random_gaussian_game(rng, zero_sum)
        static = game.with_variant(Variant.STATIC)
        sol = solve_affine_stationary(static)
        assert sol.unique and sol.residual < 1e-10
        candidates = [policy_dependent_lift(game, sol.profile), scenarios.random_affine_profile(rng, game, scale=0.3)]
        for prof in candidates:
            rd = stationarity_residual(game, prof).max()
            rs = stationarity_residual(static, policy_dependent_reduce(game, prof)).max()
            assert (rd < 1e-8 and rs < 1e-8) or (rd > 1e-6 and rs > 1e-6)


def test_singular_system_reports_manifold():
    # two DMs with identical information and a cost that only sees their sum
    prims = GaussianPrimitives(np.zeros(1), np.eye(1), (("w", 1),))
    obs = (AffineObservation([[1.0]]), AffineObservation([[1.0]]))
    c = QuadraticCost.from_squares(3, [(1.0, [-1.0, 1.0, 1.0], 0.0)])
    game = GameSpec(prims, (Dm("a", 1, 1), Dm("b", 1, 2)), obs, (c,), Variant.STATIC)
    sol = solve_affine_stationary(game)
    assert sol.feasible and sol.manifold_dim == 2 and not sol.unique
    assert sol.residual < 1e-10


# -- best-response iteration -----------------------------------------------------------


def test_decoupled_game_converges_after_one_update():
    game = scenarios.coupled_static_game(0.0, 0.3)
    init = scenarios.random_affine_profile(np.random.default_rng(0), game)
    trace = best_response_iteration(game, init)
    assert trace.converged and trace.steps[1] == 0.0
    np.testing.assert_allclose(trace.profile[0].gain, [[1.0]], atol=1e-14)


def test_coupled_game_contracts_at_coupling_rate():
    c, rho = 0.5, 0.6
    game = scenarios.coupled_static_game(c, rho)
    init = PolicyProfile((AffinePolicy([[0.0]], [1.0]), AffinePolicy([[0.0]], [1.0])), Variant.STATIC)
    trace = best_response_iteration(game, init)
    assert trace.converged
    assert trace.contraction == pytest.approx(0.5, abs=1e-6)
    direct = solve_affine_stationary(game).profile
    # a_i = 1 + c * rho * a_j at the fixed point
    want = 1.0 / (1.0 - c * rho)
    for d in range(2):
        assert trace.profile[d].gain[0, 0] == pytest.approx(want, abs=1e-9)
        np.testing.assert_allclose(trace.profile[d].gain, direct[d].gain, atol=1e-9)


def test_gauss_seidel_option_converges_to_same_point():
    game = scenarios.coupled_static_game(0.5, 0.6)
    init = PolicyProfile((AffinePolicy([[0.0]], [1.0]), AffinePolicy([[0.0]], [1.0])), Variant.STATIC)
    a = best_response_iteration(game, init).profile
    b = best_response_iteration(game, init, gauss_seidel=True).profile
    for d in range(2):
        np.testing.assert_allclose(a[d].gain, b[d].gain, atol=1e-10)


def test_divergent_iteration_is_flagged():
    # coupling above one makes the Jacobi map expansive
    prims = GaussianPrimitives(np.zeros(2), np.eye(2), (("w1", 1), ("w2", 1)))
    obs = (AffineObservation([[1.0, 0.0]]), AffineObservation([[0.0, 1.0]]))
    c1 = QuadraticCost.from_squares(4, [(1.0, [0, 0, 1.0, -2.0], -1.0)])
    c2 = QuadraticCost.from_squares(4, [(1.0, [0, 0, -2.0, 1.0], -1.0)])
    game = GameSpec(prims, (Dm("a", 1, 1), Dm("b", 2, 1)), obs, (c1, c2), Variant.STATIC)
    trace = best_response_iteration(game, scenarios.random_affine_profile(np.random.default_rng(1), game), max_iter=30)
    assert trace.diverged and trace.contraction > 1.5


# -- interchangeability and equivalence --------------------------------------------------


def test_saddle_representations_interchange():
    cs, first, second = scenarios.cs_saddle_profiles()
    result = interchangeability_check(cs, [first, second])
    assert result.all_certified
    assert result.value_spread <= 1e-10


def test_single_saddle_point_is_trivially_interchangeable():
    cs, first, _ = scenarios.cs_saddle_profiles()
    result = interchangeability_check(cs, [first])
    assert result.verdicts == [[Verdict.CERTIFIED]]


def test_corrupted_profile_breaks_interchangeability():
    cs, first, second = scenarios.cs_saddle_profiles()
    bad = PolicyProfile((second[0], AffinePolicy(second[1].gain + [[0.0, 0.0, 0.1]], second[1].offset)), cs.variant)
    result = interchangeability_check(cs, [first, bad])
    assert not result.all_certified
    assert result.reports[1][1].witness.improvement > 1e-6


def test_interchangeability_needs_zero_sum():
    with pytest.raises(ArgumentError):
        interchangeability_check(scenarios.example_nonexistence(), [scenarios.two_dm_profile(-1.0)])


def test_profile_equals_its_embedding():
    game = scenarios.example_nonexistence()
    prof = scenarios.two_dm_profile(-1.0)
    cs = control_sharing_expand(game)
    assert essential_equivalence(game, prof, cs, embed_profile(game, prof))


def test_reduced_profile_is_equivalent_to_dynamic_one():
    game = scenarios.example_concave_reduction()
    prof = scenarios.two_dm_profile(1.0)
    red = policy_dependent_reduce(game, prof)
    assert essential_equivalence(game, prof, game.with_variant(Variant.STATIC), red)


def test_gain_on_duplicated_measurement_is_immaterial():
    prims = GaussianPrimitives(np.zeros(1), np.eye(1), (("w", 1),))
    obs = (AffineObservation([[1.0], [1.0]]),)
    game = GameSpec(prims, (Dm("a", 1, 1),), obs, (QuadraticCost.zero(2),), Variant.STATIC)
    a = PolicyProfile((AffinePolicy([[1.0, 0.0]], [0.0]),), Variant.STATIC)
    b = PolicyProfile((AffinePolicy([[0.0, 1.0]], [0.0]),), Variant.STATIC)
    c = PolicyProfile((AffinePolicy([[0.0, 1.1]], [0.0]),), Variant.STATIC)
    assert essential_equivalence(game, a, game, b)
    assert not essential_equivalence(game, a, game, c)


def test_primitive_mismatch_is_an_error():
    g1 = scenarios.example_nonexistence()
    g2 = scenarios.gaussian_channel()
    with pytest.raises(PrimitiveMismatch):
        essential_equivalence(g1, scenarios.two_dm_profile(0.0), g2, scenarios.gaussian_channel_profile())


def test_finite_equivalence_ignores_unreachable_cells():
    game = scenarios.guessing_game(1.0)  # w0 is always 1
    a = scenarios.table_profile([0, 1])
    b = scenarios.table_profile([1, 1])
    assert essential_equivalence(game, a, game, b)
