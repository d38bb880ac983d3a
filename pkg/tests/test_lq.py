import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isred import lq
from isred.core import compose_actions, expected_cost
from isred.equilibria import Concept, Verdict, best_response_iteration, solve_affine_stationary, verify_equilibrium
from isred.errors import ArgumentError, ReductionRefused, SolverError, StructuralError, UnsupportedError
from isred.model import AffinePolicy, PolicyProfile
from isred.reductions import control_sharing_lift, embed_profile


def deterministic_zsg(T=2, r2=3.0, b2=1.0):
    return lq.LqStageModel.scalar_zero_sum(T, a=1.0, b1=1.0, b2=b2, q=1.0, q_final=1.0, r1=1.0, r2=r2)


def stochastic_zsg():
    return lq.LqStageModel.scalar_zero_sum(2, a=1.0, b1=1.0, b2=0.5, q=1.0, q_final=1.0, r1=1.0, r2=3.0,
                                           noise_var=0.5)


def observed_nzsg(T=2):
    return lq.LqStageModel.scalar_team_coupled(
        T, a=0.9, b=(1.0, 0.8), q=(1.0, 0.6), q_final=(1.0, 0.8), r=((1.0, 0.3), (0.2, 1.0)),
        noise_var=0.5, obs_c=(1.0, 0.7), obs_var=(0.5, 0.8),
    )


def max_gap(a, b):
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


def action_gap(game_a, prof_a, game_b, prof_b):
    return max_gap(compose_actions(game_a, prof_a).gains, compose_actions(game_b, prof_b).gains)


# -- model validation ---------------------------------------------------------


def test_model_rejects_bad_dimensions_and_weights():
    base = deterministic_zsg(1)
    with pytest.raises(StructuralError):
        lq.LqStageModel(base.A, (([[1.0, 0.0]], [[1.0]]),), base.Q, base.R, base.x0_cov)
    with pytest.raises(StructuralError, match="positive definite"):
        lq.LqStageModel.scalar_zero_sum(1, r1=0.0)
    Q2 = tuple(np.asarray(q) * -2 for q in base.Q[0])
    with pytest.raises(StructuralError, match="zero-sum"):
        lq.LqStageModel(base.A, base.B, (base.Q[0], Q2), base.R, base.x0_cov, zero_sum=True)


# -- stacked form -----------------------------------------------------------------


def test_stacked_form_one_step():
    m = lq.LqStageModel.scalar_zero_sum(1, a=0.7, b1=2.0, b2=-1.0, noise_var=1.0)
    sf = lq.build_stacked_form(m)
    assert np.allclose(sf.H, [[1.0, 0.0], [0.7, 1.0]])
    assert np.allclose(sf.D[0], [[0.0], [2.0]])
    assert np.allclose(sf.D[1], [[0.0], [-1.0]])


def test_stacked_form_two_steps_hand_unroll():
    sf = lq.build_stacked_form(deterministic_zsg(2))
    assert np.allclose(sf.D[0], [[0, 0], [1, 0], [1, 1]])
    assert np.allclose(sf.D[1], [[0, 0], [1, 0], [1, 1]])


def test_measurement_rows_match_simulation():
    m = observed_nzsg(3)
    sf = lq.build_stacked_form(m)
    rng = np.random.default_rng(0)
    zeta = rng.standard_normal(sf.H.shape[1])
    u = [rng.standard_normal(3) for _ in range(2)]
    off = dict()
    o = 0
    for name, size in sf.zeta_blocks:
        off[name] = o
        o += size
    x = [zeta[off["x0"]]]
    for t in range(3):
        x.append(0.9 * x[t] + 1.0 * u[0][t] + 0.8 * u[1][t] + zeta[off[f"w{t}"]])
    assert np.allclose(sf.H @ zeta + sf.D[0] @ u[0] + sf.D[1] @ u[1], x)
    cs = (1.0, 0.7)
    for i in range(2):
        for t in range(3):
            y = cs[i] * x[t] + zeta[off[f"v{t}_{i + 1}"]]
            got = sf.obs_H[i][t] @ zeta + sum(sf.obs_D[i][t][j] @ u[j] for j in range(2))
            assert np.allclose(got, y)


# -- feedback saddle point ----------------------------------------------------------


def test_feedback_one_stage_hand_solve():
    # stage system [[2, 1], [1, -1]] k = -[1, 1]
    m = lq.LqStageModel.scalar_zero_sum(1, a=1.0, b1=1.0, b2=1.0, q=0.0, q_final=1.0, r1=1.0, r2=2.0)
    sol = lq.feedback_spe(m)
    K1, K2 = sol.gains[0]
    assert np.isclose(K1[0, 0], -2 / 3, atol=1e-14)
    assert np.isclose(K2[0, 0], 1 / 3, atol=1e-14)
    assert np.isclose(sol.value([1.5]), 2 / 3 * 1.5**2, atol=1e-14)


def test_feedback_strong_maximizer_fails_at_named_stage():
    m = lq.LqStageModel.scalar_zero_sum(1, q=0.0, q_final=1.0, r1=1.0, r2=0.5)
    with pytest.raises(SolverError, match="stage-0"):
        lq.feedback_spe(m)


def test_feedback_without_maximizer_is_lqr():
    m = lq.LqStageModel.scalar_zero_sum(1, a=1.0, b1=1.0, b2=0.0, q=0.0, q_final=1.0, r1=1.0, r2=2.0)
    K1, K2 = lq.feedback_spe(m).gains[0]
    assert np.isclose(K1[0, 0], -0.5) and K2[0, 0] == 0.0


def test_feedback_value_matches_expected_cost():
    m = stochastic_zsg()
    sol = lq.feedback_spe(m)
    game = lq.lq_game(m, "F")
    est = expected_cost(game, sol.profile(m))
    assert abs(est.values[0] - sol.expected_value(m.x0_cov)) < 1e-10
    assert verify_equilibrium(game, sol.profile(m), Concept.PL_SPE).verdict is Verdict.CERTIFIED


def test_feedback_needs_zero_sum():
    with pytest.raises(ArgumentError):
        lq.feedback_spe(observed_nzsg())


# -- open loop ----------------------------------------------------------------------


def test_openloop_matches_feedback_trajectory():
    m = deterministic_zsg(2)
    fb = lq.feedback_spe(m)
    ol = lq.openloop_spe(m, "OL")
    x = 1.0
    for t in range(2):
        K1, K2 = fb.gains[t]
        u1, u2 = K1[0, 0] * x, K2[0, 0] * x
        assert abs(u1 - ol.action_map[2 * t][0, 0]) < 1e-12
        assert abs(u2 - ol.action_map[2 * t + 1][0, 0]) < 1e-12
        x = x + u1 + u2
    assert abs(ol.values[0] - fb.expected_value(m.x0_cov)) < 1e-12


def test_openloop_without_maximizer_is_lqr_plan():
    m = deterministic_zsg(3, b2=0.0)
    ol = lq.openloop_spe(m, "OL")
    sf = lq.build_stacked_form(m)
    # minimize |x|^2 + |u|^2 with x = H x0 + D u by least squares
    D, h = sf.D[0], sf.H[:, :1]
    plan = -np.linalg.solve(D.T @ D + np.eye(3), D.T @ h)
    got = np.array([ol.action_map[2 * t][0, 0] for t in range(3)])
    assert np.allclose(got, plan[:, 0], atol=1e-12)
    assert all(abs(ol.action_map[2 * t + 1][0, 0]) < 1e-14 for t in range(3))


def test_pnol_matches_static_solve():
    m = stochastic_zsg()
    ol = lq.openloop_spe(m, "PNOL")
    game = lq.lq_game(m, "PNOL")
    ref = solve_affine_stationary(game)
    assert action_gap(game, ol.profile, game, ref.profile) < 1e-10


def test_openloop_indefinite_blocks_raise():
    with pytest.raises(SolverError):
        lq.openloop_spe(deterministic_zsg(2, r2=0.3), "OL")


def test_openloop_tag_check():
    with pytest.raises(ArgumentError):
        lq.openloop_spe(deterministic_zsg(), "CL")


# -- game builders --------------------------------------------------------------------


def test_private_sharing_tags_unsupported():
    with pytest.raises(UnsupportedError):
        lq.lq_game(deterministic_zsg(), "CLPCS")
    with pytest.raises(ArgumentError):
        lq.lq_game(deterministic_zsg(), "XYZ")


def test_dos_layout():
    m = observed_nzsg(2)
    game = lq.delay_sharing_game(m, "DOS")
    d = m.dm_index(1, 1)
    assert game.info_layout(d) == (("obs", 0), ("obs", 1), ("obs", d))
    assert game.observations[0].noise_block == "v0_1"
    assert game.observations[1].noise_block == "v0_2"
    assert game.observations[d].noise_block == "v1_1"
    sds = lq.delay_sharing_game(m, "SDS")
    assert sds.info_layout(d) == (("obs", 0), ("obs", 1), ("act", 0), ("act", 1), ("obs", d))


def test_delay_sharing_needs_history_and_measurements():
    with pytest.raises(ArgumentError):
        lq.delay_sharing_game(observed_nzsg(1), "DOS")
    with pytest.raises(ArgumentError):
        lq.delay_sharing_game(deterministic_zsg(2), "DOS")
    with pytest.raises(ArgumentError):
        lq.delay_sharing_game(observed_nzsg(2), "CL")


def test_state_feedback_pattern_must_be_causal():
    m = deterministic_zsg(2)
    bad = np.zeros((2, 3), dtype=bool)
    bad[0, 1] = True
    bad[1, 1] = True
    with pytest.raises(ArgumentError):
        lq.state_feedback_game(m, [bad, bad])


# -- realization ------------------------------------------------------------------------


def test_feedback_to_closed_loop_is_zero_padding():
    m = stochastic_zsg()
    fb = lq.feedback_spe(m)
    prof = lq.realize_policy(m, fb.profile(m), "F", "CL")
    d = m.dm_index(1, 1)
    assert np.allclose(prof[d].gain, [[0.0, 0.0, fb.gains[1][0][0, 0]]])
    game = lq.lq_game(m, "CL")
    assert verify_equilibrium(game, prof, Concept.PL_SPE).verdict is Verdict.CERTIFIED


def test_feedback_to_open_loop_deterministic():
    m = deterministic_zsg(2)
    prof = lq.realize_policy(m, lq.feedback_spe(m).profile(m), "F", "OL")
    ol = lq.openloop_spe(m, "OL")
    assert max_gap([p.gain for p in prof.policies], ol.action_map) < 1e-12


def test_history_dependent_policy_refused():
    m = stochastic_zsg()
    game = lq.lq_game(m, "CL")
    pols = [AffinePolicy.zeros(1, game.info_dim(d)) for d in range(game.n_dms)]
    pols[m.dm_index(1, 1)] = AffinePolicy(np.array([[1.0, 0.0, 0.0]]), np.zeros(1))
    with pytest.raises(ReductionRefused, match=r"\(1, 1\)"):
        lq.realize_policy(m, PolicyProfile(tuple(pols), game.variant), "CL", "F")


def test_dpncs_to_pncs_substitution():
    m = stochastic_zsg()
    game = lq.lq_game(m, "DPNCS")
    rng = np.random.default_rng(3)
    prof = PolicyProfile(tuple(AffinePolicy(rng.standard_normal((1, game.info_dim(d))), np.zeros(1))
                               for d in range(game.n_dms)), game.variant)
    out = lq.realize_policy(m, prof, "DPNCS", "PNCS")
    assert action_gap(game, prof, lq.lq_game(m, "PNCS"), out) < 1e-12


def test_cs_realization_independent_of_coplayer():
    m = deterministic_zsg(2)
    game = lq.lq_game(m, "CLCS")
    rng = np.random.default_rng(5)

    def random_profile():
        return [AffinePolicy(rng.standard_normal((1, game.info_dim(d))), np.zeros(1)) for d in range(game.n_dms)]

    base = random_profile()
    other = random_profile()
    mixed = [base[d] if game.dms[d].player == 1 else other[d] for d in range(game.n_dms)]
    a = lq.realize_policy(m, PolicyProfile(tuple(base), game.variant), "CLCS", "OLCS")
    b = lq.realize_policy(m, PolicyProfile(tuple(mixed), game.variant), "CLCS", "OLCS")
    for d in game.player_dms(1):
        assert np.array_equal(a[d].gain, b[d].gain)
    back = lq.realize_policy(m, a, "OLCS", "CLCS")
    assert action_gap(game, back, game, PolicyProfile(tuple(base), game.variant)) < 1e-12


def test_pnol_realizations_share_value():
    m = stochastic_zsg()
    ol = lq.openloop_spe(m, "PNOL")
    for tag in ("PNCL", "PNCS", "DPNCS"):
        prof = lq.realize_policy(m, ol.profile, "PNOL", tag)
        est = expected_cost(lq.lq_game(m, tag), prof)
        assert abs(est.values[0] - ol.values[0]) < 1e-9


# -- MQI and the state-feedback transform ----------------------------------------------------


def test_mqi_dense_masks_hold():
    S = np.ones((2, 3))
    D = np.ones((3, 2))
    assert lq.mqi_check(S, S, D, D).holds


def test_mqi_diagonal_masks_dense_coupling_witness():
    res = lq.mqi_check(np.eye(2), np.eye(2), np.ones((2, 2)), np.ones((2, 2)))
    assert not res.holds
    assert res.witness == ("K1 D1 K1", (1, 0))


def test_mqi_delay_masks_with_strictly_lower_coupling():
    T = 4
    S = np.tril(np.ones((T, T)), -1) + np.eye(T)
    D = np.tril(np.ones((T, T)), -1)
    assert lq.mqi_check(S, S, D, D).holds


def test_qk_hand_inverse():
    K1, K2 = lq.qk_transform([[1.0]], [[2.0]], [[0.1]], [[0.2]])
    assert np.isclose(K1[0, 0], 2 / 3) and np.isclose(K2[0, 0], 4 / 3)
    Z1, Z2 = lq.qk_transform(np.zeros((1, 2)), np.zeros((1, 2)), np.ones((2, 1)), np.ones((2, 1)))
    assert not Z1.any() and not Z2.any()


def test_qk_singular_refused():
    with pytest.raises(ReductionRefused):
        lq.qk_transform([[1.0]], [[0.0]], [[-1.0]], [[0.0]])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_qk_kq_round_trip(seed):
    rng = np.random.default_rng(seed)
    m1, m2, n = 2, 3, 4
    Q1, Q2 = 0.3 * rng.standard_normal((m1, n)), 0.3 * rng.standard_normal((m2, n))
    D1, D2 = 0.3 * rng.standard_normal((n, m1)), 0.3 * rng.standard_normal((n, m2))
    K1, K2 = lq.qk_transform(Q1, Q2, D1, D2)
    R1, R2 = lq.kq_transform(K1, K2, D1, D2)
    assert np.allclose(R1, Q1, atol=1e-10) and np.allclose(R2, Q2, atol=1e-10)


def test_state_feedback_transform_is_saddle():
    m = stochastic_zsg()
    pat = lq.causal_pattern(2, "full")
    static = lq.state_feedback_game(m, [pat, pat], static=True)
    sol = solve_affine_stationary(static)
    Q1, Q2 = lq.feedforward_from_profile(m, [pat, pat], sol.profile)
    sf = lq.build_stacked_form(m)
    masks = [lq.block_mask(m, pat, 1), lq.block_mask(m, pat, 2)]
    assert lq.mqi_check(masks[0], masks[1], sf.D[0], sf.D[1]).holds
    K1, K2 = lq.qk_transform(Q1, Q2, sf.D[0], sf.D[1], masks=masks)
    assert not np.any(K1[~masks[0]]) or np.max(np.abs(K1[~masks[0]])) < 1e-12
    game = lq.state_feedback_game(m, [pat, pat])
    prof = lq.profile_from_feedback(m, [pat, pat], (K1, K2))
    assert verify_equilibrium(game, prof, Concept.PL_SPE).verdict is Verdict.CERTIFIED


# -- delay sharing ------------------------------------------------------------------------------


def test_sdos_iteration_and_cs_embedding():
    m = observed_nzsg(2)
    game = lq.delay_sharing_game(m, "SDOS")
    sol = solve_affine_stationary(game)
    init = PolicyProfile(tuple(AffinePolicy.zeros(1, game.info_dim(d)) for d in range(game.n_dms)), game.variant)
    trace = best_response_iteration(game, init)
    assert trace.contraction < 1 and not trace.diverged
    assert max_gap([p.gain for p in trace.profile.policies], [p.gain for p in sol.profile.policies]) < 1e-9
    ds = lq.delay_sharing_game(m, "DS")
    lifted = control_sharing_lift(ds, embed_profile(game, sol.profile))
    assert action_gap(ds, lifted, game, sol.profile) < 1e-10
