"""Scenario library and reproduction driver.

Each scenario builds its games from validated parameters, evaluates a list
of claims with fixed seeds, and returns a :class:`ScenarioReport`.  A claim
is a named check with a measured value and the target it was compared to.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import lq, scenarios
from .core import MonteCarlo, check_condition_C, compose_actions, expected_cost
from .equilibria import (
    DEFAULT_SEED,
    Concept,
    DeviationClass,
    Verdict,
    best_response_iteration,
    brute_force_equilibria,
    interchangeability_check,
    solve_affine_stationary,
    stationarity_details,
    stationarity_residual,
    verify_equilibrium,
)
from .errors import ArgumentError, IsredError
from .model import AffinePolicy, PolicyProfile, Variant
from .reductions import (
    control_sharing_expand,
    control_sharing_lift,
    control_sharing_reduce,
    embed_profile,
    policy_dependent_lift,
    policy_dependent_reduce,
    policy_independent_reduce,
)


@dataclass
class ClaimResult:
    claim: str
    passed: bool
    value: object = None
    target: str = ""

    def machine(self) -> dict:
        v = self.value
        if isinstance(v, (np.floating, float)):
            v = float(v)
        elif isinstance(v, (np.integer, int, bool, np.bool_)):
            v = int(v) if not isinstance(v, (bool, np.bool_)) else bool(v)
        return {"claim": self.claim, "passed": bool(self.passed), "value": v, "target": self.target}


@dataclass
class ScenarioReport:
    name: str
    summary: str
    params: dict
    claims: list = field(default_factory=list)
    error: str = None
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.claims) and all(c.passed for c in self.claims)

    def machine(self) -> dict:
        """Deterministic summary without timings."""
        return {
            "scenario": self.name,
            "params": dict(self.params),
            "passed": self.passed,
            "error": self.error,
            "claims": [c.machine() for c in self.claims],
        }

    def text(self) -> str:
        head = f"[{'PASS' if self.passed else 'FAIL'}] {self.name} {self.params} ({self.runtime:.2f}s)"
        lines = [head, f"    {self.summary}"]
        if self.error:
            lines.append(f"    error: {self.error}")
        for c in self.claims:
            lines.append(f"    {'ok ' if c.passed else 'BAD'} {c.claim}: {_fmt(c.value)} (target {c.target})")
        return "\n".join(lines)


@dataclass
class HarnessReport:
    scenarios: list

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.scenarios)

    def machine(self) -> dict:
        return {
            "format": "isred-harness/1",
            "passed": self.passed,
            "scenarios": [s.machine() for s in sorted(self.scenarios, key=lambda s: s.name)],
        }

    def text(self) -> str:
        n_ok = sum(s.passed for s in self.scenarios)
        body = "\n".join(s.text() for s in self.scenarios)
        return f"{body}\n{n_ok}/{len(self.scenarios)} scenarios passed"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


@dataclass(frozen=True)
class Param:
    default: object
    lo: float = -np.inf
    hi: float = np.inf
    lo_open: bool = False
    hi_open: bool = False
    integer: bool = False

    def check(self, name, value):
        try:
            value = int(value) if self.integer else float(value)
        except (TypeError, ValueError):
            raise ArgumentError(f"{name} must be {'an integer' if self.integer else 'a number'}") from None
        bad = (value <= self.lo if self.lo_open else value < self.lo) or (
            value >= self.hi if self.hi_open else value > self.hi
        )
        if bad or not np.isfinite(value):
            lb, rb = "(" if self.lo_open else "[", ")" if self.hi_open else "]"
            raise ArgumentError(f"{name}={value} is outside {lb}{self.lo}, {self.hi}{rb}")
        return value


@dataclass(frozen=True)
class Scenario:
    name: str
    summary: str
    params: dict
    runner: object

    def resolve(self, overrides=None) -> dict:
        overrides = dict(overrides or {})
        unknown = sorted(set(overrides) - set(self.params))
        if unknown:
            raise ArgumentError(f"scenario {self.name!r} has no parameter(s) {unknown}")
        return {k: p.check(k, overrides.get(k, p.default)) for k, p in self.params.items()}


SCENARIOS: dict = {}


def _scenario(name, summary, **params):
    def wrap(fn):
        SCENARIOS[name] = Scenario(name, summary, params, fn)
        return fn

    return wrap


def _claim(out, claim, passed, value=None, target=""):
    out.append(ClaimResult(claim, bool(passed), value, target))


def _verdict(rep):
    return rep.verdict.value


# --------------------------------------------------------------------------
# canonical two-DM examples
# --------------------------------------------------------------------------


@_scenario("example-3.1", "misaligned targets: a dynamic DM-NE whose static form has no stationary profile",
           B=Param(1.0, 0.0, np.inf, lo_open=True))
def _ex31(B):
    out = []
    game = scenarios.example_nonexistence(B)
    prof = scenarios.two_dm_profile(-1.0)
    rep = verify_equilibrium(game, prof, Concept.DM_NE)
    res = max(rep.residuals.values())
    _claim(out, "dynamic profile (0, -y2) is a DM-NE", rep.verdict is Verdict.CERTIFIED and res < 1e-10,
           _verdict(rep), "certified, residual < 1e-10")
    _claim(out, "dynamic profile satisfies condition C", all(r.holds for r in check_condition_C(game, prof)),
           True, "all DMs")
    sol = solve_affine_stationary(scenarios.example_nonexistence(B, variant=Variant.STATIC))
    _claim(out, "static form has no stationary affine profile", not sol.feasible and abs(sol.residual - B) <= 1e-10,
           sol.residual, f"infeasible, residual {B} +- 1e-10")
    return out


@_scenario("example-4.1", "zero-sum game whose reduced saddle point makes the minimizer maximize",
           alpha=Param(0.5, 0.0, 1.0, True, True))
def _ex41(alpha):
    out = []
    game = scenarios.example_concave_reduction(alpha)
    prof = scenarios.two_dm_profile(1.0)
    rep = verify_equilibrium(game, prof, Concept.PL_SPE)
    _claim(out, "dynamic profile (0, y2) is a PL-SPE", rep.verdict is Verdict.CERTIFIED, _verdict(rep), "certified")
    red = policy_dependent_reduce(game, prof)
    rep = verify_equilibrium(game.with_variant(Variant.STATIC), red, Concept.PL_SPE)
    imp = rep.witness.improvement if rep.witness else 0.0
    need = (1 - alpha) - 1e-9
    _claim(out, "reduced profile is refuted by the minimizer",
           rep.verdict is Verdict.REFUTED and "(1, 1)" in rep.witness.who and imp >= need, imp, f">= {need:.9g}")
    return out


@_scenario("example-4.2", "zero-sum static saddle point whose dynamic lift is not a saddle point",
           alpha=Param(0.5, 0.0, 1.0, True, True), beta=Param(2.0, 1.0, np.inf, True))
def _ex42(alpha, beta):
    out = []
    game = scenarios.example_concave_lift(alpha, beta)
    sol = solve_affine_stationary(game)
    rep = verify_equilibrium(game, sol.profile, Concept.PL_SPE)
    _claim(out, "static stationary solution is unique", sol.unique, sol.manifold_dim, "manifold dimension 0")
    _claim(out, "static profile is a PL-SPE", rep.verdict is Verdict.CERTIFIED, _verdict(rep), "certified")
    dyn = game.with_variant(Variant.DYNAMIC)
    rep = verify_equilibrium(dyn, policy_dependent_lift(dyn, sol.profile), Concept.PL_SPE)
    imp = rep.witness.improvement if rep.witness else 0.0
    need = alpha + beta - 1e-9
    _claim(out, "lifted profile is refuted", rep.verdict is Verdict.REFUTED and imp >= need, imp, f">= {need:.9g}")
    return out


# --------------------------------------------------------------------------
# finite suites
# --------------------------------------------------------------------------


def bijection_games(n_games: int, seed: int):
    """Seeded finite games with three binary-action DMs, some players owning two DMs."""
    games = []
    for k in range(n_games):
        rng = np.random.default_rng(seed + k)
        games.append(scenarios.random_finite_game(rng, 3, n_players=2 if k % 3 == 0 else 3, nested=bool(k % 2)))
    return games


def _keys(profiles):
    return sorted(p.key() for p in profiles)


@_scenario("finite-bijection", "equilibrium sets of finite games survive the change of measure",
           n_games=Param(25, 1, 200, integer=True), seed=Param(0, 0, 2**31, integer=True))
def _bijection(n_games, seed):
    out = []
    split = {Concept.PL_NE: 0, Concept.DM_NE: 0}
    total = 0
    for game in bijection_games(n_games, seed):
        reduced, _ = policy_independent_reduce(game)
        for c in split:
            a, b = _keys(brute_force_equilibria(game, c)), _keys(brute_force_equilibria(reduced, c))
            split[c] += a != b
            total += len(a)
    for c, n in split.items():
        _claim(out, f"{c.value} sets equal before and after reduction", n == 0, n, f"0 of {n_games} games differ")
    _claim(out, "suite contains equilibria", total > 0, total, "> 0")
    return out


@_scenario("measure-change", "expected costs agree under the original and the reference measure",
           n_games=Param(10, 1, 200, integer=True), n_samples=Param(1_000_000, 1000, 10**8, integer=True))
def _measure_change(n_games, n_samples):
    out = []
    worst = 0.0
    for k in range(n_games):
        rng = np.random.default_rng(100 + k)
        game = scenarios.random_finite_game(rng, 3, nested=bool(k % 2))
        reduced, _ = policy_independent_reduce(game)
        for _ in range(3):
            prof = _random_table_profile(rng, game)
            a, b = expected_cost(game, prof).values, expected_cost(reduced, prof).values
            worst = max(worst, float(np.max(np.abs(a - b))))
    _claim(out, "finite games: identical expected costs", worst <= 1e-12, worst, "<= 1e-12")
    game = scenarios.gaussian_channel()
    prof = scenarios.gaussian_channel_profile()
    reduced, _ = policy_independent_reduce(game)
    exact = expected_cost(game, prof).values
    mc = expected_cost(reduced, prof, MonteCarlo(n=n_samples, seed=DEFAULT_SEED))
    z = float(np.max(np.abs(mc.values - exact) / mc.stderr))
    _claim(out, "Gaussian channel: Monte Carlo within 4 standard errors", z <= 4.0, z, "<= 4")
    # heavy-tailed weights inflate the standard error and can hide a wrong estimate
    rel = float(np.max(mc.stderr / np.abs(exact)))
    _claim(out, "Gaussian channel: relative standard error", rel <= 0.25, rel, "<= 0.25")
    return out


def _random_table_profile(rng, game):
    from .model import TablePolicy

    return PolicyProfile(
        tuple(TablePolicy(rng.integers(0, dm.size, size=game.n_info_cells(d))) for d, dm in enumerate(game.dms)),
        game.variant,
    )


# --------------------------------------------------------------------------
# Gaussian equivalence suites
# --------------------------------------------------------------------------


def _no_split(game, prof):
    rd = float(stationarity_residual(game, prof).max())
    rs = float(stationarity_residual(game.with_variant(Variant.STATIC), policy_dependent_reduce(game, prof)).max())
    ok = (rd < 1e-8 and rs < 1e-8) or (rd > 1e-6 and rs > 1e-6)
    return ok, rd, rs


def _equivalence(zero_sum, n_games, seed):
    out = []
    splits, certified, refuted = 0, 0, 0
    for k in range(n_games):
        rng = np.random.default_rng(seed + k)
        game = scenarios.random_gaussian_game(rng, zero_sum)
        sol = solve_affine_stationary(game.with_variant(Variant.STATIC))
        for prof in (policy_dependent_lift(game, sol.profile), scenarios.random_affine_profile(rng, game, scale=0.3)):
            ok, rd, rs = _no_split(game, prof)
            splits += not ok
            certified += rd < 1e-8
            refuted += rd > 1e-6
    _claim(out, "stationarity verdicts never split", splits == 0, splits, f"0 of {2 * n_games} profiles")
    _claim(out, "lifted static solutions are stationary", certified == n_games, certified, f"{n_games}")
    _claim(out, "random profiles are not stationary", refuted == n_games, refuted, f"{n_games}")
    return out


@_scenario("nzsg-equivalence", "stationarity is preserved by the static reduction in nonzero-sum games",
           n_games=Param(10, 1, 500, integer=True), seed=Param(0, 0, 2**31, integer=True))
def _nzsg(n_games, seed):
    return _equivalence(False, n_games, seed)


@_scenario("zsg-equivalence", "stationarity is preserved by the static reduction in zero-sum games",
           n_games=Param(10, 1, 500, integer=True), seed=Param(1000, 0, 2**31, integer=True))
def _zsg(n_games, seed):
    return _equivalence(True, n_games, seed)


@_scenario("cs-expansion", "equilibria survive control-sharing expansion; the reduction ignores precedent policies",
           seed=Param(0, 0, 2**31, integer=True))
def _cs_expansion(seed):
    out = []
    lost, checked = 0, 0
    # expansion needs partial nestedness
    finite = [scenarios.guessing_game(0.3).with_variant(Variant.DYNAMIC)]
    finite += [scenarios.random_finite_game(np.random.default_rng(seed + k), 3, nested=True) for k in range(8)]
    for game in finite:
        cs = control_sharing_expand(game)
        for c in (Concept.PL_NE, Concept.DM_NE):
            for prof in brute_force_equilibria(game, c):
                checked += 1
                lost += verify_equilibrium(cs, embed_profile(game, prof), c).verdict is not Verdict.CERTIFIED
    gaussian = [
        (scenarios.example_nonexistence(), scenarios.two_dm_profile(-1.0), Concept.DM_NE),
        (scenarios.example_concave_reduction(), scenarios.two_dm_profile(1.0), Concept.PL_SPE),
        (scenarios.example_concave_lift(), scenarios.two_dm_profile(1.0, variant=Variant.STATIC), Concept.PL_SPE),
    ]
    for game, prof, c in gaussian:
        if verify_equilibrium(game, prof, c).verdict is Verdict.CERTIFIED:
            checked += 1
            cs = control_sharing_expand(game)
            lost += verify_equilibrium(cs, embed_profile(game, prof), c).verdict is not Verdict.CERTIFIED
    model = lq.LqStageModel.scalar_zero_sum(2, q=1.0, r2=3.0, noise_var=0.5)
    fb = lq.feedback_spe(model)
    for tag in ("CL", "CLCS"):
        checked += 1
        prof = lq.realize_policy(model, fb.profile(model), "F", tag)
        lost += verify_equilibrium(lq.lq_game(model, tag), prof, Concept.PL_SPE).verdict is not Verdict.CERTIFIED
    _claim(out, "certified equilibria stay certified after embedding", lost == 0, lost, f"0 of {checked}")
    changed = 0
    for k in range(5):
        rng = np.random.default_rng(seed + 50 + k)
        cs = control_sharing_expand(scenarios.random_gaussian_game(rng, bool(k % 2)))
        prof = scenarios.random_affine_profile(rng, cs)
        base = control_sharing_reduce(cs, prof)
        other = scenarios.random_affine_profile(rng, cs)
        for d in range(cs.n_dms):
            swapped = PolicyProfile(tuple(prof[e] if e == d else other[e] for e in range(cs.n_dms)), cs.variant)
            new = control_sharing_reduce(cs, swapped)
            changed += not (np.array_equal(new[d].gain, base[d].gain) and np.array_equal(new[d].offset, base[d].offset))
    _claim(out, "reduced gains are bit-identical under precedent replacement", changed == 0, changed, "0")
    return out


# --------------------------------------------------------------------------
# multi-stage suites
# --------------------------------------------------------------------------


@_scenario("lq-deterministic", "deterministic zero-sum LQ game: feedback and open-loop saddle points coincide",
           r2=Param(3.0, 1.0, np.inf, True), a=Param(1.0, -10.0, 10.0))
def _lq_det(r2, a):
    out = []
    model = lq.LqStageModel.scalar_zero_sum(2, a=a, b1=1.0, b2=1.0, q=1.0, q_final=1.0, r1=1.0, r2=r2)
    fb = lq.feedback_spe(model)
    ol = lq.openloop_spe(model, "OL")
    g_f, g_ol = lq.lq_game(model, "F"), lq.lq_game(model, "OL")
    gap = max(float(np.max(np.abs(x - y))) for x, y in
              zip(compose_actions(g_f, fb.profile(model)).gains, compose_actions(g_ol, ol.profile).gains))
    _claim(out, "realized feedback and open-loop actions agree", gap <= 1e-8, gap, "<= 1e-8")
    real = lq.realize_policy(model, fb.profile(model), "F", "OL")
    gap = max(float(np.max(np.abs(p.gain - q))) for p, q in zip(real.policies, ol.action_map))
    _claim(out, "realized F -> OL coefficients match the open-loop solution", gap <= 1e-8, gap, "<= 1e-8")
    rep = verify_equilibrium(g_f, fb.profile(model), Concept.PL_SPE)
    _claim(out, "feedback profile is a PL-SPE", rep.verdict is Verdict.CERTIFIED, _verdict(rep), "certified")
    return out


@_scenario("lq-stochastic", "stochastic zero-sum LQ game: realizations of the primitive-driven saddle point",
           noise_var=Param(0.5, 0.0, np.inf, True))
def _lq_stoch(noise_var):
    out = []
    model = lq.LqStageModel.scalar_zero_sum(2, a=1.0, b1=1.0, b2=0.5, q=1.0, q_final=1.0, r1=1.0, r2=3.0,
                                            noise_var=noise_var)
    ol = lq.openloop_spe(model, "PNOL")
    ref = solve_affine_stationary(lq.lq_game(model, "PNOL"))
    g = lq.lq_game(model, "PNOL")
    gap = max(float(np.max(np.abs(x - y))) for x, y in
              zip(compose_actions(g, ol.profile).gains, compose_actions(g, ref.profile).gains))
    _claim(out, "stacked solve matches the static stationary solve", gap <= 1e-10, gap, "<= 1e-10")
    spread, bad = 0.0, 0
    for tag in ("PNCL", "PNCS", "DPNCS"):
        prof = lq.realize_policy(model, ol.profile, "PNOL", tag)
        game = lq.lq_game(model, tag)
        spread = max(spread, abs(float(expected_cost(game, prof).values[0]) - float(ol.values[0])))
        bad += verify_equilibrium(game, prof, Concept.PL_SPE).verdict is not Verdict.CERTIFIED
    _claim(out, "realizations share the saddle value", spread <= 1e-9, spread, "<= 1e-9")
    _claim(out, "realizations are PL-SPE", bad == 0, bad, "0 of 3 refuted")
    return out


def mqi_instance(T=2, noise_var=0.5):
    model = lq.LqStageModel.scalar_zero_sum(T, a=1.0, b1=1.0, b2=0.5, q=1.0, q_final=1.0, r1=1.0, r2=3.0,
                                            noise_var=noise_var)
    pat = lq.causal_pattern(T, "full")
    return model, [pat, pat]


@_scenario("mqi", "disturbance feedforward to state feedback under mutually quadratically invariant patterns",
           n_round_trips=Param(50, 1, 10_000, integer=True), seed=Param(0, 0, 2**31, integer=True))
def _mqi(n_round_trips, seed):
    out = []
    rng = np.random.default_rng(seed)
    worst, mask_bad, mqi_true = 0.0, 0, 0
    for _ in range(n_round_trips):
        m1, m2, n = rng.integers(1, 4, size=3)
        Q1, Q2 = 0.3 * rng.standard_normal((m1, n)), 0.3 * rng.standard_normal((m2, n))
        D1, D2 = 0.3 * rng.standard_normal((n, m1)), 0.3 * rng.standard_normal((n, m2))
        K1, K2 = lq.qk_transform(Q1, Q2, D1, D2)
        R1, R2 = lq.kq_transform(K1, K2, D1, D2)
        worst = max(worst, float(np.max(np.abs(R1 - Q1))), float(np.max(np.abs(R2 - Q2))))
        # causal chain: masks lower-triangular, couplings strictly lower
        T = int(rng.integers(2, 5))
        D1c, D2c = np.tril(rng.standard_normal((T, T)), -1), np.tril(rng.standard_normal((T, T)), -1)
        S = np.tril(np.ones((T, T), dtype=bool))
        Q1c, Q2c = np.tril(rng.standard_normal((T, T))) * 0.5, np.tril(rng.standard_normal((T, T))) * 0.5
        if lq.mqi_check(S, S, D1c, D2c).holds:
            mqi_true += 1
            K1c, K2c = lq.qk_transform(Q1c, Q2c, D1c, D2c)
            mask_bad += bool(np.any(np.abs(K1c[~S]) > 1e-12) or np.any(np.abs(K2c[~S]) > 1e-12))
    _claim(out, "qk/kq round trip", worst <= 1e-10, worst, "<= 1e-10")
    _claim(out, "state-feedback gains respect invariant masks", mask_bad == 0 and mqi_true == n_round_trips,
           mask_bad, f"0 of {mqi_true} violate")
    res = lq.mqi_check(np.eye(2), np.eye(2), np.ones((2, 2)), np.ones((2, 2)))
    _claim(out, "diagonal masks with dense coupling fail at (1, 0)", not res.holds and res.witness[1] == (1, 0),
           None if res.witness is None else str(res.witness[1]), "(1, 0)")
    model, pats = mqi_instance()
    sf = lq.build_stacked_form(model)
    masks = [lq.block_mask(model, pats[i], i + 1) for i in range(2)]
    static = lq.state_feedback_game(model, pats, static=True)
    sol = solve_affine_stationary(static)
    Q1, Q2 = lq.feedforward_from_profile(model, pats, sol.profile)
    holds = lq.mqi_check(masks[0], masks[1], sf.D[0], sf.D[1]).holds
    K1, K2 = lq.qk_transform(Q1, Q2, sf.D[0], sf.D[1], masks=masks)
    prof = lq.profile_from_feedback(model, pats, (K1, K2))
    rep = verify_equilibrium(lq.state_feedback_game(model, pats), prof, Concept.PL_SPE,
                             DeviationClass("polynomial", 3))
    _claim(out, "state-feedback transform of the static saddle point is a PL-SPE",
           holds and sol.unique and rep.verdict is Verdict.CERTIFIED, _verdict(rep), "certified (polynomial deg<=3)")
    return out


def delay_sharing_instance(T=2):
    return lq.LqStageModel.scalar_team_coupled(
        T, a=0.9, b=(1.0, 0.8), q=(1.0, 0.6), q_final=(1.0, 0.8), r=((1.0, 0.3), (0.2, 1.0)),
        noise_var=0.5, obs_c=(1.0, 0.7), obs_var=(0.5, 0.8), name="delay-sharing",
    )


@_scenario("delay-sharing", "one-step delay sharing: best responses contract to the unique linear equilibrium",
           max_iter=Param(200, 1, 10_000, integer=True))
def _delay(max_iter):
    out = []
    model = delay_sharing_instance()
    game = lq.delay_sharing_game(model, "SDOS")
    sol = solve_affine_stationary(game)
    init = PolicyProfile(tuple(AffinePolicy.zeros(dm.size, game.info_dim(d)) for d, dm in enumerate(game.dms)),
                         game.variant)
    trace = best_response_iteration(game, init, max_iter=max_iter)
    _claim(out, "best-response iteration contracts", trace.converged and trace.contraction < 1,
           trace.contraction, "< 1")
    gap = max(float(np.max(np.abs(p.gain - q.gain))) for p, q in zip(trace.profile.policies, sol.profile.policies))
    _claim(out, "fixed point equals the stationary solve", sol.unique and gap <= 1e-9, gap, "<= 1e-9")
    ds = lq.delay_sharing_game(model, "DS")
    lifted = control_sharing_lift(ds, embed_profile(game, sol.profile))
    gap = max(float(np.max(np.abs(x - y))) for x, y in
              zip(compose_actions(ds, lifted).gains, compose_actions(game, sol.profile).gains))
    _claim(out, "shared-action embedding produces the same actions", gap <= 1e-10, gap, "<= 1e-10")
    rep = verify_equilibrium(ds, lifted, Concept.PL_NE)
    _claim(out, "embedded profile is a PL-NE with shared actions", rep.verdict is Verdict.CERTIFIED,
           _verdict(rep), "certified")
    return out


# --------------------------------------------------------------------------
# numerical oracles
# --------------------------------------------------------------------------


def _info_second_moment(game, profile, d):
    from . import affine

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


def _bumped(profile, d, i, j, h):
    pols = list(profile.policies)
    gain, off = pols[d].gain.copy(), pols[d].offset.copy()
    if j < gain.shape[1]:
        gain[i, j] += h
    else:
        off[i] += h
    pols[d] = AffinePolicy(gain, off)
    return PolicyProfile(tuple(pols), profile.variant)


def gradient_gap(game, profile, h=1e-5) -> float:
    """Relative gap between closed-form policy gradients and central differences."""
    worst = 0.0
    for d, det in enumerate(stationarity_details(game, profile)):
        player = game.dms[d].player
        k = det.raw_gain.shape[1]
        fd = np.zeros((game.dms[d].size, k + 1))
        for i in range(fd.shape[0]):
            for j in range(k + 1):
                up = expected_cost(game, _bumped(profile, d, i, j, h)).values[player - 1]
                dn = expected_cost(game, _bumped(profile, d, i, j, -h)).values[player - 1]
                fd[i, j] = (up - dn) / (2 * h)
        closed = np.hstack([det.raw_gain, det.raw_offset[:, None]]) @ _info_second_moment(game, profile, d)
        worst = max(worst, float(np.max(np.abs(closed - fd))) / max(1.0, float(np.max(np.abs(fd)))))
    return worst


@_scenario("gradient-oracle", "closed-form stationarity gradients agree with central finite differences",
           n_games=Param(100, 1, 10_000, integer=True), seed=Param(0, 0, 2**31, integer=True))
def _gradient(n_games, seed):
    out = []
    worst = 0.0
    for k in range(n_games):
        rng = np.random.default_rng(seed + k)
        game = scenarios.random_gaussian_game(rng, bool(k % 2))
        if k % 3 == 2:
            game = game.with_variant(Variant.STATIC)
        worst = max(worst, gradient_gap(game, scenarios.random_affine_profile(rng, game, scale=0.5)))
    _claim(out, "relative gap", worst <= 1e-6, worst, "<= 1e-6")
    return out


@_scenario("cs-interchangeability", "two saddle-point representations over shared actions interchange",
           shared_gain=Param(0.1, -10.0, 10.0))
def _interchange(shared_gain):
    out = []
    cs, first, second = scenarios.cs_saddle_profiles(shared_gain=shared_gain)
    res = interchangeability_check(cs, [first, second])
    _claim(out, "all four cross pairs are PL-SPE", res.all_certified,
           sum(v is Verdict.CERTIFIED for row in res.verdicts for v in row), "4 of 4")
    _claim(out, "values agree", res.value_spread <= 1e-10, res.value_spread, "<= 1e-10")
    return out


# --------------------------------------------------------------------------
# drivers
# --------------------------------------------------------------------------


def scenario_names():
    return sorted(SCENARIOS)


def run_scenario(name: str, overrides=None) -> ScenarioReport:
    """Run one scenario; unknown names and out-of-range overrides raise :class:`ArgumentError`."""
    if name not in SCENARIOS:
        raise ArgumentError(f"unknown scenario {name!r}; known: {', '.join(scenario_names())}")
    sc = SCENARIOS[name]
    params = sc.resolve(overrides)
    report = ScenarioReport(name, sc.summary, params)
    start = time.perf_counter()
    try:
        report.claims = sc.runner(**params)
    except IsredError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
    report.runtime = time.perf_counter() - start
    return report


def reproduce_all(names=None) -> HarnessReport:
    """Run every built-in scenario (or ``names``); failures are reported, not raised."""
    names = scenario_names() if names is None else list(names)
    return HarnessReport([run_scenario(n) for n in names])
