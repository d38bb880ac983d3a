"""Builders for the canonical example games and seeded random families."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError
from .model import (
    AffineObservation,
    AffinePolicy,
    Dm,
    FinitePrimitives,
    GameSpec,
    GaussianPrimitives,
    PolicyProfile,
    QuadraticCost,
    TableCost,
    TableObservation,
    TablePolicy,
    Variant,
)


def _two_dm_primitives():
    return GaussianPrimitives(np.zeros(2), np.eye(2), (("w1", 1), ("w2", 1)))


def _two_dm_observations():
    # DM 1 sees w1; DM 2 sees DM 1's measurement and w2 + u1.
    first = AffineObservation(H=[[1.0, 0.0]])
    second = AffineObservation(H=[[0.0, 1.0]], G=[[1.0]], D=[[1.0]], precedence=(0,), forward=(0,))
    return first, second


def _two_dm_game(costs, variant, zero_sum, name):
    dms = (Dm("u1", 1, 1), Dm("u2", 2, 1))
    return GameSpec(_two_dm_primitives(), dms, _two_dm_observations(), costs, variant, zero_sum, name)


def _check_range(name, value, lo, hi, lo_open=True, hi_open=True):
    bad_lo = value <= lo if lo_open else value < lo
    bad_hi = value >= hi if hi_open else value > hi
    if bad_lo or bad_hi or not np.isfinite(value):
        raise ArgumentError(f"{name}={value} is outside its admissible range ({lo}, {hi})")


def example_nonexistence(B: float = 1.0, variant=Variant.DYNAMIC) -> GameSpec:
    """Two-player game with misaligned targets.

    ``J1 = E(u1 + u2 - B + w2)^2`` and ``J2 = E(u1 + u2 + w2)^2``; DM 2
    measures ``w2 + u1`` and also holds DM 1's measurement ``w1``.
    """
    _check_range("B", B, 0.0, np.inf)
    a = np.array([0.0, 1.0, 1.0, 1.0])  # w2 + u1 + u2 on z = [w1, w2, u1, u2]
    c1 = QuadraticCost.from_squares(4, [(1.0, a, -B)])
    c2 = QuadraticCost.from_squares(4, [(1.0, a, 0.0)])
    return _two_dm_game((c1, c2), variant, False, "example-3.1")


def example_concave_reduction(alpha: float = 0.5, variant=Variant.DYNAMIC) -> GameSpec:
    """Zero-sum game ``alpha u1^2 - (u1 - u2 + w2)^2``; DM 1 minimizes."""
    _check_range("alpha", alpha, 0.0, 1.0)
    e_u1 = np.array([0.0, 0.0, 1.0, 0.0])
    gap = np.array([0.0, 1.0, 1.0, -1.0])
    c = QuadraticCost.from_squares(4, [(alpha, e_u1, 0.0), (-1.0, gap, 0.0)])
    return _two_dm_game((c, -c), variant, True, "example-4.1")


def example_concave_lift(alpha: float = 0.5, beta: float = 2.0, variant=Variant.STATIC) -> GameSpec:
    """Zero-sum game ``(u1 - u2 + w2)^2 - alpha u1^2 - beta (u2 - w2)^2``."""
    _check_range("alpha", alpha, 0.0, 1.0)
    _check_range("beta", beta, 1.0, np.inf)
    e_u1 = np.array([0.0, 0.0, 1.0, 0.0])
    gap = np.array([0.0, 1.0, 1.0, -1.0])
    track = np.array([0.0, -1.0, 0.0, 1.0])
    c = QuadraticCost.from_squares(4, [(1.0, gap, 0.0), (-alpha, e_u1, 0.0), (-beta, track, 0.0)])
    return _two_dm_game((c, -c), variant, True, "example-4.2")


def two_dm_profile(second_own_gain: float, second_fwd_gain: float = 0.0, variant=Variant.DYNAMIC):
    """``u1 = 0`` and ``u2 = fwd * y1 + own * y2`` for the two-DM examples."""
    return PolicyProfile(
        (
            AffinePolicy([[0.0]], [0.0]),
            AffinePolicy([[second_fwd_gain, second_own_gain]], [0.0]),
        ),
        variant,
    )


def gaussian_channel(variant=Variant.GENERAL) -> GameSpec:
    """Noisy channel game for the change-of-measure checks.

    Primitives ``w0, v1, v2`` are independent standard normals; DM 1 measures
    ``w0 + v1`` and DM 2 measures ``u1 + v2``.
    """
    prims = GaussianPrimitives(np.zeros(3), np.eye(3), (("w0", 1), ("v1", 1), ("v2", 1)))
    obs = (
        AffineObservation(H=[[1.0, 1.0, 0.0]], noise_block="v1"),
        AffineObservation(H=[[0.0, 0.0, 1.0]], D=[[1.0]], precedence=(0,), noise_block="v2"),
    )
    dms = (Dm("u1", 1, 1), Dm("u2", 2, 1))
    # z = [w0, v1, v2, u1, u2]
    c1 = QuadraticCost.from_squares(
        5, [(1.0, [-1.0, 0, 0, 1.0, 0], 0.0), (0.5, [0, 0, 0, 0, 1.0], 0.0)]
    )
    c2 = QuadraticCost.from_squares(5, [(1.0, [-0.5, 0, 0, -0.5, 1.0], 0.2)])
    return GameSpec(prims, dms, obs, (c1, c2), variant, False, "gaussian-channel")


def gaussian_channel_profile(variant=Variant.GENERAL):
    return PolicyProfile(
        (AffinePolicy([[0.5]], [0.1]), AffinePolicy([[0.7]], [-0.2])),
        variant,
    )


# --------------------------------------------------------------------------
# finite toys
# --------------------------------------------------------------------------


def _bit(p=0.5):
    return np.array([1.0 - p, p])


def relay_game(p: float = 0.5) -> GameSpec:
    """DM 1 sees a bit ``w0``; DM 2 sees DM 1's action; both pay on mismatch."""
    prims = FinitePrimitives((("w0", _bit(p)),))
    obs = (
        TableObservation(2, [0, 1]),
        TableObservation(2, [[0, 1], [0, 1]], precedence=(0,)),
    )
    dms = (Dm("u1", 1, 1, 2), Dm("u2", 2, 1, 2))
    mismatch = np.zeros((2, 2, 2))
    for w in range(2):
        for a in range(2):
            for b in range(2):
                mismatch[w, a, b] = float(a != b)
    return GameSpec(prims, dms, obs, (TableCost(mismatch), TableCost(mismatch)), Variant.GENERAL, False, "relay")


def guessing_game(p: float = 0.5) -> GameSpec:
    """One DM observes ``w0`` and pays ``1{u != w0}``."""
    prims = FinitePrimitives((("w0", _bit(p)),))
    obs = (TableObservation(2, [0, 1]),)
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    return GameSpec(prims, (Dm("u1", 1, 1, 2),), obs, (TableCost(cost),), Variant.GENERAL, False, "guess")


def xor_channel_game(p: float = 0.3) -> GameSpec:
    """DM 2 measures ``u1 XOR b`` with ``P(b = 1) = p``; ``w0`` is a fair bit."""
    prims = FinitePrimitives((("w0", _bit(0.5)), ("b", _bit(p))))
    # outcome index = 2 * w0 + b
    t1 = np.array([0, 0, 1, 1])
    t2 = np.zeros((4, 2), dtype=int)
    for o in range(4):
        for u in range(2):
            t2[o, u] = u ^ (o % 2)
    obs = (
        TableObservation(2, t1),
        TableObservation(2, t2, precedence=(0,), noise_block="b"),
    )
    dms = (Dm("u1", 1, 1, 2), Dm("u2", 2, 1, 2))
    c1 = np.zeros((4, 2, 2))
    c2 = np.zeros((4, 2, 2))
    for o in range(4):
        w = o // 2
        for a in range(2):
            for b in range(2):
                c1[o, a, b] = float(a != w) + 0.5 * float(b != w)
                c2[o, a, b] = float(b != a)
    return GameSpec(prims, dms, obs, (TableCost(c1), TableCost(c2)), Variant.GENERAL, False, "xor-channel")


def table_profile(*tables, variant=Variant.GENERAL):
    return PolicyProfile(tuple(TablePolicy(t) for t in tables), variant)


def random_finite_game(rng, n_dms: int = 3, n_players=None, nested: bool = False, zero_sum: bool = False,
                       noise: bool = True) -> GameSpec:
    """Seeded finite game with binary actions and binary measurements.

    Every DM's measurement mixes the common bit ``w0``, an optional private
    noise bit and some precedent actions.  With ``nested`` every DM also holds
    all earlier measurements.
    """
    n_players = n_dms if n_players is None else n_players
    if zero_sum and n_players != 2:
        raise ArgumentError("zero-sum games have two players")
    blocks = [("w0", _bit(float(rng.uniform(0.2, 0.8))))]
    if noise:
        blocks += [(f"n{d + 1}", _bit(float(rng.uniform(0.1, 0.9)))) for d in range(n_dms)]
    prims = FinitePrimitives(tuple(blocks))
    vals = prims.outcome_values()
    n_out = prims.n_outcomes
    players = [1 + (d % n_players) for d in range(n_dms)]
    stages = {}
    dms = []
    for d, p in enumerate(players):
        stages[p] = stages.get(p, 0) + 1
        dms.append(Dm(f"u{d + 1}", p, stages[p], 2))
    obs = []
    for d in range(n_dms):
        earlier = list(range(d))
        prec = tuple(k for k in earlier if rng.random() < 0.6)
        fwd = tuple(earlier) if nested else tuple(k for k in earlier if rng.random() < 0.5)
        sizes = (2,) * len(prec)
        table = np.zeros((n_out,) + sizes, dtype=int)
        mix_w = rng.integers(0, 2)
        mix_u = rng.integers(0, 2, size=len(prec))
        for o in range(n_out):
            base = int(vals[o, 0]) * mix_w
            if noise:
                base ^= int(vals[o, 1 + d])
            for u in np.ndindex(*sizes):
                acc = base
                for bit, m in zip(u, mix_u):
                    acc ^= int(bit) * int(m)
                table[(o,) + u] = acc
        obs.append(TableObservation(2, table, prec, fwd, f"n{d + 1}" if noise else None))
    acts = (2,) * n_dms
    # costs depend on w0 and actions only, so noise bits stay cost-free
    base_costs = []
    for _ in range(n_players):
        per_w = rng.integers(0, 5, size=(2,) + acts).astype(float)
        base_costs.append(per_w[vals[:, 0]])
    if zero_sum:
        base_costs[1] = -base_costs[0]
    variant = Variant.DYNAMIC if nested else Variant.GENERAL
    return GameSpec(prims, tuple(dms), tuple(obs), tuple(TableCost(c) for c in base_costs), variant, zero_sum,
                    "random-finite")


# --------------------------------------------------------------------------
# Gaussian families
# --------------------------------------------------------------------------


def _random_cov(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T / n + 0.5 * np.eye(n)


def _random_obs(rng, n_zeta, size, precedence, prec_size):
    G = rng.normal(size=(size, size)) * 0.5 + 2.0 * np.eye(size)
    D = rng.normal(size=(size, prec_size)) if prec_size else None
    return AffineObservation(rng.normal(size=(size, n_zeta)), G=G, D=D, precedence=precedence, forward=precedence)


def random_gaussian_game(rng, zero_sum: bool = False, n_zeta: int = 3) -> GameSpec:
    """Seeded partially nested Gaussian game with proportional coupled costs.

    Non-zero-sum games have players 1 and 2 acting on a three-DM chain
    ``a -> b -> c`` with ``c2 = k * c1`` (``k > 0``) and an isolated player 3
    with its own convex cost.  Zero-sum games use the same chain with a cost
    convex in player 1's actions and concave in player 2's.
    """
    prims = GaussianPrimitives(rng.normal(size=n_zeta) * 0.5, _random_cov(rng, n_zeta), (("zeta", n_zeta),))
    chain = [
        _random_obs(rng, n_zeta, 1, (), 0),
        _random_obs(rng, n_zeta, 1, (0,), 1),
        _random_obs(rng, n_zeta, 1, (0, 1), 2),
    ]
    dms = [Dm("a", 1, 1), Dm("b", 2, 1), Dm("c", 1, 2)]
    if zero_sum:
        nz = n_zeta + 3
        # action block in (u_a, u_c | u_b) order: convex for player 1, concave for player 2
        A = _random_cov(rng, 2)
        Bm = _random_cov(rng, 1)
        C = rng.normal(size=(2, 1))
        Muu = np.block([[A, C], [C.T, -Bm]])
        perm = [0, 2, 1]
        Muu = Muu[np.ix_(perm, perm)]
        M = np.zeros((nz, nz))
        M[:n_zeta, :n_zeta] = _random_cov(rng, n_zeta)
        cross = rng.normal(size=(n_zeta, 3))
        M[:n_zeta, n_zeta:] = cross
        M[n_zeta:, :n_zeta] = cross.T
        M[n_zeta:, n_zeta:] = Muu
        c = QuadraticCost(M, rng.normal(size=nz))
        return GameSpec(prims, tuple(dms), tuple(chain), (c, -c), Variant.DYNAMIC, True, "random-zsg")
    chain.append(AffineObservation(rng.normal(size=(1, n_zeta))))
    dms.append(Dm("d", 3, 1))
    nz = n_zeta + 4
    R1 = rng.normal(size=(nz, nz))
    R3 = rng.normal(size=(nz, nz))
    c1 = QuadraticCost(R1 @ R1.T / nz + 0.1 * np.eye(nz), rng.normal(size=nz))
    c3 = QuadraticCost(R3 @ R3.T / nz + 0.1 * np.eye(nz), rng.normal(size=nz))
    k = float(rng.uniform(0.5, 2.0))
    return GameSpec(prims, tuple(dms), tuple(chain), (c1, c1.scaled(k), c3), Variant.DYNAMIC, False, "random-nzsg")


def random_affine_profile(rng, game, variant=None, scale: float = 1.0) -> PolicyProfile:
    variant = game.variant if variant is None else variant
    return PolicyProfile(
        tuple(
            AffinePolicy(scale * rng.normal(size=(dm.size, game.info_dim(d, variant))), scale * rng.normal(size=dm.size))
            for d, dm in enumerate(game.dms)
        ),
        variant,
    )


def coupled_static_game(coupling: float = 0.5, rho: float = 0.5) -> GameSpec:
    """Two scalar players tracking ``w_i + coupling * u_j`` from private ``w_i``."""
    if not abs(coupling) < 1:
        raise ArgumentError("coupling must lie in (-1, 1)")
    _check_range("rho", rho, -1.0, 1.0)
    prims = GaussianPrimitives(np.zeros(2), np.array([[1.0, rho], [rho, 1.0]]), (("w1", 1), ("w2", 1)))
    obs = (AffineObservation([[1.0, 0.0]]), AffineObservation([[0.0, 1.0]]))
    # z = [w1, w2, u1, u2]
    c1 = QuadraticCost.from_squares(4, [(1.0, [-1.0, 0.0, 1.0, -coupling], 0.0)])
    c2 = QuadraticCost.from_squares(4, [(1.0, [0.0, -1.0, -coupling, 1.0], 0.0)])
    return GameSpec(prims, (Dm("u1", 1, 1), Dm("u2", 2, 1)), obs, (c1, c2), Variant.STATIC, False, "coupled-static")


def single_dm_regulator(r: float = 2.0, s: float = 1.0, noise_var: float = 0.5) -> GameSpec:
    """One DM paying ``r u^2 + 2 s u w0 + w0^2`` from ``y = w0 + v``."""
    _check_range("r", r, 0.0, np.inf)
    _check_range("noise_var", noise_var, 0.0, np.inf)
    prims = GaussianPrimitives(np.zeros(2), np.diag([1.0, noise_var]), (("w0", 1), ("v", 1)))
    obs = (AffineObservation([[1.0, 1.0]], noise_block="v"),)
    M = np.zeros((3, 3))
    M[0, 0], M[2, 2] = 1.0, r
    M[0, 2] = M[2, 0] = s
    return GameSpec(prims, (Dm("u", 1, 1),), obs, (QuadraticCost(M, np.zeros(3)),), Variant.STATIC, False, "regulator")


def cs_saddle_profiles(game=None, shared_gain: float = 0.1):
    """Two saddle-point representations of the concave-lift game over shared actions.

    The first zero-pads the static saddle point ``(0, (0, I))``; the second lets
    DM 2 also react to the shared action ``u1`` with ``shared_gain``.  Both
    produce the same actions.
    """
    from .reductions import control_sharing_expand

    base = example_concave_lift(variant=Variant.DYNAMIC) if game is None else game
    cs = control_sharing_expand(base.with_variant(Variant.STATIC))
    # DM 2 layout: (obs y1, act u1, obs y2)
    first = PolicyProfile((AffinePolicy([[0.0]], [0.0]), AffinePolicy([[0.0, 0.0, 1.0]], [0.0])), cs.variant)
    second = PolicyProfile(
        (AffinePolicy([[0.0]], [0.0]), AffinePolicy([[0.0, shared_gain, 1.0]], [0.0])), cs.variant
    )
    return cs, first, second
