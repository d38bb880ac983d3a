"""Multi-stage linear-quadratic games.

Dynamics ``x_{t+1} = A_t x_t + sum_i B_t^i u_t^i + w_t`` for ``t = 0..T-1``,
optional measurements ``y_t^i = C_t^i x_t + v_t^i`` and player costs
``sum_t x_t' Q_t^i x_t + sum_j u_t^j' R_t^{j,i} u_t^j + x_T' Q_T^i x_T``.

The primitive vector ``zeta`` stacks ``x_0``, the process noises ``w_t`` and
the measurement noises ``v_t^i``.  Unrolling the recursion gives the stacked
form ``x = H zeta + sum_i D_i u^i`` used by the open-loop solver, the game
builders and the state-feedback transform.

Every information structure tag maps to an intrinsic-model game whose DMs
are the (player, stage) pairs, so the equilibria and reductions machinery
applies unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import compose_actions
from .errors import ArgumentError, ReductionRefused, SolverError, StructuralError, UnsupportedError
from .model import (
    AffineObservation,
    AffinePolicy,
    Dm,
    GameSpec,
    GaussianPrimitives,
    PolicyProfile,
    QuadraticCost,
    Variant,
)

COND_CAP = 1e12

# tag -> (measurement, history, variant); "history" forwards all earlier DMs' measurements
TAGS = {
    "OL": ("x0", False, Variant.DYNAMIC),
    "F": ("x", False, Variant.GENERAL),
    "CL": ("x", True, Variant.DYNAMIC),
    "PNC": ("x", True, Variant.DYNAMIC),
    "PNCL": ("x", True, Variant.DYNAMIC),
    "CLCS": ("x", True, Variant.DYNAMIC_CS),
    "DPNCS": ("x", True, Variant.DYNAMIC_CS),
    "CENCS": ("x", True, Variant.DYNAMIC_CS),
    "OLCS": ("x0", True, Variant.DYNAMIC_CS),
    "PNOL": ("x", True, Variant.STATIC),
    "CENOP": ("x", True, Variant.STATIC),
    "PNCS": ("x", True, Variant.STATIC_CS),
    "CENOCS": ("x", True, Variant.STATIC_CS),
    "DOS": ("y", True, Variant.DYNAMIC),
    "DS": ("y", True, Variant.DYNAMIC_CS),
    "SDOS": ("y", True, Variant.STATIC),
    "SDS": ("y", True, Variant.STATIC_CS),
}
PRIVATE_SHARING_TAGS = ("CLPCS", "OLPCS")
DELAY_TAGS = ("DOS", "DS", "SDOS", "SDS")


def _mat(a, name):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2 or not np.all(np.isfinite(a)):
        raise StructuralError(f"{name} must be a finite matrix")
    return a


def _check_psd(S, name, strict):
    if not np.allclose(S, S.T, atol=1e-12):
        raise StructuralError(f"{name} must be symmetric")
    w = np.linalg.eigvalsh(S)
    top = max(float(w[-1]), 0.0)
    if strict and w[0] <= 1e-10 * max(top, 1e-300):
        raise StructuralError(f"{name} must be positive definite")
    if not strict and w[0] < -1e-12 * max(top, 1.0):
        raise StructuralError(f"{name} must be positive semidefinite")


@dataclass(frozen=True, eq=False)
class LqStageModel:
    """Finite-horizon linear dynamics with quadratic player costs.

    Attributes
    ----------
    A : tuple of (n, n) arrays, one per stage.
    B : tuple over stages of tuples over players of (n, m_i) arrays.
    Q : tuple over players of ``T + 1`` state weights; the last is terminal.
    R : tuple over players of ``T`` tuples over acting players ``j`` of
        ``R_t^{j,i}``.
    x0_cov : covariance of the zero-mean initial state.
    noise_cov : ``T`` process-noise covariances, or ``None`` for deterministic
        dynamics.
    obs : tuple over players of ``T`` measurement matrices ``C_t^i`` or ``None``.
    obs_cov : matching measurement-noise covariances.
    """

    A: tuple
    B: tuple
    Q: tuple
    R: tuple
    x0_cov: np.ndarray
    noise_cov: tuple = None
    obs: tuple = None
    obs_cov: tuple = None
    zero_sum: bool = False
    name: str = ""

    def __post_init__(self):
        T = len(self.A)
        if T < 1:
            raise StructuralError("horizon must be at least one stage")
        A = tuple(_mat(a, f"A_{t}") for t, a in enumerate(self.A))
        n = A[0].shape[0]
        if len(self.B) != T:
            raise StructuralError("B needs one entry per stage")
        B = tuple(tuple(_mat(b, f"B_{t}^{i + 1}") for i, b in enumerate(bt)) for t, bt in enumerate(self.B))
        N = len(B[0])
        m = tuple(b.shape[1] for b in B[0])
        for t in range(T):
            if A[t].shape != (n, n):
                raise StructuralError(f"A_{t} has shape {A[t].shape}, expected {(n, n)}")
            if len(B[t]) != N or any(b.shape != (n, m[i]) for i, b in enumerate(B[t])):
                raise StructuralError(f"B_{t} does not chain with the state and action sizes")
        if len(self.Q) != N or len(self.R) != N:
            raise StructuralError("Q and R need one entry per player")
        Q = tuple(tuple(_mat(q, f"Q^{i + 1}") for q in Qi) for i, Qi in enumerate(self.Q))
        R = tuple(tuple(tuple(_mat(r, f"R^{j + 1},{i + 1}") for j, r in enumerate(Rt)) for Rt in Ri)
                  for i, Ri in enumerate(self.R))
        for i in range(N):
            if len(Q[i]) != T + 1 or any(q.shape != (n, n) for q in Q[i]):
                raise StructuralError(f"player {i + 1} needs T + 1 state weights of shape {(n, n)}")
            if len(R[i]) != T:
                raise StructuralError(f"player {i + 1} needs T action-weight tuples")
            for t in range(T):
                if len(R[i][t]) != N or any(R[i][t][j].shape != (m[j], m[j]) for j in range(N)):
                    raise StructuralError(f"R_{t} of player {i + 1} does not match the action sizes")
                for j in range(N):
                    if not np.allclose(R[i][t][j], R[i][t][j].T, atol=1e-12):
                        raise StructuralError("action weights must be symmetric")
                _check_psd(R[i][t][i], f"own action weight R_{t}^{i + 1},{i + 1}", strict=True)
        x0_cov = _mat(self.x0_cov, "x0_cov")
        if x0_cov.shape != (n, n):
            raise StructuralError("x0_cov does not match the state size")
        _check_psd(x0_cov, "x0_cov", strict=True)
        noise = None
        if self.noise_cov is not None:
            noise = tuple(_mat(s, f"noise_cov_{t}") for t, s in enumerate(self.noise_cov))
            if len(noise) != T or any(s.shape != (n, n) for s in noise):
                raise StructuralError("noise_cov needs T covariances of the state size")
            for t, s in enumerate(noise):
                _check_psd(s, f"noise_cov_{t}", strict=True)
        obs = obs_cov = None
        if self.obs is not None:
            if self.obs_cov is None or len(self.obs) != N or len(self.obs_cov) != N:
                raise StructuralError("obs and obs_cov need one entry per player")
            obs = tuple(tuple(_mat(c, "C") for c in ci) for ci in self.obs)
            obs_cov = tuple(tuple(_mat(s, "obs_cov") for s in si) for si in self.obs_cov)
            for i in range(N):
                if len(obs[i]) != T or len(obs_cov[i]) != T:
                    raise StructuralError("measurements need one entry per stage")
                for t in range(T):
                    if obs[i][t].shape[1] != n or obs_cov[i][t].shape != (obs[i][t].shape[0],) * 2:
                        raise StructuralError(f"measurement of player {i + 1} at stage {t} has bad dimensions")
                    _check_psd(obs_cov[i][t], "obs_cov", strict=True)
        if self.zero_sum:
            if N != 2:
                raise StructuralError("zero-sum models have two players")
            same = all(np.array_equal(Q[1][t], -Q[0][t]) for t in range(T + 1)) and all(
                np.array_equal(R[1][t][j], -R[0][t][j]) for t in range(T) for j in range(2)
            )
            if not same:
                raise StructuralError("zero-sum flag requires player 2's weights to negate player 1's")
        for k, v in dict(A=A, B=B, Q=Q, R=R, x0_cov=x0_cov, noise_cov=noise, obs=obs, obs_cov=obs_cov).items():
            object.__setattr__(self, k, v)

    # -- sizes --------------------------------------------------------------------

    @property
    def horizon(self) -> int:
        return len(self.A)

    @property
    def n_players(self) -> int:
        return len(self.B[0])

    @property
    def n_state(self) -> int:
        return self.A[0].shape[0]

    @property
    def action_sizes(self) -> tuple:
        return tuple(b.shape[1] for b in self.B[0])

    @property
    def deterministic(self) -> bool:
        return self.noise_cov is None

    @property
    def has_measurements(self) -> bool:
        return self.obs is not None

    def dm_index(self, player: int, t: int) -> int:
        """Global DM index of (player, stage); DMs are ordered stage-major."""
        return t * self.n_players + (player - 1)

    # -- constructors -------------------------------------------------------------

    @classmethod
    def scalar_zero_sum(cls, T: int, a: float = 1.0, b1: float = 1.0, b2: float = 1.0, q: float = 0.0,
                        q_final: float = 1.0, r1: float = 1.0, r2: float = 2.0, x0_var: float = 1.0,
                        noise_var=None, name: str = "scalar-zsg"):
        """Scalar game with cost ``sum q x_t^2 + r1 (u1)^2 - r2 (u2)^2 + q_final x_T^2``."""
        Q1 = tuple([[[q]]] * T) + ([[q_final]],)
        R1 = tuple(([[r1]], [[-r2]]) for _ in range(T))
        Q2 = tuple(-np.asarray(x) for x in Q1)
        R2 = tuple(tuple(-np.asarray(x) for x in rt) for rt in R1)
        noise = None if noise_var is None else tuple([[[noise_var]]] * T)
        return cls(tuple([[[a]]] * T), tuple(([[b1]], [[b2]]) for _ in range(T)), (Q1, Q2), (R1, R2),
                   [[x0_var]], noise, zero_sum=True, name=name)

    @classmethod
    def scalar_team_coupled(cls, T: int, a: float = 1.0, b=(1.0, 1.0), q=(1.0, 0.5), q_final=(1.0, 0.5),
                            r=((1.0, 0.0), (0.0, 1.0)), x0_var: float = 1.0, noise_var: float = 1.0,
                            obs_c=(1.0, 1.0), obs_var=(1.0, 1.0), name: str = "scalar-nzsg"):
        """Scalar N-player game with noisy measurements ``y_t^i = c_i x_t + v_t^i``.

        ``r[i][j]`` weights player ``j``'s action in player ``i``'s cost.
        """
        N = len(b)
        Q = tuple(tuple([[[q[i]]]] * T) + ([[q_final[i]]],) for i in range(N))
        R = tuple(tuple(tuple([[r[i][j]]] for j in range(N)) for _ in range(T)) for i in range(N))
        return cls(
            tuple([[[a]]] * T), tuple(tuple([[bi]] for bi in b) for _ in range(T)), Q, R, [[x0_var]],
            tuple([[[noise_var]]] * T), tuple(tuple([[[obs_c[i]]]] * T) for i in range(N)),
            tuple(tuple([[[obs_var[i]]]] * T) for i in range(N)), False, name,
        )


# --------------------------------------------------------------------------
# stacked form
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StackedForm:
    """``x = H zeta + sum_i D_i u^i`` with ``x = (x_0..x_T)``, ``u^i = (u_0^i..u_{T-1}^i)``.

    ``obs_H[i][t]`` and ``obs_D[i][t][j]`` give ``y_t^i = obs_H zeta + sum_j obs_D u^j``.
    ``zeta_blocks`` names the primitive blocks; ``zeta_cov`` is their joint
    covariance (process-noise blocks are zero for deterministic models).
    """

    H: np.ndarray
    D: tuple
    zeta_blocks: tuple
    zeta_cov: np.ndarray
    obs_H: tuple = None
    obs_D: tuple = None

    def state_rows(self, t: int, n: int) -> slice:
        return slice(t * n, (t + 1) * n)


def _zeta_layout(model):
    n = model.n_state
    blocks = [("x0", n)] + [(f"w{t}", n) for t in range(model.horizon)]
    if model.has_measurements:
        for t in range(model.horizon):
            for i in range(model.n_players):
                blocks.append((f"v{t}_{i + 1}", model.obs[i][t].shape[0]))
    covs = [model.x0_cov]
    for t in range(model.horizon):
        covs.append(np.zeros((n, n)) if model.deterministic else model.noise_cov[t])
    if model.has_measurements:
        for t in range(model.horizon):
            for i in range(model.n_players):
                covs.append(model.obs_cov[i][t])
    size = sum(s for _, s in blocks)
    cov = np.zeros((size, size))
    o = 0
    for c in covs:
        k = c.shape[0]
        cov[o : o + k, o : o + k] = c
        o += k
    return tuple(blocks), cov


def build_stacked_form(model: LqStageModel) -> StackedForm:
    """Unroll the dynamics into block lower-triangular maps."""
    T, n, N = model.horizon, model.n_state, model.n_players
    m = model.action_sizes
    blocks, cov = _zeta_layout(model)
    nz = cov.shape[0]
    H = np.zeros((n * (T + 1), nz))
    D = [np.zeros((n * (T + 1), m[i] * T)) for i in range(N)]
    H[:n, :n] = np.eye(n)
    for t in range(T):
        rows, prev = slice((t + 1) * n, (t + 2) * n), slice(t * n, (t + 1) * n)
        H[rows] = model.A[t] @ H[prev]
        H[rows, n * (t + 1) : n * (t + 2)] += np.eye(n)  # w_t
        for i in range(N):
            D[i][rows] = model.A[t] @ D[i][prev]
            D[i][rows, t * m[i] : (t + 1) * m[i]] += model.B[t][i]
    obs_H = obs_D = None
    if model.has_measurements:
        offs, o = {}, 0
        for name, size in blocks:
            offs[name] = (o, size)
            o += size
        obs_H, obs_D = [], []
        for i in range(N):
            hi, di = [], []
            for t in range(T):
                C = model.obs[i][t]
                rows = slice(t * n, (t + 1) * n)
                Ht = C @ H[rows]
                vo, vs = offs[f"v{t}_{i + 1}"]
                Ht[:, vo : vo + vs] += np.eye(vs)
                hi.append(Ht)
                di.append(tuple(C @ D[j][rows] for j in range(N)))
            obs_H.append(tuple(hi))
            obs_D.append(tuple(di))
        obs_H, obs_D = tuple(obs_H), tuple(obs_D)
    return StackedForm(H, tuple(D), blocks, cov, obs_H, obs_D)


def _active_columns(sf: StackedForm):
    """Primitive columns with nonzero variance (deterministic noise is dropped)."""
    keep, names, o = [], [], 0
    for name, size in sf.zeta_blocks:
        blk = sf.zeta_cov[o : o + size, o : o + size]
        if np.any(blk):
            keep.extend(range(o, o + size))
            names.append((name, size))
        o += size
    return np.array(keep, dtype=int), tuple(names)


def _dm_order_D(model, sf):
    """Stacked D with action columns in DM order (stage-major)."""
    T, N, m = model.horizon, model.n_players, model.action_sizes
    cols = []
    for t in range(T):
        for i in range(N):
            cols.append(sf.D[i][:, t * m[i] : (t + 1) * m[i]])
    return np.hstack(cols)


def _dm_slices(model):
    out, o = [], 0
    for t in range(model.horizon):
        for i in range(model.n_players):
            out.append(slice(o, o + model.action_sizes[i]))
            o += model.action_sizes[i]
    return out


def _cost_blocks(model, player):
    """Stacked ``(Qbar, Rbar)`` of ``player`` with actions in DM order."""
    T, N, n = model.horizon, model.n_players, model.n_state
    Qbar = np.zeros((n * (T + 1), n * (T + 1)))
    for t in range(T + 1):
        Qbar[t * n : (t + 1) * n, t * n : (t + 1) * n] = model.Q[player - 1][t]
    sl = _dm_slices(model)
    Rbar = np.zeros((sl[-1].stop, sl[-1].stop))
    for t in range(T):
        for j in range(N):
            s = sl[t * N + j]
            Rbar[s, s] = model.R[player - 1][t][j]
    return Qbar, Rbar


# --------------------------------------------------------------------------
# intrinsic-model games
# --------------------------------------------------------------------------


def _game_cost(model, sf, keep, player):
    """Quadratic cost on ``z = [zeta_active; u (DM order)]``."""
    Qbar, Rbar = _cost_blocks(model, player)
    Hk = sf.H[:, keep]
    Dm_ = _dm_order_D(model, sf)
    X = np.hstack([Hk, Dm_])  # x = X z
    nz, nu = Hk.shape[1], Dm_.shape[1]
    M = X.T @ Qbar @ X
    M[nz:, nz:] += Rbar
    M = 0.5 * (M + M.T)
    return QuadraticCost(M, np.zeros(nz + nu))


def lq_game(model: LqStageModel, tag: str) -> GameSpec:
    """Intrinsic-model game of ``model`` under the information structure ``tag``.

    DMs are ``(player, stage)`` pairs in stage-major order.  History tags
    forward every earlier DM's measurement; control-sharing tags append all
    earlier actions; static tags replace each measurement by its
    primitive-driven part.
    """
    tag = str(tag).upper()
    if tag in PRIVATE_SHARING_TAGS:
        raise UnsupportedError(f"{tag} shares only a player's own actions, which has no intrinsic-model layout here")
    if tag not in TAGS:
        raise ArgumentError(f"unknown information structure {tag!r}")
    meas, history, variant = TAGS[tag]
    if meas == "y" and not model.has_measurements:
        raise ArgumentError(f"{tag} needs a model with measurements")
    sf = build_stacked_form(model)
    keep, names = _active_columns(sf)
    cov = sf.zeta_cov[np.ix_(keep, keep)]
    prims = GaussianPrimitives(np.zeros(keep.size), cov, names)
    T, N = model.horizon, model.n_players
    Dm_ = _dm_order_D(model, sf)
    sl = _dm_slices(model)
    n = model.n_state
    dms, obs = [], []
    for t in range(T):
        earlier = tuple(range(t * N))
        for i in range(N):
            dms.append(Dm(f"u{i + 1}_{t}", i + 1, t, model.action_sizes[i]))
            if meas == "x0":
                Hrow, Drow, noise = sf.H[:n], np.zeros((n, Dm_.shape[1])), None
            elif meas == "x":
                rows = slice(t * n, (t + 1) * n)
                Hrow, Drow, noise = sf.H[rows], Dm_[rows], None
            else:
                Hrow = sf.obs_H[i][t]
                Drow = np.hstack([sf.obs_D[i][t][j][:, s * model.action_sizes[j] : (s + 1) * model.action_sizes[j]]
                                  for s in range(T) for j in range(N)])
                noise = f"v{t}_{i + 1}"
            prec = earlier if (variant.control_sharing or meas != "x0") else ()
            D = np.hstack([Drow[:, sl[k]] for k in prec]) if prec else None
            fwd = earlier if history else ()
            obs.append(AffineObservation(Hrow[:, keep], D=D, precedence=prec, forward=fwd, noise_block=noise))
    costs = tuple(_game_cost(model, sf, keep, i + 1) for i in range(N))
    # build in dynamic or general form, then switch to the requested form
    base_variant = Variant.GENERAL if not history else Variant.DYNAMIC
    game = GameSpec(prims, tuple(dms), tuple(obs), costs, base_variant, model.zero_sum, f"{model.name}:{tag}")
    return game.with_variant(variant) if variant is not base_variant else game


def delay_sharing_game(model: LqStageModel, tag: str) -> GameSpec:
    """Delay-sharing game (``DOS``, ``DS``, ``SDOS`` or ``SDS``)."""
    tag = str(tag).upper()
    if tag not in DELAY_TAGS:
        raise ArgumentError(f"delay-sharing tags are {DELAY_TAGS}, got {tag!r}")
    if model.horizon < 2:
        raise ArgumentError("delay sharing needs a horizon of at least two stages")
    return lq_game(model, tag)


def block_mask(model: LqStageModel, pattern, player: int) -> np.ndarray:
    """Entry-level mask from a ``(T, T + 1)`` stage pattern of player ``player``."""
    pattern = np.asarray(pattern, dtype=bool)
    T, n = model.horizon, model.n_state
    if pattern.shape != (T, T + 1):
        raise ArgumentError(f"stage pattern must have shape {(T, T + 1)}")
    return np.kron(pattern, np.ones((model.action_sizes[player - 1], n), dtype=bool))


def state_feedback_game(model: LqStageModel, patterns, static: bool = False) -> GameSpec:
    """Game where DM (i, t) measures the states ``x_s`` with ``patterns[i][t, s]``.

    Patterns must be causal (``s <= t``) and give every DM at least one state.
    With ``static`` the measurements are replaced by their primitive-driven parts.
    """
    T, N, n = model.horizon, model.n_players, model.n_state
    pats = [np.asarray(p, dtype=bool) for p in patterns]
    if len(pats) != N or any(p.shape != (T, T + 1) for p in pats):
        raise ArgumentError(f"need one {(T, T + 1)} stage pattern per player")
    sf = build_stacked_form(model)
    keep, names = _active_columns(sf)
    prims = GaussianPrimitives(np.zeros(keep.size), sf.zeta_cov[np.ix_(keep, keep)], names)
    Dm_ = _dm_order_D(model, sf)
    sl = _dm_slices(model)
    dms, obs = [], []
    for t in range(T):
        for i in range(N):
            seen = np.flatnonzero(pats[i][t])
            if seen.size == 0 or seen.max() > t:
                raise ArgumentError(f"pattern of player {i + 1} at stage {t} must be causal and nonempty")
            rows = np.concatenate([np.arange(s * n, (s + 1) * n) for s in seen])
            last = int(seen.max())
            prec = tuple(range(last * N))
            D = np.hstack([Dm_[rows][:, sl[k]] for k in prec]) if prec else None
            dms.append(Dm(f"u{i + 1}_{t}", i + 1, t, model.action_sizes[i]))
            obs.append(AffineObservation(sf.H[rows][:, keep], D=D, precedence=prec))
    costs = tuple(_game_cost(model, sf, keep, i + 1) for i in range(N))
    game = GameSpec(prims, tuple(dms), tuple(obs), costs, Variant.GENERAL, model.zero_sum, f"{model.name}:state-feedback")
    return game.with_variant(Variant.STATIC) if static else game


# --------------------------------------------------------------------------
# feedback saddle point
# --------------------------------------------------------------------------


@dataclass
class FeedbackSolution:
    """Gains ``u_t^i = K_t^i x_t`` and value ``x_t' P_t x_t + c_t`` of player 1."""

    gains: tuple
    P: tuple
    const: tuple

    def value(self, x0) -> float:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return float(x0 @ self.P[0] @ x0 + self.const[0])

    def expected_value(self, x0_cov) -> float:
        return float(np.trace(self.P[0] @ x0_cov) + self.const[0])

    def profile(self, model: LqStageModel) -> PolicyProfile:
        """The gains as a profile of :func:`lq_game` under tag ``F``."""
        pols = []
        for t in range(model.horizon):
            for i in range(model.n_players):
                K = self.gains[t][i]
                pols.append(AffinePolicy(K, np.zeros(K.shape[0])))
        return PolicyProfile(tuple(pols), Variant.GENERAL)


def feedback_spe(model: LqStageModel) -> FeedbackSolution:
    """Pure-feedback saddle point by backward induction.

    At each stage the pair ``(u_t^1, u_t^2)`` solves the joint first-order
    conditions of ``x'Q_t x + u'R_t u + E[V_{t+1}(x_{t+1})]``; the minimizer's
    block must be positive definite and the maximizer's negative definite.
    """
    if not model.zero_sum:
        raise ArgumentError("feedback saddle points need a zero-sum model")
    T = model.horizon
    m1, m2 = model.action_sizes
    P = model.Q[0][T]
    c = 0.0
    gains, Ps, cs = [None] * T, [None] * (T + 1), [None] * (T + 1)
    Ps[T], cs[T] = P, 0.0
    for t in reversed(range(T)):
        A, (B1, B2) = model.A[t], model.B[t]
        R11, R21 = model.R[0][t]
        S11 = R11 + B1.T @ P @ B1
        S22 = R21 + B2.T @ P @ B2
        if np.linalg.eigvalsh(0.5 * (S11 + S11.T))[0] <= 0:
            raise SolverError(f"no pure-feedback saddle point: minimizer's stage-{t} block is not positive definite")
        if np.linalg.eigvalsh(0.5 * (S22 + S22.T))[-1] >= 0:
            raise SolverError(f"no pure-feedback saddle point: maximizer's stage-{t} block is not negative definite")
        S = np.block([[S11, B1.T @ P @ B2], [B2.T @ P @ B1, S22]])
        rhs = -np.vstack([B1.T @ P @ A, B2.T @ P @ A])
        K = np.linalg.solve(S, rhs)
        K1, K2 = K[:m1], K[m1:]
        Acl = A + B1 @ K1 + B2 @ K2
        noise = 0.0 if model.deterministic else float(np.trace(P @ model.noise_cov[t]))
        c = c + noise
        P = model.Q[0][t] + K1.T @ R11 @ K1 + K2.T @ R21 @ K2 + Acl.T @ P @ Acl
        P = 0.5 * (P + P.T)
        gains[t], Ps[t], cs[t] = (K1, K2), P, c
    return FeedbackSolution(tuple(gains), tuple(Ps), tuple(cs))


# --------------------------------------------------------------------------
# open-loop equilibria from the stacked form
# --------------------------------------------------------------------------


@dataclass
class OpenLoopSolution:
    """Open-loop equilibrium ``u = Lambda zeta`` over the active primitives.

    ``action_map[d]`` is DM ``d``'s row block of ``Lambda``; ``profile`` is
    the same solution over the information layout of :func:`lq_game`.
    """

    tag: str
    action_map: tuple
    profile: PolicyProfile
    values: np.ndarray
    value_forms: tuple

    def stacked(self) -> np.ndarray:
        return np.vstack(self.action_map)


def _measurable_rows(model, sf, keep, tag, t):
    n = model.n_state
    if tag == "OL":
        return sf.H[:n, keep]
    return sf.H[: (t + 1) * n, keep]


def openloop_spe(model: LqStageModel, tag: str = "OL") -> OpenLoopSolution:
    """Equilibrium among policies measurable in the primitive information of ``tag``.

    ``OL`` policies see ``x_0``; ``PNOL`` and ``CENOP`` see the
    primitive-driven states ``H_s zeta`` for ``s <= t``.  Each player's
    stacked own-action Hessian must be positive definite in its own cost.
    """
    tag = str(tag).upper()
    if tag not in ("OL", "PNOL", "CENOP"):
        raise ArgumentError("open-loop tags are OL, PNOL and CENOP")
    sf = build_stacked_form(model)
    keep, _ = _active_columns(sf)
    Sigma = sf.zeta_cov[np.ix_(keep, keep)]
    Hk = sf.H[:, keep]
    Dm_ = _dm_order_D(model, sf)
    sl = _dm_slices(model)
    T, N = model.horizon, model.n_players
    n_dm = T * N
    own = {}
    curv = {}
    for i in range(N):
        Qbar, Rbar = _cost_blocks(model, i + 1)
        Mi = Dm_.T @ Qbar @ Dm_ + Rbar
        curv[i] = (Mi, Dm_.T @ Qbar @ Hk)
        rows = np.concatenate([np.arange(sl[d].start, sl[d].stop) for d in range(n_dm) if d % N == i])
        own[i] = Mi[np.ix_(rows, rows)]
        if np.linalg.eigvalsh(0.5 * (own[i] + own[i].T))[0] <= 0:
            raise SolverError(f"no open-loop equilibrium certificate: player {i + 1}'s stacked block is not definite")
    Pm = [_measurable_rows(model, sf, keep, tag, d // N) for d in range(n_dm)]
    shapes = [(sl[d].stop - sl[d].start, Pm[d].shape[0]) for d in range(n_dm)]
    offs = np.concatenate([[0], np.cumsum([a * b for a, b in shapes])]).astype(int)
    A_rows, b_rows = [], []
    for d in range(n_dm):
        Mi, Gi = curv[d % N]
        right_d = Sigma @ Pm[d].T
        row = np.zeros((shapes[d][0] * shapes[d][1], offs[-1]))
        for e in range(n_dm):
            left = Mi[sl[d], sl[e]]
            row[:, offs[e] : offs[e + 1]] = np.kron(left, (Pm[e] @ right_d).T)
        A_rows.append(row)
        b_rows.append(-(Gi[sl[d]] @ right_d).reshape(-1))
    A, b = np.vstack(A_rows), np.concatenate(b_rows)
    x, *_ = np.linalg.lstsq(A, b, rcond=1e-13)
    scale = max(1.0, float(np.max(np.abs(b))))
    if np.max(np.abs(A @ x - b)) > 1e-9 * scale:
        raise SolverError("open-loop first-order system is inconsistent")
    action_map = tuple(x[offs[d] : offs[d + 1]].reshape(shapes[d]) @ Pm[d] for d in range(n_dm))
    Lam = np.vstack(action_map)
    forms, values = [], []
    for i in range(N):
        Qbar, Rbar = _cost_blocks(model, i + 1)
        X = Hk + Dm_ @ Lam
        W = X.T @ Qbar @ X + Lam.T @ Rbar @ Lam
        forms.append(0.5 * (W + W.T))
        values.append(float(np.trace(W @ Sigma)))
    game = lq_game(model, tag)
    profile = _represent_profile(game, action_map)
    return OpenLoopSolution(tag, action_map, profile, np.array(values), tuple(forms))


# --------------------------------------------------------------------------
# realization maps between information structures
# --------------------------------------------------------------------------


def _solve_exact(basis, target, tol=1e-10):
    """``X`` with ``X @ basis = target`` using first occurrences of repeated rows.

    Returns ``None`` when no exact solution exists.
    """
    scale = max(1.0, float(np.max(np.abs(target), initial=0.0)))
    first = []
    for r in range(basis.shape[0]):
        if not any(np.array_equal(basis[r], basis[f]) for f in first):
            first.append(r)
    X = np.zeros((target.shape[0], basis.shape[0]))
    if not first:
        return X if np.max(np.abs(target), initial=0.0) <= tol * scale else None
    B = basis[first]
    Y = np.linalg.lstsq(B.T, target.T, rcond=1e-12)[0].T
    if np.max(np.abs(Y @ B - target), initial=0.0) > tol * scale:
        return None
    X[:, first] = Y
    return X


def _represent_profile(game, gains, offsets=None):
    """Profile over ``game``'s information producing ``u_d = gains[d] zeta + offsets[d]``.

    DMs are fitted in order, so each information vector is a fixed affine
    function of the primitives once the earlier policies are known.
    """
    from . import affine

    pols = [AffinePolicy.zeros(dm.size, game.info_dim(d)) for d, dm in enumerate(game.dms)]
    for d, dm in enumerate(game.dms):
        sysm = affine.linearize(game, PolicyProfile(tuple(pols), game.variant))
        G = _solve_exact(sysm.info_F[d], gains[d])
        if G is None:
            raise ReductionRefused(f"actions of DM {dm.name} {dm.label} are not measurable in its information")
        off = np.zeros(dm.size) if offsets is None else offsets[d] - G @ sysm.info_f[d]
        pols[d] = AffinePolicy(G, off)
    return PolicyProfile(tuple(pols), game.variant)


def realize_policy(model: LqStageModel, profile: PolicyProfile, from_tag: str, to_tag: str) -> PolicyProfile:
    """Profile over ``to_tag`` producing the same actions as ``profile`` over ``from_tag``.

    When ``from_tag``'s information is a fixed linear function of
    ``to_tag``'s (expansions, measurement substitutions through shared
    actions) the map is applied directly and does not depend on other DMs'
    policies.  Otherwise the realized trajectory is used; DMs whose actions
    are not measurable in the new information are reported.
    """
    from . import affine

    g_from, g_to = lq_game(model, from_tag), lq_game(model, to_tag)
    every = range(g_from.n_dms)
    sym_from = affine.linearize(g_from, None, free=every)
    sym_to = affine.linearize(g_to, None, free=every)
    maps = []
    for d in every:
        X = _solve_exact(np.hstack([sym_to.info_F[d], sym_to.info_E[d]]),
                         np.hstack([sym_from.info_F[d], sym_from.info_E[d]]))
        if X is None:
            break
        maps.append(X)
    else:
        pols = tuple(AffinePolicy(p.gain @ X, p.offset) for p, X in zip(profile.policies, maps))
        return PolicyProfile(pols, g_to.variant)
    amap = compose_actions(g_from, profile)
    return _represent_profile(g_to, amap.gains, amap.offsets)


# --------------------------------------------------------------------------
# state feedback and disturbance feedforward
# --------------------------------------------------------------------------


@dataclass
class MqiResult:
    holds: bool
    witness: tuple = None  # (product, (row, column)) of the first violation, column-major


def _support(a):
    return np.asarray(a) != 0


def mqi_check(S1, S2, D1, D2) -> MqiResult:
    """Mutual quadratic invariance of masks ``S1, S2`` under ``[D1 D2]``.

    Supports are multiplied structurally; the first entry (column-major)
    that a product can fill outside the required mask is returned.
    """
    S1, S2 = _support(S1), _support(S2)
    D1, D2 = _support(D1), _support(D2)
    if S1.shape[1] != D1.shape[0] or S2.shape[1] != D2.shape[0] or D1.shape[1] != S1.shape[0] \
            or D2.shape[1] != S2.shape[0]:
        raise ArgumentError("mask and coupling shapes are inconsistent")

    def prod(a, b, c):
        return (a.astype(int) @ b.astype(int) @ c.astype(int)) > 0

    checks = (
        ("K1 D1 K1", prod(S1, D1, S1), S1),
        ("K1 D2 K2", prod(S1, D2, S2), S1),
        ("K2 D1 K1", prod(S2, D1, S1), S2),
        ("K2 D2 K2", prod(S2, D2, S2), S2),
    )
    for label, got, allowed in checks:
        bad = got & ~allowed
        if bad.any():
            cols = np.flatnonzero(bad.any(axis=0))
            col = int(cols[0])
            row = int(np.flatnonzero(bad[:, col])[0])
            return MqiResult(False, (label, (row, col)))
    return MqiResult(True)


def _stack(Q1, Q2):
    Q1, Q2 = np.atleast_2d(np.asarray(Q1, float)), np.atleast_2d(np.asarray(Q2, float))
    return np.vstack([Q1, Q2]), Q1.shape[0]


def qk_transform(Q1, Q2, D1, D2, masks=None):
    """State-feedback gains ``[K1; K2] = (I + [Q1; Q2][D1 D2])^{-1} [Q1; Q2]``.

    With ``masks`` the output sparsity is checked whenever the masks are
    mutually quadratically invariant.
    """
    Q, m1 = _stack(Q1, Q2)
    D = np.hstack([np.atleast_2d(np.asarray(D1, float)), np.atleast_2d(np.asarray(D2, float))])
    M = np.eye(Q.shape[0]) + Q @ D
    if np.linalg.cond(M) >= COND_CAP:
        raise ReductionRefused("I + Q D is singular to working precision")
    K = np.linalg.solve(M, Q)
    K1, K2 = K[:m1], K[m1:]
    if masks is not None and mqi_check(masks[0], masks[1], D1, D2).holds:
        scale = max(1.0, float(np.max(np.abs(K))))
        for Ki, Si in zip((K1, K2), masks):
            if np.any(np.abs(Ki[~_support(Si)]) > 1e-12 * scale):
                raise SolverError("state-feedback gains leave the invariant sparsity pattern")
    return K1, K2


def kq_transform(K1, K2, D1, D2):
    """Inverse of :func:`qk_transform`: ``[Q1; Q2] = (I - [K1; K2][D1 D2])^{-1} [K1; K2]``."""
    K, m1 = _stack(K1, K2)
    D = np.hstack([np.atleast_2d(np.asarray(D1, float)), np.atleast_2d(np.asarray(D2, float))])
    M = np.eye(K.shape[0]) - K @ D
    if np.linalg.cond(M) >= COND_CAP:
        raise ReductionRefused("I - K D is singular to working precision")
    Q = np.linalg.solve(M, K)
    return Q[:m1], Q[m1:]


def feedforward_from_profile(model, patterns, profile):
    """Disturbance-feedforward matrices ``Q^i`` from a static state-feedback profile.

    ``Q^i`` maps the primitive-driven stacked state ``H zeta`` to ``u^i``
    (time-ordered) and is zero outside the player's pattern.
    """
    T, N, n = model.horizon, model.n_players, model.n_state
    m = model.action_sizes
    Qs = [np.zeros((m[i] * T, n * (T + 1))) for i in range(N)]
    for t in range(T):
        for i in range(N):
            seen = np.flatnonzero(np.asarray(patterns[i], bool)[t])
            gain = profile[model.dm_index(i + 1, t)].gain
            for k, s in enumerate(seen):
                Qs[i][t * m[i] : (t + 1) * m[i], s * n : (s + 1) * n] = gain[:, k * n : (k + 1) * n]
    return tuple(Qs)


def profile_from_feedback(model, patterns, gains, variant=Variant.GENERAL) -> PolicyProfile:
    """Profile of :func:`state_feedback_game` from stacked state-feedback gains ``K^i``."""
    T, N, n = model.horizon, model.n_players, model.n_state
    m = model.action_sizes
    pols = []
    for t in range(T):
        for i in range(N):
            seen = np.flatnonzero(np.asarray(patterns[i], bool)[t])
            rows = gains[i][t * m[i] : (t + 1) * m[i]]
            pols.append(AffinePolicy(np.hstack([rows[:, s * n : (s + 1) * n] for s in seen]), np.zeros(m[i])))
    return PolicyProfile(tuple(pols), variant)


def causal_pattern(T: int, kind: str = "full", delay: int = 0) -> np.ndarray:
    """Stage pattern: ``full`` sees ``x_0..x_{t-delay}`` (always ``x_0``); ``current`` sees ``x_t``."""
    pat = np.zeros((T, T + 1), dtype=bool)
    for t in range(T):
        if kind == "full":
            pat[t, : max(t - delay, 0) + 1] = True
        elif kind == "current":
            pat[t, t] = True
        elif kind == "initial":
            pat[t, 0] = True
        else:
            raise ArgumentError(f"unknown pattern kind {kind!r}")
    return pat
