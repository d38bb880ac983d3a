"""Nash, saddle-point and stationary solutions: computation and verification.

Gaussian games are handled in closed form.  Every expected cost is quadratic
in the actions, so with the other DMs' affine policies fixed:

* the best response of a set of DMs over policies of their primitive-driven
  information is the solution of a linear system (conditional means are
  affine in the information);
* a non-convex direction is exhibited by a constant probe along a negative
  eigenvector of the action Hessian;
* polynomial probes of degree up to three measure how much a nonlinear
  deviation could gain.

Finite games are checked exhaustively.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import affine, finite
from .core import DEFAULT_SEED, compose_actions, expected_cost
from .errors import (
    ArgumentError,
    PrimitiveMismatch,
    SizeGuardError,
    SolverError,
    StructuralError,
    UnsupportedError,
)
from .model import AffinePolicy, PolicyProfile, QuadraticCost, TablePolicy, check_profile

COND_CAP = 1e12
# moments E[a^k] of a standard normal
NORMAL_MOMENTS = (1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0)


class Concept(str, enum.Enum):
    PL_NE = "pl-ne"
    DM_NE = "dm-ne"
    PL_SPE = "pl-spe"
    DM_SPE = "dm-spe"
    STATIONARY = "stationary"

    @property
    def player_level(self) -> bool:
        return self in (Concept.PL_NE, Concept.PL_SPE)

    @property
    def zero_sum(self) -> bool:
        return self in (Concept.PL_SPE, Concept.DM_SPE)


class Verdict(str, enum.Enum):
    CERTIFIED = "certified"
    REFUTED = "refuted"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Tolerances:
    certify: float = 1e-8
    refute: float = 1e-6

    def __post_init__(self):
        if not (0 < self.certify <= self.refute):
            raise ArgumentError("tolerances must satisfy 0 < certify <= refute")

    def verdict(self, improvement: float) -> Verdict:
        if improvement <= self.certify:
            return Verdict.CERTIFIED
        if improvement > self.refute:
            return Verdict.REFUTED
        return Verdict.INCONCLUSIVE


@dataclass(frozen=True)
class DeviationClass:
    """Deviations checked by :func:`verify_equilibrium`.

    ``kind`` is ``"exhaustive"`` (finite games), ``"affine"`` (exact affine
    best responses) or ``"polynomial"`` (affine plus polynomial probes of
    degree up to ``degree`` along ``n_directions`` seeded random functionals).
    """

    kind: str = "polynomial"
    degree: int = 3
    n_directions: int = 4
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.kind not in ("exhaustive", "affine", "polynomial"):
            raise ArgumentError(f"unknown deviation class {self.kind!r}")
        if not 0 <= self.degree <= 3:
            raise ArgumentError("polynomial probes are limited to degree 3")

    @property
    def label(self) -> str:
        if self.kind == "polynomial":
            return f"affine+polynomial(deg<={self.degree}, dirs={self.n_directions}, seed={self.seed})"
        return self.kind


@dataclass
class Witness:
    """An improving deviation: who deviates, how, and by how much."""

    who: str
    deviation: str
    improvement: float
    policy: object = None


@dataclass
class EquilibriumReport:
    concept: Concept
    verdict: Verdict
    residuals: dict = field(default_factory=dict)
    witness: Witness = None
    witnesses: list = field(default_factory=list)
    improvements: dict = field(default_factory=dict)
    values: np.ndarray = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    deviation_class: str = ""
    notes: list = field(default_factory=list)

    @property
    def max_improvement(self) -> float:
        return max(self.improvements.values(), default=0.0)

    def summary(self) -> dict:
        w = self.witness
        return {
            "concept": self.concept.value,
            "verdict": self.verdict.value,
            "max_improvement": self.max_improvement,
            "residuals": dict(self.residuals),
            "witness": None if w is None else {"who": w.who, "deviation": w.deviation, "improvement": w.improvement},
            "deviation_class": self.deviation_class,
            "tolerances": {"certify": self.tolerances.certify, "refute": self.tolerances.refute},
        }


# --------------------------------------------------------------------------
# stationarity
# --------------------------------------------------------------------------


@dataclass
class StationarityResult:
    """Conditional gradient ``E[grad | y] = gain @ y + offset`` of one DM.

    ``raw_*`` is the gradient itself; ``gain``/``offset`` are scaled by the
    inverse own-action Hessian when it is nonsingular.
    """

    dm: str
    raw_gain: np.ndarray
    raw_offset: np.ndarray
    gain: np.ndarray
    offset: np.ndarray
    newton_scaled: bool

    @property
    def residual(self) -> float:
        return float(max(np.max(np.abs(self.gain), initial=0.0), np.max(np.abs(self.offset), initial=0.0)))


def _player_cost(game, d):
    cost = game.player_cost(game.dms[d].player)
    if not isinstance(cost, QuadraticCost):
        raise UnsupportedError("closed-form analysis needs quadratic costs")
    return cost


def _require_gaussian(game):
    if game.family != "gaussian":
        raise UnsupportedError("stationarity analysis is available for Gaussian-quadratic games only")


def stationarity_details(game, profile):
    """Per-DM conditional gradients at ``profile``."""
    _require_gaussian(game)
    check_profile(game, profile)
    mean, cov = game.primitives.mean, game.primitives.cov
    full = affine.linearize(game, profile)
    out = []
    for d, dm in enumerate(game.dms):
        cost = _player_cost(game, d)
        sysm = affine.linearize(game, profile, free=[d])
        K = sysm.K
        grad_z = 2.0 * K.T @ cost.M  # gradient = grad_z @ z + K' b
        g_zeta = grad_z @ full.L
        g0 = grad_z @ full.m + K.T @ cost.b
        P, q = affine.conditional_mean_map(mean, cov, sysm.info_F[d], sysm.info_f[d])
        raw_gain = g_zeta @ P
        raw_off = g_zeta @ q + g0
        hess = 2.0 * K.T @ cost.M @ K
        scaled = np.linalg.cond(hess) < COND_CAP
        if scaled:
            Hinv = np.linalg.inv(hess)
            gain, off = Hinv @ raw_gain, Hinv @ raw_off
        else:
            gain, off = raw_gain, raw_off
        out.append(StationarityResult(dm.name, raw_gain, raw_off, gain, off, bool(scaled)))
    return out


def stationarity_residual(game, profile) -> np.ndarray:
    """Infinity norm of each DM's conditional-gradient coefficients."""
    return np.array([r.residual for r in stationarity_details(game, profile)])


# --------------------------------------------------------------------------
# the stationary linear system
# --------------------------------------------------------------------------


@dataclass
class StationarySolution:
    """Result of solving the joint stationarity conditions.

    ``profile`` is ``None`` when the system is inconsistent, in which case
    ``residual`` is the smallest achievable L1 norm of the (Newton-scaled)
    stationarity coefficients.
    """

    profile: PolicyProfile
    feasible: bool
    residual: float
    manifold_dim: int
    n_unknowns: int
    rank: int
    definite: bool
    residuals: np.ndarray = None

    @property
    def unique(self) -> bool:
        return self.feasible and self.manifold_dim == 0


def _support_basis(mean_s, cov_s):
    """Orthonormal basis of the support of ``[s; 1]``'s second moment."""
    k = mean_s.shape[0]
    S = np.zeros((k + 1, k + 1))
    S[:k, :k] = cov_s + np.outer(mean_s, mean_s)
    S[:k, k] = mean_s
    S[k, :k] = mean_s
    S[k, k] = 1.0
    w, V = np.linalg.eigh(S)
    keep = w > 1e-12 * max(w[-1], 1.0)
    return V[:, keep]


class _LinearSystem:
    """Stationarity conditions of the ``free`` DMs over their static information.

    Each free DM ``e`` plays ``u_e = X_e U_e' [s_e; 1]`` where ``s_e`` is the
    part of its information driven by the primitives and ``U_e`` spans the
    support of ``[s_e; 1]``.
    """

    def __init__(self, game, profile, free):
        _require_gaussian(game)
        self.game = game
        self.free = tuple(free)
        mean, cov = game.primitives.mean, game.primitives.cov
        self.sys = sysm = affine.linearize(game, profile, free=self.free)
        self.U, self.T, self.W_parts = {}, {}, {}
        for e in self.free:
            F, f = sysm.info_F[e], sysm.info_f[e]
            self.U[e] = _support_basis(F @ mean + f, F @ cov @ F.T)
            P, q = affine.conditional_mean_map(mean, cov, F, f)
            self.T[e] = np.hstack([P, q[:, None]])
        self.shapes = {e: (game.dms[e].size, self.U[e].shape[1]) for e in self.free}
        self.offsets, s = {}, 0
        for e in self.free:
            self.offsets[e] = s
            s += int(np.prod(self.shapes[e]))
        self.n_unknowns = s
        rows, rhs, self.row_slices = [], [], {}
        self.hessians, self.definite = {}, True
        r0 = 0
        for d in self.free:
            cost = _player_cost(game, d)
            Kd = sysm.K[:, sysm.free_cols[d]]
            base = 2.0 * Kd.T @ cost.M
            H_zeta = base @ sysm.L
            h = base @ sysm.m + Kd.T @ cost.b
            H_dd = base @ Kd
            self.definite &= bool(np.linalg.eigvalsh(0.5 * (H_dd + H_dd.T))[0] > 0)
            # Newton scaling when the own block is invertible, raw gradient otherwise
            N = np.linalg.inv(H_dd) if np.linalg.cond(H_dd) < COND_CAP else np.eye(H_dd.shape[0])
            Td, Ud = self.T[d], self.U[d]
            n_s = Td.shape[1] - 1
            e_last = np.zeros(n_s + 1)
            e_last[-1] = 1.0
            const = N @ (H_zeta @ Td + np.outer(h, e_last)) @ Ud
            block = np.zeros((const.size, self.n_unknowns))
            for e in self.free:
                Ke = sysm.K[:, sysm.free_cols[e]]
                H_de = N @ base @ Ke
                Fe, fe = sysm.info_F[e], sysm.info_f[e]
                W = np.vstack([Fe @ Td + np.outer(fe, e_last), e_last[None, :]])
                right = self.U[e].T @ W @ Ud
                o = self.offsets[e]
                block[:, o : o + int(np.prod(self.shapes[e]))] = np.kron(H_de, right.T)
            rows.append(block)
            rhs.append(-const.reshape(-1))
            self.row_slices[d] = slice(r0, r0 + const.size)
            r0 += const.size
        self.A = np.vstack(rows) if rows else np.zeros((0, 0))
        self.b = np.concatenate(rhs) if rhs else np.zeros(0)

    def policies(self, x):
        out = {}
        for e in self.free:
            o = self.offsets[e]
            X = x[o : o + int(np.prod(self.shapes[e]))].reshape(self.shapes[e])
            At = X @ self.U[e].T
            out[e] = AffinePolicy(At[:, :-1], At[:, -1])
        return out

    def row_residuals(self, x):
        r = self.A @ x - self.b
        return {d: float(np.max(np.abs(r[s]), initial=0.0)) for d, s in self.row_slices.items()}

    def solve(self):
        A, b = self.A, self.b
        if A.size == 0:
            return np.zeros(self.n_unknowns), True, 0, 0.0
        sv = np.linalg.svd(A, compute_uv=False)
        rank = int(np.sum(sv > 1e-10 * max(sv[0], 1e-300))) if sv.size else 0
        x, *_ = np.linalg.lstsq(A, b, rcond=1e-12)
        r = A @ x - b
        scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
        consistent = bool(np.max(np.abs(r), initial=0.0) <= 1e-9 * scale)
        return x, consistent, rank, float(np.sum(np.abs(r)))

    def l1_residual(self):
        """Smallest L1 norm of ``A x - b`` (linear program)."""
        A, b = self.A, self.b
        m, n = A.shape
        c = np.concatenate([np.zeros(n), np.ones(m)])
        I = np.eye(m)
        A_ub = np.block([[A, -I], [-A, -I]])
        b_ub = np.concatenate([b, -b])
        bounds = [(None, None)] * n + [(0, None)] * m
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            raise SolverError(f"L1 residual program failed: {res.message}")
        return float(res.fun), res.x[:n]


def solve_affine_stationary(game) -> StationarySolution:
    """Affine profile at which every DM's conditional gradient vanishes.

    The game must be in the static or static control-sharing form.  For the
    control-sharing form the shared-action inputs get zero gains (one
    representation among many with the same actions).
    """
    if not game.variant.static:
        raise StructuralError("solve_affine_stationary needs a static-form game")
    base = game.with_variant(game.variant.with_sharing(False))
    ls = _LinearSystem(base, None, range(base.n_dms))
    x, consistent, rank, _ = ls.solve()
    manifold = ls.n_unknowns - rank
    if not consistent:
        l1, _ = ls.l1_residual()
        return StationarySolution(None, False, l1, manifold, ls.n_unknowns, rank, ls.definite)
    pols = ls.policies(x)
    profile = PolicyProfile(tuple(pols[d] for d in range(base.n_dms)), base.variant)
    res = stationarity_residual(base, profile)
    if game.variant.control_sharing:
        from .reductions import embed_profile

        profile = embed_profile(base, profile, game.variant)
    return StationarySolution(profile, True, float(np.max(res, initial=0.0)), manifold, ls.n_unknowns, rank,
                              ls.definite, res)


# --------------------------------------------------------------------------
# Gaussian best responses and probes
# --------------------------------------------------------------------------


def _value_with(game, profile, free, pols, player):
    """Expected cost of ``player`` when ``free`` DMs play ``pols`` over static info."""
    sysm = affine.linearize(game, profile, free=free)
    n = game.n_zeta
    V = np.zeros((sysm.n_free, n))
    v0 = np.zeros(sysm.n_free)
    for e in free:
        cols = sysm.free_cols[e]
        V[cols] = pols[e].gain @ sysm.info_F[e]
        v0[cols] = pols[e].gain @ sysm.info_f[e] + pols[e].offset
    L = sysm.L + sysm.K @ V
    m = sysm.m + sysm.K @ v0
    mu = L @ game.primitives.mean + m
    cov = L @ game.primitives.cov @ L.T
    return affine.quadratic_expectation(game.player_cost(player), mu, cov)


@dataclass
class _Check:
    who: str
    improvement: float
    deviation: str
    policy: object = None
    exact: bool = True


def _gaussian_group_check(game, profile, free, player, current):
    """Best improvement of ``player`` by changing the policies of ``free``."""
    cost = game.player_cost(player)
    sysm = affine.linearize(game, profile, free=free)
    K = sysm.K
    Q = K.T @ cost.M @ K
    Q = 0.5 * (Q + Q.T)
    w, V = np.linalg.eigh(Q)
    label = _who(game, free, player)
    exact = all(not np.any(sysm.info_E[e]) for e in free)
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    if w.size and w[0] < -1e-12 * scale:
        e = V[:, 0]
        full = affine.linearize(game, profile)
        grad_mean = 2.0 * K.T @ cost.M @ (full.L @ game.primitives.mean + full.m) + K.T @ cost.b
        slope = float(e @ grad_mean)
        gain = abs(slope) - float(e @ Q @ e)
        sign = -1.0 if slope > 0 else 1.0
        return _Check(label, gain, f"constant shift {np.array2string(sign * e, precision=6)} on top of current policy")
    ls = _LinearSystem(game, profile, free)
    x, consistent, _, _ = ls.solve()
    if not consistent:
        return _Check(label, np.inf, "cost unbounded below along a flat direction")
    pols = ls.policies(x)
    best = _value_with(game, profile, free, pols, player)
    policy = pols if exact else None
    return _Check(label, current - best, "affine best response", policy, exact)


def _who(game, free, player):
    if len(free) == 1:
        dm = game.dms[free[0]]
        return f"DM {dm.name} {dm.label}"
    return f"player {player}"


def _probe_check(game, profile, free, player, dev: DeviationClass, rng):
    """Largest gain from polynomial probes ``t * e_d * a_d(s_d)**k``."""
    cost = game.player_cost(player)
    sysm = affine.linearize(game, profile, free=free)
    full = affine.linearize(game, profile)
    mean, cov = game.primitives.mean, game.primitives.cov
    K = sysm.K
    G = 2.0 * K.T @ cost.M
    g_zeta = G @ full.L
    g0 = G @ full.m + K.T @ cost.b
    Q = K.T @ cost.M @ K
    best = _Check(_who(game, free, player), 0.0, "no improving polynomial probe")
    for _ in range(dev.n_directions):
        funcs, dirs = {}, {}
        for e in free:
            F, f = sysm.info_F[e], sysm.info_f[e]
            w = rng.standard_normal(F.shape[0])
            a_row = w @ F
            var = float(a_row @ cov @ a_row)
            d_e = rng.standard_normal(game.dms[e].size)
            d_e /= np.linalg.norm(d_e)
            dirs[e] = d_e
            funcs[e] = None if var <= 1e-14 else (a_row / np.sqrt(var), float(a_row @ mean + w @ f))
        for k in range(dev.degree + 1):
            lin, quad = 0.0, 0.0
            for e in free:
                cols = sysm.free_cols[e]
                x_row = dirs[e] @ g_zeta[cols]
                x_mean = float(x_row @ mean + dirs[e] @ g0[cols])
                if funcs[e] is None:
                    if k > 0:
                        continue
                    lin += x_mean
                else:
                    a_row = funcs[e][0]
                    beta = float(x_row @ cov @ a_row)
                    lin += x_mean * NORMAL_MOMENTS[k] + beta * NORMAL_MOMENTS[k + 1]
            for e in free:
                for e2 in free:
                    qv = float(dirs[e] @ Q[sysm.free_cols[e], sysm.free_cols[e2]] @ dirs[e2])
                    quad += qv * _cross_moment(funcs[e], funcs[e2], cov, k)
            if quad > 1e-12:
                gain = lin * lin / (4.0 * quad)
            else:
                gain = abs(lin) - quad
            if gain > best.improvement:
                best = _Check(best.who, gain, f"degree-{k} polynomial probe")
    return best


def _cross_moment(fa, fb, cov, k):
    """``E[a^k b^k]`` for standardized jointly Gaussian functionals."""
    if k == 0:
        return 1.0
    if fa is None or fb is None:
        return 0.0
    rho = float(fa[0] @ cov @ fb[0])
    return (1.0, rho, 1.0 + 2.0 * rho * rho, 9.0 * rho + 6.0 * rho**3)[k]


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------


def _groups(game, concept):
    if concept.player_level:
        return [(game.player_dms(p), p) for p in game.players]
    return [((d,), dm.player) for d, dm in enumerate(game.dms)]


def verify_equilibrium(game, profile, concept, deviation_class=None, tol=None) -> EquilibriumReport:
    """Check a profile against unilateral deviations.

    Parameters
    ----------
    concept : Concept or str
    deviation_class : DeviationClass, optional
        Defaults to exhaustive for finite games and affine plus polynomial
        probes for Gaussian games.
    tol : Tolerances, optional
    """
    concept = Concept(concept)
    tol = Tolerances() if tol is None else tol
    if concept.zero_sum and not game.zero_sum:
        raise ArgumentError(f"{concept.value} needs a zero-sum game")
    check_profile(game, profile)
    if concept is Concept.STATIONARY:
        res = stationarity_residual(game, profile)
        report = EquilibriumReport(concept, Verdict.CERTIFIED, tolerances=tol, deviation_class="first-order")
        report.residuals = {dm.name: float(r) for dm, r in zip(game.dms, res)}
        report.improvements = dict(report.residuals)
        report.verdict = tol.verdict(float(np.max(res, initial=0.0)))
        if report.verdict is Verdict.REFUTED:
            d = int(np.argmax(res))
            report.witness = Witness(game.dms[d].name, "nonzero conditional gradient", float(res[d]))
            report.witnesses = [report.witness]
        return report
    if game.family == "finite":
        return _verify_finite(game, profile, concept, tol)
    dev = DeviationClass() if deviation_class is None else deviation_class
    if dev.kind == "exhaustive":
        raise ArgumentError("exhaustive deviations are only available for finite games")
    values = expected_cost(game, profile).values
    report = EquilibriumReport(concept, Verdict.CERTIFIED, values=values, tolerances=tol,
                               deviation_class=dev.label)
    try:
        report.residuals = {dm.name: float(r) for dm, r in zip(game.dms, stationarity_residual(game, profile))}
    except (SolverError, UnsupportedError):
        pass
    rng = np.random.default_rng(dev.seed)
    checks = []
    for free, player in _groups(game, concept):
        current = float(values[player - 1])
        c = _gaussian_group_check(game, profile, free, player, current)
        if not c.exact:
            report.notes.append(f"{c.who}: best response computed over primitive-driven information")
        checks.append(c)
        if dev.kind == "polynomial":
            checks.append(_probe_check(game, profile, free, player, dev, rng))
    _finish(report, checks, tol)
    return report


def _finish(report, checks, tol):
    for c in checks:
        report.improvements[c.who] = max(report.improvements.get(c.who, -np.inf), c.improvement)
    worst = max(report.improvements.values(), default=0.0)
    report.verdict = tol.verdict(worst)
    ranked = sorted(checks, key=lambda c: (-c.improvement, c.who))
    report.witnesses = [Witness(c.who, c.deviation, c.improvement, c.policy) for c in ranked if c.improvement > tol.refute]
    if report.verdict is Verdict.REFUTED:
        # prefer the closed-form (affine / eigen-direction) witness of the worst group
        top = ranked[0].who
        group = [c for c in ranked if c.who == top]
        pick = next((c for c in group if "probe" not in c.deviation and c.improvement > tol.refute), group[0])
        report.witness = Witness(pick.who, pick.deviation, pick.improvement, pick.policy)


def _verify_finite(game, profile, concept, tol):
    values = expected_cost(game, profile).values
    report = EquilibriumReport(concept, Verdict.CERTIFIED, values=values, tolerances=tol, deviation_class="exhaustive")
    checks = []
    for free, player in _groups(game, concept):
        best, tables = finite_best_response(game, profile, free, player)
        checks.append(_Check(_who(game, free, player), float(values[player - 1] - best), "best table response", tables))
    _finish(report, checks, tol)
    if report.verdict is Verdict.CERTIFIED:
        report.witness, report.witnesses = None, []
    return report


def finite_best_response(game, profile, free, player):
    """Exact best response value and tables of DMs ``free`` for ``player``."""
    tables = [p.actions[None, :] for p in profile.policies]
    if len(free) == 1:
        d = free[0]
        n_cells = game.n_info_cells(d)
        n_act = game.dms[d].size
        cur = profile[d].actions
        cand = np.repeat(cur[None, :], n_cells * n_act, axis=0)
        for c in range(n_cells):
            cand[c * n_act : (c + 1) * n_act, c] = np.arange(n_act)
        tables[d] = cand
        J = finite.evaluate_grid(game, tables)[player - 1].reshape(n_cells, n_act)
        # separable over cells: each cell's change adds independently
        base = float(finite.profile_costs(game, profile)[player - 1])
        delta = J - base
        choice = np.argmin(delta, axis=1)
        best = base + float(np.sum(delta[np.arange(n_cells), choice]))
        return best, {d: TablePolicy(choice)}
    for d in free:
        tables[d] = finite.all_tables(game.n_info_cells(d), game.dms[d].size)
    J = finite.evaluate_grid(game, tables)[player - 1]
    flat = int(np.argmin(J))
    idx = np.unravel_index(flat, J.shape)
    return float(J.reshape(-1)[flat]), {d: TablePolicy(tables[d][idx[d]]) for d in free}


# --------------------------------------------------------------------------
# brute force (finite)
# --------------------------------------------------------------------------


def brute_force_equilibria(game, concept, guard: int = finite.PROFILE_GUARD, atol: float = 1e-9):
    """All pure table profiles satisfying ``concept``, in lexicographic order."""
    concept = Concept(concept)
    if game.family != "finite":
        raise UnsupportedError("brute force needs a finite game")
    if concept is Concept.STATIONARY:
        raise UnsupportedError("stationarity is not defined for finite action sets here")
    if concept.zero_sum and not game.zero_sum:
        raise ArgumentError(f"{concept.value} needs a zero-sum game")
    counts = [game.dms[d].size ** game.n_info_cells(d) for d in range(game.n_dms)]
    total = float(np.prod(counts, dtype=float))
    if total > guard:
        raise SizeGuardError(f"{total:.0f} pure profiles exceed the guard of {guard}")
    tables = [finite.all_tables(game.n_info_cells(d), game.dms[d].size) for d in range(game.n_dms)]
    J = finite.evaluate_grid(game, tables)
    ok = np.ones(J.shape[1:], dtype=bool)
    for free, player in _groups(game, concept):
        Jp = J[player - 1]
        best = np.min(Jp, axis=tuple(free), keepdims=True)
        ok &= Jp <= best + atol
    out = []
    for idx in np.argwhere(ok):
        out.append(PolicyProfile(tuple(TablePolicy(tables[d][i]) for d, i in enumerate(idx)), game.variant))
    return out


# --------------------------------------------------------------------------
# best-response iteration
# --------------------------------------------------------------------------


@dataclass
class IterationTrace:
    profile: PolicyProfile
    steps: list
    ratios: list
    converged: bool
    iterations: int

    @property
    def contraction(self) -> float:
        finite_ratios = [r for r in self.ratios if np.isfinite(r)]
        return max(finite_ratios, default=0.0)

    @property
    def diverged(self) -> bool:
        return not self.converged


def _flatten(profile):
    return np.concatenate([np.concatenate([p.gain.reshape(-1), p.offset]) for p in profile.policies])


def player_best_response(game, profile, player):
    """Exact affine best response of ``player`` (convex subproblem required)."""
    free = game.player_dms(player)
    cost = game.player_cost(player)
    sysm = affine.linearize(game, profile, free=free)
    for e in free:
        if np.any(sysm.info_E[e]):
            raise UnsupportedError("best responses need information that does not depend on the player's own actions")
    Q = sysm.K.T @ cost.M @ sysm.K
    if np.linalg.eigvalsh(0.5 * (Q + Q.T))[0] <= 0:
        raise SolverError(f"best-response problem of player {player} is not strictly convex")
    ls = _LinearSystem(game, profile, free)
    x, consistent, _, _ = ls.solve()
    if not consistent:
        raise SolverError(f"best-response system of player {player} is inconsistent")
    return ls.policies(x)


def best_response_iteration(game, init, max_iter: int = 200, tol: float = 1e-12, gauss_seidel: bool = False):
    """Iterate exact player best responses (Jacobi by default).

    Returns an :class:`IterationTrace` whose ``ratios`` are successive step
    ratios; ``contraction`` is the largest observed ratio after the first step.
    """
    _require_gaussian(game)
    check_profile(game, init)
    prof = init
    steps, ratios = [], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = list(prof.policies)
        source = prof
        for p in game.players:
            br = player_best_response(game, source, p)
            for d, pol in br.items():
                new[d] = pol
            if gauss_seidel:
                source = PolicyProfile(tuple(new), prof.variant)
        nxt = PolicyProfile(tuple(new), prof.variant)
        step = float(np.max(np.abs(_flatten(nxt) - _flatten(prof)), initial=0.0))
        if steps and steps[-1] > 0:
            ratios.append(step / steps[-1])
        steps.append(step)
        prof = nxt
        if step < tol:
            converged = True
            break
        if not np.isfinite(step):
            break
    return IterationTrace(prof, steps, ratios, converged, it)


# --------------------------------------------------------------------------
# interchangeability and essential equivalence
# --------------------------------------------------------------------------


@dataclass
class InterchangeabilityResult:
    verdicts: list
    values: np.ndarray
    reports: list

    @property
    def all_certified(self) -> bool:
        return all(v is Verdict.CERTIFIED for row in self.verdicts for v in row)

    @property
    def value_spread(self) -> float:
        return float(np.max(self.values) - np.min(self.values)) if self.values.size else 0.0


def mix_profiles(game, first, second):
    """Player 1's policies from ``first`` and player 2's from ``second``."""
    pols = [first[d] if dm.player == 1 else second[d] for d, dm in enumerate(game.dms)]
    return PolicyProfile(tuple(pols), first.variant)


def interchangeability_check(game, spe_list, deviation_class=None, tol=None) -> InterchangeabilityResult:
    """Verify every cross pair of saddle-point profiles."""
    if not game.zero_sum:
        raise ArgumentError("interchangeability needs a zero-sum game")
    n = len(spe_list)
    verdicts = [[None] * n for _ in range(n)]
    values = np.zeros((n, n))
    reports = [[None] * n for _ in range(n)]
    for i, p in enumerate(spe_list):
        for j, q in enumerate(spe_list):
            mixed = mix_profiles(game, p, q)
            rep = verify_equilibrium(game, mixed, Concept.PL_SPE, deviation_class, tol)
            verdicts[i][j] = rep.verdict
            values[i, j] = rep.values[0]
            reports[i][j] = rep
    return InterchangeabilityResult(verdicts, values, reports)


def essential_equivalence(game_a, profile_a, game_b, profile_b, n_samples: int = 100_000, seed: int = DEFAULT_SEED,
                          atol: float = 1e-10) -> bool:
    """Do two profiles produce the same actions almost surely?"""
    if not game_a.primitives.same_as(game_b.primitives):
        raise PrimitiveMismatch("games do not share their primitives")
    if game_a.action_sizes != game_b.action_sizes:
        raise StructuralError("games have different action spaces")
    ma = compose_actions(game_a, profile_a)
    mb = compose_actions(game_b, profile_b)
    if game_a.family == "finite":
        probs = game_a.primitives.probabilities()
        support = probs > 0
        return bool(np.array_equal(ma.table[support], mb.table[support]))
    La, oa = ma.stacked()
    Lb, ob = mb.stacked()
    D, c = La - Lb, oa - ob
    mean, cov = game_a.primitives.mean, game_a.primitives.cov
    scale = max(1.0, float(np.max(np.abs(La), initial=0.0)), float(np.max(np.abs(Lb), initial=0.0)))
    var = np.diag(D @ cov @ D.T)
    if np.any(np.sqrt(np.maximum(var, 0.0)) > atol * scale) or np.any(np.abs(D @ mean + c) > atol * scale):
        return False
    rng = np.random.default_rng(seed)
    zeta = game_a.primitives.sample(rng, n_samples)
    diff = zeta @ D.T + c
    return bool(np.max(np.abs(diff), initial=0.0) < atol * scale * max(1.0, float(np.max(np.abs(zeta)))))
