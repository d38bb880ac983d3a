"""Game-level operations: nestedness, action composition, expected costs, Condition C.

The data types live in :mod:`isred.model` and are re-exported here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import affine, finite
from .errors import ArgumentError, StructuralError, UnsupportedError
from .model import (  # noqa: F401  (re-exports)
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
    TiltedCost,
    Variant,
    check_profile,
    zero_profile,
)

DEFAULT_SEED = 0x5EED


@dataclass(frozen=True)
class Exact:
    """Closed-form expectation (finite sums or Gaussian moments)."""


@dataclass(frozen=True)
class MonteCarlo:
    """Sample-mean expectation with a fixed seed."""

    n: int = 100_000
    seed: int = DEFAULT_SEED
    chunk: int = 200_000


@dataclass
class CostEstimate:
    """Per-player expected costs; ``stderr`` is set for Monte Carlo."""

    values: np.ndarray
    stderr: np.ndarray = None
    n: int = 0

    def __getitem__(self, i):
        return self.values[i]


@dataclass
class NestednessReport:
    """Outcome of the partial-nestedness check.

    ``witnesses[d]`` lists the precedents whose information DM ``d`` holds;
    ``violations`` lists ``((player, stage) of d, (player, stage) of j)``.
    """

    nested: bool
    witnesses: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)


@dataclass
class GaussianActionMap:
    """``u_d = gains[d] @ zeta + offsets[d]`` for every DM."""

    gains: tuple
    offsets: tuple

    def stacked(self):
        return np.vstack(self.gains), np.concatenate(self.offsets)


@dataclass
class FiniteActionMap:
    """Action index of every DM at every primitive outcome."""

    table: np.ndarray

    def as_dict(self, game):
        vals = game.primitives.outcome_values()
        return {tuple(int(x) for x in vals[o]): tuple(int(a) for a in self.table[o]) for o in range(len(vals))}


@dataclass
class ConditionCResult:
    """Per-DM verdict with the composite coefficient on shared actions."""

    dm: str
    holds: bool
    coefficient: np.ndarray = None


def validate_partial_nestedness(game) -> NestednessReport:
    """Check that each DM holds the full information of every precedent."""
    report = NestednessReport(nested=True)
    for d, obs in enumerate(game.observations):
        fwd = set(obs.forward)
        report.witnesses[d] = []
        for j in obs.precedence:
            if j >= d:
                raise StructuralError("precedence must point to strictly earlier DMs")
            need = set(game.observations[j].forward) | {j}
            if need <= fwd:
                report.witnesses[d].append(j)
            else:
                report.nested = False
                report.violations.append((game.dms[d].label, game.dms[j].label))
    return report


def compose_actions(game, profile, order=None):
    """Express every action as a function of the primitives alone."""
    check_profile(game, profile)
    if game.family == "gaussian":
        sysm = affine.linearize(game, profile, order=order)
        n = game.n_zeta
        gains, offsets = [], []
        for d in range(game.n_dms):
            rows = slice(n + game.action_slice(d).start, n + game.action_slice(d).stop)
            gains.append(sysm.L[rows].copy())
            offsets.append(sysm.m[rows].copy())
        return GaussianActionMap(tuple(gains), tuple(offsets))
    return FiniteActionMap(finite.compose_table(game, profile, order))


def _gaussian_z_samples(game, profile, rng, n):
    sysm = affine.linearize(game, profile)
    zeta = game.primitives.sample(rng, n)
    z = zeta @ sysm.L.T + sysm.m
    return zeta, z


def _cost_samples(game, cost, zeta, z):
    if isinstance(cost, QuadraticCost):
        return cost.evaluate(z)
    if isinstance(cost, TiltedCost):
        u = z[:, game.n_zeta :]
        return cost.base.evaluate(z) * np.exp(cost.ratio.log_ratio(zeta, u))
    raise UnsupportedError(f"cannot evaluate cost of type {type(cost).__name__}")


def expected_cost(game, profile, method=None) -> CostEstimate:
    """Expected cost of every player under ``profile``.

    Parameters
    ----------
    method : Exact or MonteCarlo, default Exact
    """
    method = Exact() if method is None else method
    check_profile(game, profile)
    if isinstance(method, MonteCarlo):
        return _monte_carlo(game, profile, method)
    if not isinstance(method, Exact):
        raise ArgumentError(f"unknown evaluation method {method!r}")
    if game.family == "finite":
        return CostEstimate(finite.profile_costs(game, profile))
    for c in game.costs:
        if not isinstance(c, QuadraticCost):
            raise UnsupportedError("exact Gaussian evaluation needs quadratic costs")
    sysm = affine.linearize(game, profile)
    mu, cov = sysm.z_moments(game.primitives.mean, game.primitives.cov)
    return CostEstimate(np.array([affine.quadratic_expectation(c, mu, cov) for c in game.costs]))


def _monte_carlo(game, profile, method: MonteCarlo) -> CostEstimate:
    if method.n <= 0:
        raise ArgumentError("Monte Carlo needs a positive sample size")
    rng = np.random.default_rng(method.seed)
    P = game.n_players
    total = np.zeros(P)
    total_sq = np.zeros(P)
    done = 0
    if game.family == "finite":
        table = finite.compose_table(game, profile)
        probs = game.primitives.probabilities()
    while done < method.n:
        k = min(method.chunk, method.n - done)
        if game.family == "finite":
            outs = rng.choice(len(probs), size=k, p=probs)
            vals = np.array([c.values[(outs,) + tuple(table[outs].T)] for c in game.costs])
        else:
            zeta, z = _gaussian_z_samples(game, profile, rng, k)
            vals = np.array([_cost_samples(game, c, zeta, z) for c in game.costs])
        total += vals.sum(axis=1)
        total_sq += (vals**2).sum(axis=1)
        done += k
    mean = total / done
    var = np.maximum(total_sq / done - mean**2, 0.0)
    stderr = np.sqrt(var / max(done - 1, 1))
    return CostEstimate(mean, stderr, done)


def _shared_action_dependence(game, d):
    """Linear map from shared actions to DM ``d``'s info (primitives fixed)."""
    shared = game.shared(d)
    cols, s = {}, 0
    for k in shared:
        cols[k] = slice(s, s + game.dms[k].size)
        s += game.dms[k].size
    blocks = []
    for kind, j in game.info_layout(d):
        if kind == "act":
            B = np.zeros((game.dms[j].size, s))
            B[:, cols[j]] = np.eye(game.dms[j].size)
        else:
            obs = game.observations[j]
            B = np.zeros((obs.dim, s))
            if not game.variant.static:
                c = 0
                for k in obs.precedence:
                    w = game.dms[k].size
                    B[:, cols[k]] += obs.D[:, c : c + w]
                    c += w
        blocks.append(B)
    return np.vstack(blocks)


def check_condition_C(game, profile, tol: float = 1e-9):
    """Is each DM's composite action affine in its shared precedent actions?

    For affine policies the answer is always yes and the coefficient is
    returned.  For tables the induced map ``(outcome, u_shared) -> u_d`` is
    tested for the form ``beta(outcome) + c . u_shared`` with one coefficient
    vector ``c`` common to all outcomes in the support.
    """
    check_profile(game, profile)
    out = []
    for d, dm in enumerate(game.dms):
        if game.family == "gaussian":
            coef = profile[d].gain @ _shared_action_dependence(game, d)
            out.append(ConditionCResult(dm.name, True, coef))
        else:
            out.append(_finite_condition_C(game, profile, d, tol))
    return out


def _finite_condition_C(game, profile, d, tol):
    shared = game.shared(d)
    dm = game.dms[d]
    if not shared:
        return ConditionCResult(dm.name, True, np.zeros(0))
    probs = game.primitives.probabilities()
    support = np.flatnonzero(probs > 0)
    grids = list(itertools.product(*[range(game.dms[k].size) for k in shared]))
    pos = {k: i for i, k in enumerate(shared)}
    rows, rhs = [], []
    n_s = len(support)
    for si, o in enumerate(support):
        for u in grids:
            acts = {k: u[pos[k]] for k in shared}
            comps = []
            for kind, j in game.info_layout(d):
                if kind == "act":
                    comps.append(acts[j])
                else:
                    comps.append(int(_table_symbol(game, j, o, acts)))
            cell = finite.cell_index(game.info_radices(d), comps)
            row = np.zeros(n_s + len(shared))
            row[si] = 1.0
            row[n_s:] = u
            rows.append(row)
            rhs.append(float(profile[d].actions[cell]))
    A, y = np.array(rows), np.array(rhs)
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    ok = bool(np.max(np.abs(A @ sol - y)) <= tol)
    return ConditionCResult(dm.name, ok, sol[n_s:] if ok else None)


def _table_symbol(game, j, o, acts):
    obs = game.observations[j]
    if game.variant.static:
        return obs.table[(o,) + (0,) * len(obs.precedence)]
    return obs.table[(o,) + tuple(acts[k] for k in obs.precedence)]
