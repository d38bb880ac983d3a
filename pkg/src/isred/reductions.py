"""Static reductions of sequential games and their inverses.

* :func:`policy_independent_reduce` replaces every measurement by an
  independent draw from a reference law and tilts the costs by the density
  ratio.
* :func:`policy_dependent_reduce` / :func:`policy_dependent_lift` map affine
  policies between the dynamic and the static form of a partially nested game.
* :func:`control_sharing_expand`, :func:`control_sharing_reduce` and
  :func:`control_sharing_lift` do the same after the precedent actions have
  been added to every information vector, where the map no longer depends on
  the other DMs' policies.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import validate_partial_nestedness
from .errors import ReductionRefused, StructuralError, UnsupportedError
from .model import (
    AffineObservation,
    AffinePolicy,
    FinitePrimitives,
    GaussianPrimitives,
    PolicyProfile,
    QuadraticCost,
    TableCost,
    TableObservation,
    TablePolicy,
    TiltedCost,
    Variant,
    check_profile,
)

COND_CAP = 1e12
NORMALIZATION_TOL = 1e-12


class ReductionKind(str, enum.Enum):
    POLICY_INDEPENDENT = "policy-independent"
    POLICY_DEPENDENT = "policy-dependent"
    CONTROL_SHARING = "control-sharing"


@dataclass
class ReductionCertificate:
    """Witnesses that a reduction is valid.

    ``conditioning`` maps DM names to the condition number of their ``G``;
    ``nestedness`` is the partial-nestedness report; ``density_ratio`` is set
    for the policy-independent reduction.
    """

    kind: ReductionKind
    conditioning: dict = field(default_factory=dict)
    nestedness: object = None
    density_ratio: object = None
    log: list = field(default_factory=list)


# --------------------------------------------------------------------------
# density ratios
# --------------------------------------------------------------------------


@dataclass
class FiniteDensityRatio:
    """Per-DM factor tables ``f_d[rest_outcome, y, *u_prec]`` against uniform laws."""

    factors: tuple
    n_obs: tuple
    precedence: tuple

    def factor(self, d, rest_outcome, y, u_prec=()):
        return self.factors[d][(rest_outcome, y) + tuple(u_prec)]

    def normalization_error(self) -> float:
        """Largest deviation of ``sum_y f * Q(y)`` from one over all cells."""
        err = 0.0
        for f, n in zip(self.factors, self.n_obs):
            err = max(err, float(np.max(np.abs(f.sum(axis=1) / n - 1.0))))
        return err


@dataclass
class GaussianFactor:
    """``log N(y; mean(rest, u), cov) - log N(y; 0, I)`` for one DM."""

    y_slice: slice
    rest_gain: np.ndarray
    action_gain: np.ndarray
    action_cols: np.ndarray
    shift: np.ndarray
    cov: np.ndarray

    def log_ratio(self, y, rest, u):
        mean = rest @ self.rest_gain.T + self.shift
        if self.action_cols.size:
            mean = mean + u[:, self.action_cols] @ self.action_gain.T
        r = y - mean
        sol = np.linalg.solve(self.cov, r.T).T
        _, logdet = np.linalg.slogdet(self.cov)
        return -0.5 * np.einsum("ni,ni->n", r, sol) - 0.5 * logdet + 0.5 * np.einsum("ni,ni->n", y, y)


@dataclass
class GaussianDensityRatio:
    """Sum of per-DM Gaussian log factors evaluated on the reduced primitives."""

    factors: tuple
    rest_cols: np.ndarray

    def log_ratio(self, zeta, u):
        zeta = np.atleast_2d(zeta)
        u = np.atleast_2d(u)
        rest = zeta[:, self.rest_cols]
        total = np.zeros(zeta.shape[0])
        for f in self.factors:
            total += f.log_ratio(zeta[:, f.y_slice], rest, u)
        return total


# --------------------------------------------------------------------------
# policy-independent reduction
# --------------------------------------------------------------------------


def _noise_blocks(game):
    blocks = [obs.noise_block for obs in game.observations]
    named = [b for b in blocks if b is not None]
    if len(set(named)) != len(named):
        raise ReductionRefused("a noise block may feed only one DM's measurement")
    return blocks


def policy_independent_reduce(game):
    """Change of measure making every measurement an independent reference draw.

    Returns ``(reduced_game, certificate)``.  The reduced game has the same
    DMs, information layouts and variant, so any profile of the original game
    can be evaluated in it unchanged.
    """
    if game.family == "finite":
        return _pi_reduce_finite(game)
    return _pi_reduce_gaussian(game)


def _constant_along(arr, axis):
    first = np.take(arr, [0], axis=axis)
    return bool(np.all(arr == first))


def _pi_reduce_finite(game):
    prims = game.primitives
    noise = _noise_blocks(game)
    noise_axes = {prims.block_axis(b) for b in noise if b is not None}
    shape = prims.shape
    n_out = prims.n_outcomes
    full = lambda arr: arr.reshape(shape + arr.shape[1:])  # noqa: E731
    for d, b in enumerate(noise):
        for j, obs in enumerate(game.observations):
            if b is None or j == d:
                continue
            if not _constant_along(full(obs.table), prims.block_axis(b)):
                raise ReductionRefused(f"noise block {b!r} of DM {game.dms[d].name} enters another measurement")
    for c in game.costs:
        for ax in noise_axes:
            if not _constant_along(full(c.values), ax):
                raise ReductionRefused(f"cost depends on noise block {prims.blocks[ax][0]!r}")

    rest_axes = [a for a in range(len(shape)) if a not in noise_axes]
    rest_blocks = [prims.blocks[a] for a in rest_axes]
    rest_shape = tuple(shape[a] for a in rest_axes)
    n_rest = int(np.prod(rest_shape, dtype=int))
    masses = prims.probabilities().reshape(shape)

    factors = []
    for d, obs in enumerate(game.observations):
        n_obs = obs.n_obs
        prec_sizes = tuple(game.dms[k].size for k in obs.precedence)
        f = np.zeros((n_rest, n_obs) + prec_sizes)
        tab = full(obs.table)
        static = game.variant.static
        for r in range(n_rest):
            rest_vals = np.unravel_index(r, rest_shape) if rest_shape else ()
            idx = [slice(None)] * len(shape)
            for a, v in zip(rest_axes, rest_vals):
                idx[a] = v
            sub_p = masses[tuple(idx)]
            total = sub_p.sum()
            if total == 0:
                f[r] = 1.0
                continue
            cond_p = sub_p / total  # law of the noise blocks given the rest
            sub_t = tab[tuple(idx)]
            for u in np.ndindex(*prec_sizes):
                uu = tuple(0 for _ in u) if static else u
                t = sub_t[(Ellipsis,) + uu] if uu else sub_t
                for y in range(n_obs):
                    f[(r, y) + u] = n_obs * float(np.sum(cond_p * (t == y)))
        factors.append(f)
    ratio = FiniteDensityRatio(tuple(factors), tuple(o.n_obs for o in game.observations),
                               tuple(o.precedence for o in game.observations))
    if ratio.normalization_error() > NORMALIZATION_TOL:
        raise ReductionRefused("density ratio does not normalize")

    y_blocks = [(f"y:{dm.name}", np.full(obs.n_obs, 1.0 / obs.n_obs)) for dm, obs in zip(game.dms, game.observations)]
    new_prims = FinitePrimitives(tuple(rest_blocks) + tuple(y_blocks))
    new_shape = new_prims.shape
    n_new = new_prims.n_outcomes
    grid = new_prims.outcome_values()
    n_rb = len(rest_blocks)
    rest_index = (
        np.ravel_multi_index(tuple(grid[:, :n_rb].T), rest_shape) if rest_shape else np.zeros(n_new, dtype=int)
    )
    # each rest outcome maps back to one original outcome (noise value 0)
    orig_vals = np.zeros((n_new, len(shape)), dtype=int)
    for k, a in enumerate(rest_axes):
        orig_vals[:, a] = grid[:, k]
    orig_index = np.ravel_multi_index(tuple(orig_vals.T), shape)

    new_obs = []
    for d, obs in enumerate(game.observations):
        prec_sizes = tuple(game.dms[k].size for k in obs.precedence)
        y = grid[:, n_rb + d]
        table = np.broadcast_to(y.reshape((n_new,) + (1,) * len(prec_sizes)), (n_new,) + prec_sizes)
        new_obs.append(TableObservation(obs.n_obs, table.copy(), obs.precedence, obs.forward, None))

    acts_shape = tuple(game.action_sizes)
    weight = np.ones((n_new,) + acts_shape)
    for d, obs in enumerate(game.observations):
        y = grid[:, n_rb + d]
        fd = factors[d][rest_index, y]  # (n_new, *prec sizes)
        expand = [slice(None)] + [None] * len(acts_shape)
        for pos, k in enumerate(obs.precedence):
            expand[1 + k] = slice(None)
        # move precedence axes into the DM-order positions
        order = sorted(range(len(obs.precedence)), key=lambda i: obs.precedence[i])
        fd = np.transpose(fd, [0] + [1 + i for i in order])
        weight = weight * fd[tuple(expand)]
    new_costs = tuple(TableCost(c.values[orig_index] * weight) for c in game.costs)
    reduced = game.replace(primitives=new_prims, observations=tuple(new_obs), costs=new_costs,
                           name=f"{game.name}:pi" if game.name else "pi")
    cert = ReductionCertificate(
        ReductionKind.POLICY_INDEPENDENT,
        nestedness=validate_partial_nestedness(game),
        density_ratio=ratio,
        log=[
            "reference law: uniform over each measurement alphabet",
            f"normalization error {ratio.normalization_error():.3e}",
        ],
    )
    return reduced, cert


def _pi_reduce_gaussian(game):
    prims = game.primitives
    noise = _noise_blocks(game)
    n = prims.dim
    if any(b is None for b in noise):
        missing = [game.dms[d].name for d, b in enumerate(noise) if b is None]
        raise ReductionRefused(f"noiseless measurement channel for DMs {missing}: no dominating product measure")
    noise_cols = {}
    for d, b in enumerate(noise):
        noise_cols[d] = np.arange(n)[prims.block_slice(b)]
    all_noise = np.concatenate(list(noise_cols.values()))
    rest = np.array([c for c in range(n) if c not in set(all_noise)], dtype=int)
    cov = prims.cov
    for d, cols in noise_cols.items():
        others = np.setdiff1d(np.arange(n), cols)
        if np.any(cov[np.ix_(cols, others)] != 0):
            raise ReductionRefused(f"noise block {noise[d]!r} is correlated with other primitives")
        for j, obs in enumerate(game.observations):
            if j != d and np.any(obs.H[:, cols] != 0):
                raise ReductionRefused(f"noise block {noise[d]!r} enters the measurement of DM {game.dms[j].name}")
    for c in game.costs:
        base = c.base if isinstance(c, TiltedCost) else c
        if isinstance(c, TiltedCost):
            raise UnsupportedError("costs are already tilted")
        if np.any(base.M[all_noise] != 0) or np.any(base.b[all_noise] != 0):
            raise ReductionRefused("a cost depends on a measurement noise block")

    # reduced primitives: rest blocks then one standard-normal block per DM
    rest_blocks = [(b, k) for b, k in prims.blocks if b not in set(noise)]
    dims = [obs.dim for obs in game.observations]
    n_rest = rest.size
    n_new = n_rest + sum(dims)
    mean = np.zeros(n_new)
    mean[:n_rest] = prims.mean[rest]
    new_cov = np.eye(n_new)
    new_cov[:n_rest, :n_rest] = cov[np.ix_(rest, rest)]
    y_blocks = [(f"y:{dm.name}", m) for dm, m in zip(game.dms, dims)]
    new_prims = GaussianPrimitives(mean, new_cov, tuple(rest_blocks) + tuple(y_blocks))

    factors, new_obs = [], []
    start = n_rest
    offsets = game.action_offsets
    for d, obs in enumerate(game.observations):
        m = obs.dim
        ys = slice(start, start + m)
        start += m
        cols = noise_cols[d]
        G = np.eye(m) if game.variant.static else obs.G
        Hv = obs.H[:, cols]
        S = G @ Hv @ cov[np.ix_(cols, cols)] @ Hv.T @ G.T
        eig = np.linalg.eigvalsh(S)
        if eig[0] <= 1e-10 * max(eig[-1], 1e-300):
            raise ReductionRefused(f"degenerate measurement noise for DM {game.dms[d].name}")
        rest_gain = G @ obs.H[:, rest]
        shift = G @ Hv @ prims.mean[cols]
        if game.variant.static or not obs.precedence:
            a_cols = np.zeros(0, dtype=int)
            a_gain = np.zeros((m, 0))
        else:
            a_cols = np.concatenate([np.arange(offsets[k], offsets[k] + game.dms[k].size) for k in obs.precedence])
            a_gain = obs.D
        factors.append(GaussianFactor(ys, rest_gain, a_gain, a_cols, shift, S))
        H = np.zeros((m, n_new))
        H[:, ys] = np.eye(m)
        D = np.zeros((m, sum(game.dms[k].size for k in obs.precedence)))
        new_obs.append(AffineObservation(H, np.eye(m), D, obs.precedence, obs.forward, f"y:{game.dms[d].name}"))
    ratio = GaussianDensityRatio(tuple(factors), np.arange(n_rest))

    nu = game.n_action_total
    keep = np.concatenate([rest, n + np.arange(nu)])
    new_pos = np.concatenate([np.arange(n_rest), n_new + np.arange(nu)])
    new_costs = []
    for c in game.costs:
        M = np.zeros((n_new + nu, n_new + nu))
        b = np.zeros(n_new + nu)
        M[np.ix_(new_pos, new_pos)] = c.M[np.ix_(keep, keep)]
        b[new_pos] = c.b[keep]
        new_costs.append(TiltedCost(QuadraticCost(M, b, c.const), ratio))
    reduced = game.replace(primitives=new_prims, observations=tuple(new_obs), costs=tuple(new_costs),
                           name=f"{game.name}:pi" if game.name else "pi")
    cert = ReductionCertificate(
        ReductionKind.POLICY_INDEPENDENT,
        nestedness=validate_partial_nestedness(game),
        density_ratio=ratio,
        log=["reference law: standard normal of matching dimension", "factors combined in log space"],
    )
    return reduced, cert


# --------------------------------------------------------------------------
# certificates for the policy-dependent and control-sharing reductions
# --------------------------------------------------------------------------


def certify(game, kind=ReductionKind.POLICY_DEPENDENT) -> ReductionCertificate:
    """Check partial nestedness and invertibility of every ``G``."""
    if game.family != "gaussian":
        raise UnsupportedError("policy-dependent reductions need affine measurement kernels")
    report = validate_partial_nestedness(game)
    if not report.nested:
        raise ReductionRefused(f"information structure is not partially nested: {report.violations}")
    cond = {}
    for dm, obs in zip(game.dms, game.observations):
        c = float(np.linalg.cond(obs.G))
        cond[dm.name] = c
        if not np.isfinite(c) or c > COND_CAP:
            raise ReductionRefused(f"G of DM {dm.name} is singular (condition number {c:.3e})")
    return ReductionCertificate(ReductionKind(kind), conditioning=cond, nestedness=report)


class _BlockAffine:
    """Affine maps over the stacked measurement blocks of all DMs."""

    def __init__(self, game):
        self.dims = [obs.dim for obs in game.observations]
        self.start = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)
        self.width = int(self.start[-1])

    def block(self, j):
        return slice(self.start[j], self.start[j + 1])

    def unit(self, j):
        out = np.zeros((self.dims[j], self.width))
        out[:, self.block(j)] = np.eye(self.dims[j])
        return out


def _prec_columns(game, obs, U):
    """Stack the maps of the precedent actions of one measurement."""
    if not obs.precedence:
        return None
    gains = np.vstack([U[k][0] for k in obs.precedence])
    offs = np.concatenate([U[k][1] for k in obs.precedence])
    return gains, offs


def _translate(game, profile, source_static: bool):
    """Rewrite policies between dynamic and static measurement coordinates.

    Each measurement of the source form is expressed as an affine map of the
    target form's measurements; actions are then composed in order.
    """
    ba = _BlockAffine(game)
    M = game.n_dms
    U = [None] * M  # action maps over target measurement blocks
    src = [None] * M  # source measurement j as an affine map over target blocks
    out = []
    for d, obs in enumerate(game.observations):
        pre = _prec_columns(game, obs, U)
        if source_static:
            # y_d (dynamic, target) = G s_d + D u_prec  =>  s_d = G^-1 (y_d - D u_prec)
            Ginv = np.linalg.inv(obs.G)
            gain = Ginv @ ba.unit(d)
            off = np.zeros(obs.dim)
            if pre is not None:
                gain = gain - Ginv @ obs.D @ pre[0]
                off = off - Ginv @ obs.D @ pre[1]
        else:
            gain = obs.G @ ba.unit(d)
            off = np.zeros(obs.dim)
            if pre is not None:
                gain = gain + obs.D @ pre[0]
                off = off + obs.D @ pre[1]
        src[d] = (gain, off)
        pol = profile[d]
        layout = game.info_layout(d, Variant.STATIC if source_static else Variant.DYNAMIC)
        info_gain = np.vstack([src[j][0] for _, j in layout])
        info_off = np.concatenate([src[j][1] for _, j in layout])
        U[d] = (pol.gain @ info_gain, pol.gain @ info_off + pol.offset)
        cols = np.concatenate([np.arange(ba.start[j], ba.start[j + 1]) for _, j in layout])
        outside = np.setdiff1d(np.arange(ba.width), cols)
        if outside.size and np.max(np.abs(U[d][0][:, outside]), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(U[d][0]))):
            raise ReductionRefused(f"DM {game.dms[d].name} would need measurements outside its information")
        out.append(AffinePolicy(U[d][0][:, cols], U[d][1]))
    return tuple(out)


def _require_pure_affine(game, profile):
    for d, pol in enumerate(profile.policies):
        if not isinstance(pol, AffinePolicy):
            raise ReductionRefused(
                f"DM {game.dms[d].name}: only deterministic affine policies can be reduced"
            )


def policy_dependent_reduce(game, profile, certificate=None) -> PolicyProfile:
    """Static-form profile producing the same actions as the dynamic ``profile``."""
    dyn = game.with_variant(Variant.DYNAMIC) if game.variant is not Variant.DYNAMIC else game
    check_profile(dyn, profile)
    _require_pure_affine(game, profile)
    certificate = certify(dyn) if certificate is None else certificate
    if certificate.kind is not ReductionKind.POLICY_DEPENDENT:
        raise ReductionRefused("a policy-dependent certificate is required")
    return PolicyProfile(_translate(dyn, profile, source_static=False), Variant.STATIC)


def policy_dependent_lift(game, profile, certificate=None) -> PolicyProfile:
    """Dynamic-form profile producing the same actions as the static ``profile``."""
    dyn = game.with_variant(Variant.DYNAMIC) if game.variant is not Variant.DYNAMIC else game
    check_profile(dyn.with_variant(Variant.STATIC), profile)
    _require_pure_affine(game, profile)
    certificate = certify(dyn) if certificate is None else certificate
    if certificate.kind is not ReductionKind.POLICY_DEPENDENT:
        raise ReductionRefused("a policy-dependent certificate is required")
    return PolicyProfile(_translate(dyn, profile, source_static=True), Variant.DYNAMIC)


# --------------------------------------------------------------------------
# control sharing
# --------------------------------------------------------------------------


def control_sharing_expand(game):
    """Same game with the precedent actions appended to every information vector."""
    if game.variant is Variant.GENERAL:
        report = validate_partial_nestedness(game)
        if not report.nested:
            raise ReductionRefused(f"information structure is not partially nested: {report.violations}")
        return game.with_variant(Variant.DYNAMIC_CS)
    return game.with_variant(game.variant.with_sharing(True))


def _layout_positions(game, d, variant):
    """Start offset of each info component in the given layout."""
    pos, s = {}, 0
    for comp in game.info_layout(d, variant):
        size = game.component_size(comp)
        pos[comp] = (s, size)
        s += size
    return pos, s


def embed_profile(game, profile, target_variant=None):
    """Zero-pad ``profile`` onto a larger information layout of the same game.

    The default target is the control-sharing version of the profile's variant.
    """
    src_v = profile.variant
    tgt_v = Variant(target_variant) if target_variant is not None else src_v.with_sharing(True)
    pols = []
    for d, pol in enumerate(profile.policies):
        src_layout = game.info_layout(d, src_v)
        tgt_layout = game.info_layout(d, tgt_v)
        missing = set(src_layout) - set(tgt_layout)
        if missing:
            raise StructuralError(f"target layout of DM {game.dms[d].name} lacks components {sorted(missing)}")
        if game.family == "gaussian":
            src_pos, _ = _layout_positions(game, d, src_v)
            tgt_pos, width = _layout_positions(game, d, tgt_v)
            gain = np.zeros((pol.gain.shape[0], width))
            for comp, (s, k) in src_pos.items():
                t = tgt_pos[comp][0]
                gain[:, t : t + k] = pol.gain[:, s : s + k]
            pols.append(AffinePolicy(gain, pol.offset))
        else:
            src_r = [game.component_size(c) for c in src_layout]
            tgt_r = [game.component_size(c) for c in tgt_layout]
            grid = np.indices(tgt_r).reshape(len(tgt_r), -1)
            where = [tgt_layout.index(c) for c in src_layout]
            src_cells = np.ravel_multi_index(tuple(grid[w] for w in where), src_r) if src_r else np.zeros(grid.shape[1], int)
            pols.append(TablePolicy(pol.actions[src_cells]))
    return PolicyProfile(tuple(pols), tgt_v)


def _cs_translate(game, profile, to_static: bool):
    out = []
    for d, pol in enumerate(profile.policies):
        pos, width = _layout_positions(game, d, Variant.DYNAMIC_CS)
        gain = pol.gain.copy()
        new = np.zeros_like(gain)
        for comp, (s, k) in pos.items():
            if comp[0] == "act":
                new[:, s : s + k] += gain[:, s : s + k]
        for comp, (s, k) in pos.items():
            kind, j = comp
            if kind != "obs":
                continue
            obs = game.observations[j]
            P = gain[:, s : s + k]
            if to_static:
                on_meas, on_act = P @ obs.G, P @ obs.D
            else:
                Ginv = np.linalg.inv(obs.G)
                on_meas, on_act = P @ Ginv, -P @ Ginv @ obs.D
            new[:, s : s + k] += on_meas
            c = 0
            for kk in obs.precedence:
                w = game.dms[kk].size
                t = pos[("act", kk)][0]
                new[:, t : t + w] += on_act[:, c : c + w]
                c += w
        out.append(AffinePolicy(new, pol.offset))
    return tuple(out)


def control_sharing_reduce(game, profile, certificate=None) -> PolicyProfile:
    """Static control-sharing profile with the same actions.

    Only the game's kernels are used: substituting ``y = G s + D u_shared``
    needs the shared actions, which are part of the information itself.
    """
    dyn = game.with_variant(Variant.DYNAMIC_CS)
    check_profile(dyn, profile)
    _require_pure_affine(game, profile)
    certificate = certify(dyn, ReductionKind.CONTROL_SHARING) if certificate is None else certificate
    if certificate.kind is not ReductionKind.CONTROL_SHARING:
        raise ReductionRefused("a control-sharing certificate is required")
    return PolicyProfile(_cs_translate(dyn, profile, True), Variant.STATIC_CS)


def control_sharing_lift(game, profile, certificate=None) -> PolicyProfile:
    """Inverse of :func:`control_sharing_reduce`."""
    dyn = game.with_variant(Variant.DYNAMIC_CS)
    check_profile(dyn.with_variant(Variant.STATIC_CS), profile)
    _require_pure_affine(game, profile)
    certificate = certify(dyn, ReductionKind.CONTROL_SHARING) if certificate is None else certificate
    if certificate.kind is not ReductionKind.CONTROL_SHARING:
        raise ReductionRefused("a control-sharing certificate is required")
    return PolicyProfile(_cs_translate(dyn, profile, False), Variant.DYNAMIC_CS)
