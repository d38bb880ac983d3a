"""Data types for sequential games in the intrinsic model.

A game is a list of one-shot decision makers (DMs) in a fixed global order.
Each DM belongs to a player and acts once on its information vector, which is
the canonical concatenation of

* the own measurements of its forwarded DMs (in global order),
* the actions of the DMs it shares controls with (control-sharing variants only),
* its own measurement.

Two model families are supported: finite (tables over a product of finite
primitive blocks) and affine-Gaussian (jointly Gaussian primitives, affine
measurement kernels, quadratic costs).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ArgumentError, StructuralError

SYMMETRY_TOL = 1e-12
PD_RATIO = 1e-10


class Variant(str, enum.Enum):
    """Which information form the game's DMs act on."""

    DYNAMIC = "dynamic"
    STATIC = "static"
    DYNAMIC_CS = "dynamic-cs"
    STATIC_CS = "static-cs"
    GENERAL = "general"

    @property
    def static(self) -> bool:
        return self in (Variant.STATIC, Variant.STATIC_CS)

    @property
    def control_sharing(self) -> bool:
        return self in (Variant.DYNAMIC_CS, Variant.STATIC_CS)

    @property
    def requires_nesting(self) -> bool:
        return self in (Variant.DYNAMIC, Variant.DYNAMIC_CS)

    def with_sharing(self, sharing: bool) -> "Variant":
        if self is Variant.GENERAL:
            if sharing:
                raise ArgumentError("control sharing needs a dynamic or static variant")
            return self
        base = Variant.STATIC if self.static else Variant.DYNAMIC
        if not sharing:
            return base
        return Variant.STATIC_CS if base is Variant.STATIC else Variant.DYNAMIC_CS


def _frozen_array(a, dtype=float, ndim=None, name="array"):
    arr = np.array(a, dtype=dtype, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise StructuralError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianPrimitives:
    """Jointly Gaussian primitive vector with named blocks.

    Parameters
    ----------
    mean : array_like, shape (n,)
    cov : array_like, shape (n, n)
        Symmetric positive definite covariance.
    blocks : sequence of (name, dim)
        Named consecutive blocks covering the vector.
    """

    mean: np.ndarray
    cov: np.ndarray
    blocks: tuple

    family = "gaussian"

    def __post_init__(self):
        mean = _frozen_array(self.mean, ndim=1, name="mean")
        cov = _frozen_array(self.cov, ndim=2, name="cov")
        blocks = tuple((str(n), int(k)) for n, k in self.blocks)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "blocks", blocks)
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise StructuralError(f"covariance shape {cov.shape} does not match mean length {n}")
        if sum(k for _, k in blocks) != n:
            raise StructuralError("primitive blocks do not cover the primitive vector")
        names = [b for b, _ in blocks]
        if len(set(names)) != len(names):
            raise StructuralError("duplicate primitive block names")
        scale = max(1.0, float(np.max(np.abs(cov))) if n else 1.0)
        if not np.allclose(cov, cov.T, atol=SYMMETRY_TOL * scale, rtol=0):
            raise StructuralError("covariance is not symmetric")
        if n:
            eig = np.linalg.eigvalsh(cov)
            if eig[0] <= PD_RATIO * eig[-1]:
                raise StructuralError("covariance is not positive definite")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def block_names(self):
        return [b for b, _ in self.blocks]

    def block_slice(self, name: str) -> slice:
        start = 0
        for b, k in self.blocks:
            if b == name:
                return slice(start, start + k)
            start += k
        raise StructuralError(f"unknown primitive block {name!r}")

    def sqrt_cov(self) -> np.ndarray:
        return np.linalg.cholesky(self.cov)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        xi = rng.standard_normal((n, self.dim))
        return self.mean + xi @ self.sqrt_cov().T

    def same_as(self, other) -> bool:
        return (
            isinstance(other, GaussianPrimitives)
            and self.blocks == other.blocks
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
        )


@dataclass(frozen=True, eq=False)
class FinitePrimitives:
    """Independent finite primitive blocks; outcomes are their product.

    Parameters
    ----------
    blocks : sequence of (name, masses)
        Each block takes values ``0..len(masses)-1`` with the given masses.
    """

    blocks: tuple

    family = "finite"

    def __post_init__(self):
        blocks = []
        for name, masses in self.blocks:
            p = _frozen_array(masses, ndim=1, name=f"masses of {name}")
            if p.size == 0:
                raise StructuralError(f"block {name!r} has empty support")
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise StructuralError(f"masses of block {name!r} must be nonnegative and sum to 1")
            blocks.append((str(name), p))
        names = [b for b, _ in blocks]
        if len(set(names)) != len(names):
            raise StructuralError("duplicate primitive block names")
        object.__setattr__(self, "blocks", tuple(blocks))

    @property
    def shape(self):
        return tuple(len(p) for _, p in self.blocks)

    @property
    def n_outcomes(self) -> int:
        return int(np.prod(self.shape, dtype=int))

    @property
    def block_names(self):
        return [b for b, _ in self.blocks]

    def block_axis(self, name: str) -> int:
        for i, (b, _) in enumerate(self.blocks):
            if b == name:
                return i
        raise StructuralError(f"unknown primitive block {name!r}")

    def probabilities(self) -> np.ndarray:
        """Joint outcome masses in C order over the blocks."""
        p = np.ones(())
        for _, m in self.blocks:
            p = np.multiply.outer(p, m)
        return p.reshape(-1)

    def outcome_values(self) -> np.ndarray:
        """Block values of every outcome, shape (n_outcomes, n_blocks)."""
        grids = np.indices(self.shape).reshape(len(self.blocks), -1)
        return grids.T

    def same_as(self, other) -> bool:
        return (
            isinstance(other, FinitePrimitives)
            and self.block_names == other.block_names
            and all(np.array_equal(a, b) for (_, a), (_, b) in zip(self.blocks, other.blocks))
        )


# --------------------------------------------------------------------------
# decision makers and observation kernels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Dm:
    """One-shot decision maker.

    ``size`` is the action dimension for Gaussian games and the number of
    actions for finite games.
    """

    name: str
    player: int
    stage: int
    size: int = 1

    @property
    def label(self):
        return (self.player, self.stage)


@dataclass(frozen=True, eq=False)
class AffineObservation:
    """Measurement ``y = G (H zeta) + D u_prec``; the static form is ``H zeta``.

    ``precedence`` lists the DMs whose actions enter ``D`` (column blocks in
    that order); ``forward`` lists the DMs whose own measurements are embedded
    in this DM's information vector.
    """

    H: np.ndarray
    G: np.ndarray = None
    D: np.ndarray = None
    precedence: tuple = ()
    forward: tuple = ()
    noise_block: str = None

    def __post_init__(self):
        H = _frozen_array(self.H, ndim=2, name="H")
        m = H.shape[0]
        G = np.eye(m) if self.G is None else self.G
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "G", _frozen_array(G, ndim=2, name="G"))
        if self.D is not None:
            object.__setattr__(self, "D", _frozen_array(self.D, ndim=2, name="D"))
        object.__setattr__(self, "precedence", tuple(int(j) for j in self.precedence))
        object.__setattr__(self, "forward", tuple(int(j) for j in self.forward))

    @property
    def dim(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True, eq=False)
class TableObservation:
    """Finite measurement ``y = table[outcome, u_prec...]`` in ``0..n_obs-1``."""

    n_obs: int
    table: np.ndarray
    precedence: tuple = ()
    forward: tuple = ()
    noise_block: str = None

    def __post_init__(self):
        object.__setattr__(self, "table", _frozen_array(self.table, dtype=np.int64, name="table"))
        object.__setattr__(self, "n_obs", int(self.n_obs))
        object.__setattr__(self, "precedence", tuple(int(j) for j in self.precedence))
        object.__setattr__(self, "forward", tuple(int(j) for j in self.forward))

    @property
    def dim(self) -> int:
        return 1


# --------------------------------------------------------------------------
# costs
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticCost:
    """``c(z) = z' M z + b' z + const`` on ``z = [zeta; u]``."""

    M: np.ndarray
    b: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "M", _frozen_array(self.M, ndim=2, name="M"))
        object.__setattr__(self, "b", _frozen_array(self.b, ndim=1, name="b"))
        object.__setattr__(self, "const", float(self.const))
        n = self.b.shape[0]
        if self.M.shape != (n, n):
            raise StructuralError(f"cost matrix shape {self.M.shape} does not match vector length {n}")
        scale = max(1.0, float(np.max(np.abs(self.M))) if n else 1.0)
        if not np.allclose(self.M, self.M.T, atol=SYMMETRY_TOL * scale, rtol=0):
            raise StructuralError("cost matrix is not symmetric")

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    @classmethod
    def zero(cls, dim: int) -> "QuadraticCost":
        return cls(np.zeros((dim, dim)), np.zeros(dim), 0.0)

    @classmethod
    def from_squares(cls, dim: int, terms) -> "QuadraticCost":
        """Sum of ``weight * (a' z + k)**2`` over ``terms = [(weight, a, k), ...]``."""
        M = np.zeros((dim, dim))
        b = np.zeros(dim)
        c = 0.0
        for weight, a, k in terms:
            a = np.asarray(a, dtype=float)
            M += weight * np.outer(a, a)
            b += 2.0 * weight * k * a
            c += weight * k * k
        return cls(M, b, c)

    def __neg__(self):
        return QuadraticCost(-self.M, -self.b, -self.const)

    def scaled(self, factor: float) -> "QuadraticCost":
        return QuadraticCost(factor * self.M, factor * self.b, factor * self.const)

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        return np.einsum("ni,ij,nj->n", z, self.M, z) + z @ self.b + self.const

    def gradient(self, z: np.ndarray) -> np.ndarray:
        return 2.0 * np.atleast_2d(z) @ self.M + self.b


@dataclass(frozen=True, eq=False)
class TableCost:
    """Finite cost ``values[outcome, a_1, ..., a_M]``."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, name="cost table"))

    def __neg__(self):
        return TableCost(-self.values)


@dataclass(frozen=True, eq=False)
class TiltedCost:
    """Quadratic base cost multiplied by a density ratio (Monte Carlo only).

    ``ratio`` must provide ``log_ratio(zeta, u) -> (n,)``.
    """

    base: QuadraticCost
    ratio: object

    @property
    def dim(self) -> int:
        return self.base.dim

    def __neg__(self):
        return TiltedCost(-self.base, self.ratio)


# --------------------------------------------------------------------------
# policies
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    """``u = gain @ y + offset`` over the DM's canonical information vector."""

    gain: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gain", _frozen_array(self.gain, ndim=2, name="gain"))
        object.__setattr__(self, "offset", _frozen_array(self.offset, ndim=1, name="offset"))
        if self.gain.shape[0] != self.offset.shape[0]:
            raise StructuralError("gain rows and offset length differ")

    kind = "affine"

    @classmethod
    def zeros(cls, size: int, info_dim: int) -> "AffinePolicy":
        return cls(np.zeros((size, info_dim)), np.zeros(size))

    def act(self, y: np.ndarray) -> np.ndarray:
        return np.atleast_2d(y) @ self.gain.T + self.offset

    def same_as(self, other) -> bool:
        return (
            isinstance(other, AffinePolicy)
            and np.array_equal(self.gain, other.gain)
            and np.array_equal(self.offset, other.offset)
        )


@dataclass(frozen=True, eq=False)
class TablePolicy:
    """Action per information cell (cells indexed in mixed radix, C order)."""

    actions: np.ndarray

    kind = "table"

    def __post_init__(self):
        object.__setattr__(self, "actions", _frozen_array(self.actions, dtype=np.int64, ndim=1, name="actions"))

    def key(self):
        return tuple(int(a) for a in self.actions)

    def same_as(self, other) -> bool:
        return isinstance(other, TablePolicy) and np.array_equal(self.actions, other.actions)


@dataclass(frozen=True, eq=False)
class PolicyProfile:
    """One policy per DM, tagged with the variant whose information it reads."""

    policies: tuple
    variant: Variant = Variant.GENERAL

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "variant", Variant(self.variant))

    def __len__(self):
        return len(self.policies)

    def __getitem__(self, d):
        return self.policies[d]

    def with_policy(self, d: int, policy) -> "PolicyProfile":
        pols = list(self.policies)
        pols[d] = policy
        return PolicyProfile(tuple(pols), self.variant)

    def retag(self, variant) -> "PolicyProfile":
        return PolicyProfile(self.policies, Variant(variant))

    def key(self):
        """Hashable identity for tabular profiles."""
        return tuple(p.key() for p in self.policies)

    def same_as(self, other) -> bool:
        return (
            isinstance(other, PolicyProfile)
            and len(self) == len(other)
            and all(a.same_as(b) for a, b in zip(self.policies, other.policies))
        )


# --------------------------------------------------------------------------
# game
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Full intrinsic-model description of a game.

    Parameters
    ----------
    primitives : GaussianPrimitives or FinitePrimitives
    dms : sequence of Dm
        In global order.
    observations : sequence of AffineObservation or TableObservation
        One per DM.
    costs : sequence
        One cost per player, players numbered ``1..N``.
    variant : Variant
    zero_sum : bool
        Two players with ``c2 == -c1``.
    """

    primitives: object
    dms: tuple
    observations: tuple
    costs: tuple
    variant: Variant = Variant.GENERAL
    zero_sum: bool = False
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dms", tuple(self.dms))
        object.__setattr__(self, "observations", tuple(self.observations))
        object.__setattr__(self, "costs", tuple(self.costs))
        object.__setattr__(self, "variant", Variant(self.variant))
        self._validate()

    # -- basic structure ---------------------------------------------------

    @property
    def family(self) -> str:
        return self.primitives.family

    @property
    def n_dms(self) -> int:
        return len(self.dms)

    @property
    def players(self):
        return sorted({dm.player for dm in self.dms})

    @property
    def n_players(self) -> int:
        return len(self.costs)

    def player_dms(self, player: int):
        return tuple(d for d, dm in enumerate(self.dms) if dm.player == player)

    def dm_index(self, ref) -> int:
        if isinstance(ref, (int, np.integer)):
            return int(ref)
        for d, dm in enumerate(self.dms):
            if dm.name == ref or dm.label == ref:
                return d
        raise StructuralError(f"unknown DM {ref!r}")

    @property
    def action_sizes(self):
        return [dm.size for dm in self.dms]

    @property
    def action_offsets(self):
        out, s = [], 0
        for dm in self.dms:
            out.append(s)
            s += dm.size
        return out

    @property
    def n_action_total(self) -> int:
        return sum(self.action_sizes)

    def action_slice(self, d: int) -> slice:
        s = self.action_offsets[d]
        return slice(s, s + self.dms[d].size)

    def shared(self, d: int):
        """DMs whose actions a control-sharing information vector of ``d`` holds."""
        out = set(self.observations[d].precedence)
        for j in self.observations[d].forward:
            out.update(self.observations[j].precedence)
        return tuple(sorted(out))

    def info_layout(self, d: int, variant=None):
        """Components ``("obs", j)`` / ``("act", j)`` of DM ``d``'s info vector."""
        variant = self.variant if variant is None else Variant(variant)
        obs = self.observations[d]
        comps = [("obs", j) for j in obs.forward]
        if variant.control_sharing:
            comps += [("act", j) for j in self.shared(d)]
        comps.append(("obs", d))
        return tuple(comps)

    def component_size(self, comp) -> int:
        kind, j = comp
        if self.family == "finite":
            return self.observations[j].n_obs if kind == "obs" else self.dms[j].size
        return self.observations[j].dim if kind == "obs" else self.dms[j].size

    def info_dim(self, d: int, variant=None) -> int:
        if self.family == "finite":
            return len(self.info_layout(d, variant))
        return sum(self.component_size(c) for c in self.info_layout(d, variant))

    def info_radices(self, d: int, variant=None):
        """Finite games: cardinality of each info component."""
        return tuple(self.component_size(c) for c in self.info_layout(d, variant))

    def n_info_cells(self, d: int, variant=None) -> int:
        return int(np.prod(self.info_radices(d, variant), dtype=int))

    @property
    def n_zeta(self) -> int:
        return self.primitives.dim if self.family == "gaussian" else 0

    @property
    def z_dim(self) -> int:
        return self.n_zeta + self.n_action_total

    def with_variant(self, variant) -> "GameSpec":
        return replace(self, variant=Variant(variant), _cache={})

    def replace(self, **kw) -> "GameSpec":
        kw.setdefault("_cache", {})
        return replace(self, **kw)

    def player_cost(self, player: int):
        return self.costs[player - 1]

    # -- validation --------------------------------------------------------

    def _validate(self):
        names = [dm.name for dm in self.dms]
        if len(set(names)) != len(names):
            raise StructuralError("DM names must be unique")
        labels = [dm.label for dm in self.dms]
        if len(set(labels)) != len(labels):
            raise StructuralError("(player, stage) pairs must be unique")
        players = sorted({dm.player for dm in self.dms})
        if players != list(range(1, len(players) + 1)):
            raise StructuralError(f"players must be numbered 1..N, got {players}")
        if len(self.costs) != len(players):
            raise StructuralError(f"expected {len(players)} player costs, got {len(self.costs)}")
        if len(self.observations) != len(self.dms):
            raise StructuralError("one observation map per DM is required")
        for dm in self.dms:
            if dm.size < 1:
                raise StructuralError(f"DM {dm.name} has empty action set")
        for d, obs in enumerate(self.observations):
            for ref in obs.precedence + obs.forward:
                if not 0 <= ref < d:
                    raise StructuralError(
                        f"DM {self.dms[d].name} references DM index {ref}; precedence must point "
                        "to strictly earlier DMs (acyclic order)"
                    )
            if len(set(obs.precedence)) != len(obs.precedence) or len(set(obs.forward)) != len(obs.forward):
                raise StructuralError(f"duplicate references in DM {self.dms[d].name}")
            if list(obs.forward) != sorted(obs.forward):
                raise StructuralError(f"forward set of DM {self.dms[d].name} must be in global order")
        if self.family == "gaussian":
            self._validate_gaussian()
        elif self.family == "finite":
            self._validate_finite()
        else:
            raise StructuralError(f"unknown primitive family {self.family!r}")
        if self.zero_sum:
            self._validate_zero_sum()
        if self.variant.requires_nesting:
            from .core import validate_partial_nestedness

            report = validate_partial_nestedness(self)
            if not report.nested:
                raise StructuralError(
                    f"variant {self.variant.value} requires partial nestedness; violations {report.violations}"
                )

    def _validate_gaussian(self):
        n = self.primitives.dim
        names = set(self.primitives.block_names)
        for d, obs in enumerate(self.observations):
            if not isinstance(obs, AffineObservation):
                raise StructuralError("Gaussian games need affine observation kernels")
            m = obs.dim
            if obs.H.shape[1] != n:
                raise StructuralError(f"H of DM {self.dms[d].name} has {obs.H.shape[1]} columns, expected {n}")
            if obs.G.shape != (m, m):
                raise StructuralError(f"G of DM {self.dms[d].name} must be square {m}x{m}")
            width = sum(self.dms[j].size for j in obs.precedence)
            if obs.D is None:
                object.__setattr__(obs, "D", _frozen_array(np.zeros((m, width)), name="D"))
            if obs.D.shape != (m, width):
                raise StructuralError(
                    f"D of DM {self.dms[d].name} has shape {obs.D.shape}, expected {(m, width)}"
                )
            if obs.noise_block is not None and obs.noise_block not in names:
                raise StructuralError(f"unknown noise block {obs.noise_block!r}")
        nz = n + self.n_action_total
        for c in self.costs:
            if not isinstance(c, (QuadraticCost, TiltedCost)):
                raise StructuralError("Gaussian games need quadratic costs")
            if c.dim != nz:
                raise StructuralError(f"cost acts on dimension {c.dim}, expected {nz}")

    def _validate_finite(self):
        n_out = self.primitives.n_outcomes
        names = set(self.primitives.block_names)
        for d, obs in enumerate(self.observations):
            if not isinstance(obs, TableObservation):
                raise StructuralError("finite games need table observation kernels")
            shape = (n_out,) + tuple(self.dms[j].size for j in obs.precedence)
            if obs.table.shape != shape:
                raise StructuralError(
                    f"observation table of DM {self.dms[d].name} has shape {obs.table.shape}, expected {shape}"
                )
            if obs.table.size and (obs.table.min() < 0 or obs.table.max() >= obs.n_obs):
                raise StructuralError(f"observation table of DM {self.dms[d].name} leaves its alphabet")
            if obs.noise_block is not None and obs.noise_block not in names:
                raise StructuralError(f"unknown noise block {obs.noise_block!r}")
            if self.variant.static and obs.precedence:
                t = obs.table.reshape(n_out, -1)
                if not np.all(t == t[:, :1]):
                    raise StructuralError(
                        f"static variant: observation of DM {self.dms[d].name} depends on actions"
                    )
        shape = (n_out,) + tuple(self.action_sizes)
        for c in self.costs:
            if not isinstance(c, TableCost):
                raise StructuralError("finite games need table costs")
            if c.values.shape != shape:
                raise StructuralError(f"cost table has shape {c.values.shape}, expected {shape}")

    def _validate_zero_sum(self):
        if len(self.costs) != 2:
            raise StructuralError("zero-sum games have exactly two players")
        c1, c2 = self.costs
        if isinstance(c1, TableCost):
            ok = np.array_equal(c1.values, -c2.values)
        elif isinstance(c1, QuadraticCost) and isinstance(c2, QuadraticCost):
            scale = max(1.0, float(np.max(np.abs(c1.M))), float(np.max(np.abs(c1.b), initial=0.0)))
            tol = 1e-12 * scale
            ok = (
                np.allclose(c1.M, -c2.M, atol=tol, rtol=0)
                and np.allclose(c1.b, -c2.b, atol=tol, rtol=0)
                and abs(c1.const + c2.const) <= tol * max(1.0, abs(c1.const))
            )
        else:
            ok = isinstance(c2, TiltedCost) and isinstance(c1, TiltedCost)
        if not ok:
            raise StructuralError("zero-sum flag requires c2 == -c1")


def check_profile(game: GameSpec, profile: PolicyProfile, strict_variant: bool = True):
    """Raise unless ``profile`` fits ``game``'s DMs and information layout."""
    if strict_variant and profile.variant is not game.variant:
        raise StructuralError(
            f"profile is tagged {profile.variant.value} but the game is {game.variant.value}"
        )
    if len(profile) != game.n_dms:
        raise StructuralError(f"profile has {len(profile)} policies for {game.n_dms} DMs")
    for d, pol in enumerate(profile.policies):
        if game.family == "gaussian":
            if not isinstance(pol, AffinePolicy):
                from .errors import UnsupportedError

                raise UnsupportedError(f"DM {game.dms[d].name}: Gaussian games need affine policies")
            want = (game.dms[d].size, game.info_dim(d))
            if pol.gain.shape != want:
                raise StructuralError(f"DM {game.dms[d].name}: gain shape {pol.gain.shape}, expected {want}")
        else:
            if not isinstance(pol, TablePolicy):
                raise StructuralError(f"DM {game.dms[d].name}: finite games need table policies")
            cells = game.n_info_cells(d)
            if pol.actions.shape != (cells,):
                raise StructuralError(
                    f"DM {game.dms[d].name}: table has {pol.actions.shape[0]} cells, expected {cells}"
                )
            if pol.actions.min() < 0 or pol.actions.max() >= game.dms[d].size:
                raise StructuralError(f"DM {game.dms[d].name}: table action out of range")


def zero_profile(game: GameSpec, variant=None) -> PolicyProfile:
    """All-zero affine profile (or all-zero-action table profile)."""
    variant = game.variant if variant is None else Variant(variant)
    pols = []
    for d, dm in enumerate(game.dms):
        if game.family == "gaussian":
            pols.append(AffinePolicy.zeros(dm.size, game.info_dim(d, variant)))
        else:
            pols.append(TablePolicy(np.zeros(game.n_info_cells(d, variant), dtype=int)))
    return PolicyProfile(tuple(pols), variant)
