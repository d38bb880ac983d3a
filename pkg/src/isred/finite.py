"""Vectorized evaluation of finite games over grids of table policies."""

from __future__ import annotations

import itertools

import numpy as np

from .errors import SizeGuardError, StructuralError

PROFILE_GUARD = 10_000_000


def cell_index(radices, components):
    """Mixed-radix (C order) index of information components."""
    idx = 0
    for r, c in zip(radices, components):
        idx = idx * r + c
    return idx


def all_tables(n_cells: int, n_actions: int) -> np.ndarray:
    """Every table over ``n_cells`` cells, lexicographic, shape (P, n_cells)."""
    count = n_actions**n_cells
    if count > PROFILE_GUARD:
        raise SizeGuardError(f"{count} tables exceed the enumeration guard")
    if n_cells == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(n_actions), repeat=n_cells)), dtype=np.int64)


def _obs_symbol(game, d, outcome, acts):
    obs = game.observations[d]
    if game.variant.static:
        idx = (outcome,) + (0,) * len(obs.precedence)
        return obs.table[idx]
    idx = (outcome,) + tuple(acts[k] for k in obs.precedence)
    return obs.table[idx]


def forward_pass(game, tables, outcome, order=None):
    """Observation symbols and actions at one outcome for a grid of profiles.

    ``tables[d]`` has shape (P_d, n_cells_d); the result arrays broadcast over
    an axis per DM.
    """
    M = game.n_dms
    syms, acts = [None] * M, [None] * M
    for d in range(M) if order is None else order:
        syms[d] = np.asarray(_obs_symbol(game, d, outcome, acts))
        cell = np.zeros((), dtype=np.int64)
        for comp in game.info_layout(d):
            kind, j = comp
            r = game.component_size(comp)
            cell = cell * r + (syms[j] if kind == "obs" else acts[j])
        shape = [1] * M
        shape[d] = tables[d].shape[0]
        pidx = np.arange(tables[d].shape[0]).reshape(shape)
        acts[d] = tables[d][pidx, cell]
    return syms, acts


def evaluate_grid(game, tables) -> np.ndarray:
    """Expected costs of every profile in the product of ``tables``.

    Returns an array of shape (n_players, P_1, ..., P_M).
    """
    M = game.n_dms
    if len(tables) != M:
        raise StructuralError("one candidate table set per DM is required")
    tables = [np.asarray(t, dtype=np.int64) for t in tables]
    sizes = [t.shape[0] for t in tables]
    if int(np.prod(sizes, dtype=float)) > PROFILE_GUARD:
        raise SizeGuardError(f"{int(np.prod(sizes, dtype=float))} profiles exceed the guard of {PROFILE_GUARD}")
    probs = game.primitives.probabilities()
    J = np.zeros((game.n_players,) + tuple(sizes))
    for o, p in enumerate(probs):
        if p == 0.0:
            continue
        _, acts = forward_pass(game, tables, o)
        for i, cost in enumerate(game.costs):
            J[i] += p * cost.values[(o,) + tuple(acts)]
    return J


def compose_table(game, profile, order=None) -> np.ndarray:
    """Actions of every DM at every outcome, shape (n_outcomes, M)."""
    tables = [p.actions[None, :] for p in profile.policies]
    out = np.zeros((game.primitives.n_outcomes, game.n_dms), dtype=np.int64)
    for o in range(game.primitives.n_outcomes):
        _, acts = forward_pass(game, tables, o, order)
        out[o] = [int(np.ravel(a)[0]) for a in acts]
    return out


def profile_costs(game, profile) -> np.ndarray:
    """Exact expected cost per player of a single table profile."""
    tables = [p.actions[None, :] for p in profile.policies]
    return evaluate_grid(game, tables).reshape(game.n_players)
