"""Affine forward substitution for Gaussian games.

Every quantity in an affine-Gaussian game with affine policies is an affine
function of the primitive vector ``zeta`` and, optionally, of a vector ``v``
of "free" actions that are left symbolic.  :func:`linearize` computes these
maps once so that costs, gradients and conditional expectations become plain
linear algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructuralError, UnsupportedError
from .model import AffinePolicy, QuadraticCost

PINV_RCOND = 1e-12


@dataclass
class AffineSystem:
    """``z = L zeta + K v + m`` and per-DM info ``y_d = F_d zeta + E_d v + f_d``.

    ``z`` stacks ``zeta`` followed by all actions in DM order.
    """

    n_zeta: int
    L: np.ndarray
    K: np.ndarray
    m: np.ndarray
    info_F: list
    info_E: list
    info_f: list
    meas_F: list
    meas_E: list
    meas_f: list
    free: tuple
    free_cols: dict

    @property
    def n_free(self) -> int:
        return self.K.shape[1]

    def z_moments(self, mean, cov):
        """Mean and covariance of ``z`` when ``v`` is zero."""
        mu = self.L @ mean + self.m
        return mu, self.L @ cov @ self.L.T


def _check_order(game, order):
    if order is None:
        return list(range(game.n_dms))
    order = [int(d) for d in order]
    if sorted(order) != list(range(game.n_dms)):
        raise StructuralError("processing order must be a permutation of the DMs")
    seen = set()
    for d in order:
        obs = game.observations[d]
        needs = set(obs.precedence) | set(obs.forward) | set(game.shared(d))
        if not needs <= seen:
            raise StructuralError(f"processing order is not topological at DM {game.dms[d].name}")
        seen.add(d)
    return order


def linearize(game, profile=None, free=(), order=None) -> AffineSystem:
    """Forward-substitute affine policies through the game.

    Parameters
    ----------
    game : GameSpec
        Gaussian family.
    profile : PolicyProfile, optional
        Policies of the DMs not listed in ``free``.
    free : sequence of int
        DMs whose actions stay symbolic; their columns in ``v`` follow this order.
    order : sequence of int, optional
        Any topological processing order; the result does not depend on it.
    """
    if game.family != "gaussian":
        raise UnsupportedError("linearize needs a Gaussian game")
    n = game.n_zeta
    free = tuple(int(d) for d in free)
    free_cols, s = {}, 0
    for d in free:
        free_cols[d] = slice(s, s + game.dms[d].size)
        s += game.dms[d].size
    nv = s
    M = game.n_dms
    Lu, Ku, mu = [None] * M, [None] * M, [None] * M
    mF, mE, mf = [None] * M, [None] * M, [None] * M
    iF, iE, i_f = [None] * M, [None] * M, [None] * M
    static = game.variant.static
    for d in _check_order(game, order):
        obs = game.observations[d]
        if static:
            F = obs.H.copy()
            E = np.zeros((obs.dim, nv))
            f = np.zeros(obs.dim)
        else:
            F = obs.G @ obs.H
            E = np.zeros((obs.dim, nv))
            f = np.zeros(obs.dim)
            c = 0
            for k in obs.precedence:
                w = game.dms[k].size
                Dk = obs.D[:, c : c + w]
                c += w
                F = F + Dk @ Lu[k]
                E = E + Dk @ Ku[k]
                f = f + Dk @ mu[k]
        mF[d], mE[d], mf[d] = F, E, f
        Fs, Es, fs = [], [], []
        for kind, j in game.info_layout(d):
            if kind == "obs":
                Fs.append(mF[j]), Es.append(mE[j]), fs.append(mf[j])
            else:
                Fs.append(Lu[j]), Es.append(Ku[j]), fs.append(mu[j])
        iF[d], iE[d], i_f[d] = np.vstack(Fs), np.vstack(Es), np.concatenate(fs)
        size = game.dms[d].size
        if d in free_cols:
            Lu[d] = np.zeros((size, n))
            Ku[d] = np.zeros((size, nv))
            Ku[d][:, free_cols[d]] = np.eye(size)
            mu[d] = np.zeros(size)
        else:
            if profile is None:
                raise StructuralError("a profile is required for DMs that are not free")
            pol = profile[d]
            if not isinstance(pol, AffinePolicy):
                raise UnsupportedError(f"DM {game.dms[d].name}: Gaussian games need affine policies")
            if pol.gain.shape != (size, iF[d].shape[0]):
                raise StructuralError(
                    f"DM {game.dms[d].name}: gain shape {pol.gain.shape}, expected {(size, iF[d].shape[0])}"
                )
            # skipping all-zero gain columns makes zero-padded embeddings bit-identical
            used = np.flatnonzero(np.any(pol.gain != 0, axis=0))
            A = pol.gain[:, used]
            Lu[d] = A @ iF[d][used]
            Ku[d] = A @ iE[d][used]
            mu[d] = A @ i_f[d][used] + pol.offset
    L = np.vstack([np.eye(n)] + Lu)
    K = np.vstack([np.zeros((n, nv))] + Ku)
    m = np.concatenate([np.zeros(n)] + mu)
    return AffineSystem(n, L, K, m, iF, iE, i_f, mF, mE, mf, free, free_cols)


def quadratic_expectation(cost: QuadraticCost, mean, cov) -> float:
    """``E[z'Mz + b'z + c]`` for ``z`` with the given mean and covariance."""
    return float(np.trace(cost.M @ cov) + mean @ cost.M @ mean + cost.b @ mean + cost.const)


def conditional_mean_map(mean, cov, F, f):
    """Affine map ``y -> E[zeta | y]`` for ``y = F zeta + f``.

    Returns ``(P, q)`` with ``E[zeta | y] = P y + q``; degenerate ``y``
    components are handled with a pseudo-inverse.
    """
    S = F @ cov @ F.T
    P = cov @ F.T @ np.linalg.pinv(S, rcond=PINV_RCOND, hermitian=True)
    q = mean - P @ (F @ mean + f)
    return P, q


def info_moments(system: AffineSystem, d: int, mean, cov):
    """Mean and covariance of DM ``d``'s information when ``v`` is zero."""
    F, f = system.info_F[d], system.info_f[d]
    return F @ mean + f, F @ cov @ F.T
