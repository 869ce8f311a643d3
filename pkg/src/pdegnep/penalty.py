"""Moreau-Yosida penalty of the bilateral state constraint ``lo <= y <= hi``.

All integrals use vertex (lumped) quadrature, so the penalty gradient is a
diagonal, vertexwise expression and is the exact derivative of the discrete
penalty value.
"""

from dataclasses import dataclass

import numpy as np

from .mesh_fem import FeFunction, lumped_mass


@dataclass(frozen=True)
class Obstacles:
    """Lower and upper state bounds, each a constant or an :class:`FeFunction`."""

    lower: object = 0.0
    upper: object = 0.3

    def arrays(self, mesh):
        lo = _as_array(self.lower, mesh)
        hi = _as_array(self.upper, mesh)
        if np.any(lo >= hi):
            raise ValueError("obstacles must satisfy lower < upper at every vertex")
        return lo, hi


def _as_array(bound, mesh):
    if isinstance(bound, FeFunction):
        if bound.mesh is not mesh:
            raise ValueError("obstacle lives on a different mesh")
        return np.asarray(bound.values)
    return np.full(mesh.n_vertices, float(bound))


def violations(y, lo, hi):
    """Return ``(max(y - hi, 0), max(lo - y, 0))`` vertexwise."""
    return np.maximum(y - hi, 0.0), np.maximum(lo - y, 0.0)


def beta_value(y, lo, hi, weights):
    up, down = violations(y, lo, hi)
    return 0.5 * float(weights @ (up * up + down * down))


def beta_gradient(y, lo, hi, weights):
    up, down = violations(y, lo, hi)
    return weights * (up - down)


def active_masks(y, lo, hi):
    """Boolean masks of strictly violated upper and lower bounds."""
    return y > hi, y < lo


def _unpack(y, obs):
    if not isinstance(y, FeFunction):
        raise TypeError("expected an FeFunction")
    lo, hi = obs.arrays(y.mesh)
    return np.asarray(y.values), lo, hi, lumped_mass(y.mesh)


def beta(y, obs):
    """Penalty ``1/2 sum_v m_v [(y_v - hi_v)_+^2 + (lo_v - y_v)_+^2]``."""
    yv, lo, hi, m = _unpack(y, obs)
    return beta_value(yv, lo, hi, m)


def beta_grad(y, obs):
    """Gradient of :func:`beta` as a functional (mass-weighted) vector."""
    yv, lo, hi, m = _unpack(y, obs)
    return beta_gradient(yv, lo, hi, m)


def beta_active_sets(y, obs):
    """Vertex index sets where the upper resp. lower bound is violated.

    A vertex sitting exactly on a bound is inactive.
    """
    yv, lo, hi, _ = _unpack(y, obs)
    up, down = active_masks(yv, lo, hi)
    return np.flatnonzero(up), np.flatnonzero(down)
