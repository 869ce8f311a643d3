"""Semilinear elliptic state equations and their linearizations.

Two problem kinds are supported:

``distributed``
    ``-Δy + y^3 = sum_i B_i u_i`` in the square, ``y = 0`` on the boundary.
``boundary``
    ``-Δy + y = 0`` in the square, ``∂y/∂ν + y^3 = sum_i B_i u_i`` on the boundary.

Discretely, ``A(y) = L0 y + c * y**3`` where ``L0`` is the stiffness matrix
(plus the consistent mass matrix for the boundary kind) and ``c`` holds the
lumped volume resp. boundary quadrature weights. Controls are vertex values
on each player's support; ``B_i`` weights them with the lumped mass of the
player's region, so interface vertices receive contributions from every
adjacent player.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh_fem import (
    FULL,
    ZERO_TRACE,
    FeFunction,
    assemble_mass,
    assemble_stiffness,
    lumped_boundary_mass,
    lumped_mass,
    solve_sparse,
)
from .newton import DampingPolicy, semismooth_newton

DISTRIBUTED = "distributed"
BOUNDARY = "boundary"
QUADRANT_REGIONS = ((1,), (2,), (3,), (4,))


@dataclass
class StateReport:
    iterations: int
    residual: float
    converged: bool
    damping: float


class StateProblem:
    """Assembled operators of one state equation on a fixed mesh.

    Parameters
    ----------
    mesh : Mesh
        Crossed mesh with an even number of segments.
    kind : {"distributed", "boundary"}
    regions : sequence of tuples
        Quadrant ids owned by each player. For the boundary kind a player's
        control lives on the boundary segments of its quadrants.
    """

    def __init__(self, mesh, kind, regions=QUADRANT_REGIONS):
        if kind not in (DISTRIBUTED, BOUNDARY):
            raise ValueError(f"unknown problem kind {kind!r}")
        if mesh.n_segments % 2:
            raise ValueError("subdomain-aligned operators need an even number of segments")
        owned = [q for r in regions for q in r]
        if len(owned) != len(set(owned)):
            raise ValueError("player regions must be disjoint")
        self.mesh = mesh
        self.kind = kind
        self.regions = tuple(tuple(r) for r in regions)
        self.stiffness = assemble_stiffness(mesh)
        self.mass = assemble_mass(mesh)
        self.lumped = lumped_mass(mesh)
        if kind == DISTRIBUTED:
            self.L0 = self.stiffness
            self.cubic_weights = self.lumped
            self.free = mesh.interior_vertices()
            self.constrained = np.asarray(mesh.boundary_vertices)
            self.space = ZERO_TRACE
            per_region = {q: lumped_mass(mesh, q) for q in owned}
        else:
            self.L0 = (self.stiffness + self.mass).tocsr()
            self.cubic_weights = lumped_boundary_mass(mesh)
            self.free = np.arange(mesh.n_vertices)
            self.constrained = np.array([], dtype=int)
            self.space = FULL
            per_region = {q: lumped_boundary_mass(mesh, q) for q in owned}
        self.supports = []
        self.control_weights = []
        for r in self.regions:
            w = sum(per_region[q] for q in r)
            support = np.flatnonzero(w > 0)
            self.supports.append(support)
            self.control_weights.append(w[support])

    @property
    def n_players(self):
        return len(self.regions)

    @property
    def n_vertices(self):
        return self.mesh.n_vertices

    def apply_B(self, i, u_i):
        """Load vector of player ``i``'s control values on its support."""
        u_i = np.asarray(u_i, dtype=float)
        support = self.supports[i]
        if u_i.shape != support.shape:
            raise ValueError(
                f"player {i} control needs {support.size} values, got shape {u_i.shape}"
            )
        load = np.zeros(self.n_vertices)
        load[support] = self.control_weights[i] * u_i
        return load

    def total_load(self, controls):
        if len(controls) != self.n_players:
            raise ValueError(f"expected {self.n_players} controls, got {len(controls)}")
        load = np.zeros(self.n_vertices)
        for i, u_i in enumerate(controls):
            load += self.apply_B(i, u_i)
        return load

    def apply_A(self, y):
        y = np.asarray(y, dtype=float)
        return self.L0 @ y + self.cubic_weights * y**3

    def linearized_operator(self, y):
        """``DA(y) = L0 + diag(3 c y^2)``; symmetric, so it is also the adjoint."""
        y = _values(y)
        return (self.L0 + sp.diags(3.0 * self.cubic_weights * y * y)).tocsr()

    def zero_controls(self):
        return [np.zeros(s.size) for s in self.supports]

    def solve_state_load(self, load, y0=None, policy=None):
        """Solve ``A(y) = load`` on the free vertices (Dirichlet rows are dropped).

        Converges once ``||A(y) - load|| <= 1e-12 * max(1, ||load||)``.
        """
        free = self.free
        L0 = self.L0[free][:, free].tocsr()
        c = self.cubic_weights[free]
        f = np.asarray(load, dtype=float)[free]

        def residual(z):
            return L0 @ z + c * z**3 - f

        def jacobian(z):
            return (L0 + sp.diags(3.0 * c * z * z)).tocsc()

        z0 = np.zeros(free.size) if y0 is None else _values(y0)[free]
        scale = max(1.0, float(np.linalg.norm(f)))
        z, rep = semismooth_newton(
            residual, jacobian, z0, policy or DampingPolicy(),
            atol=1e-12 * scale, rtol=1e-12, ref_norm=scale,
        )
        y = np.zeros(self.n_vertices)
        y[free] = z
        report = StateReport(rep.iterations, rep.abs_residual, rep.converged, rep.damping)
        return FeFunction(self.mesh, y, self.space), report

    def solve_state(self, controls, y0=None, policy=None):
        """State ``S(u)`` for a list of per-player controls."""
        return self.solve_state_load(self.total_load(controls), y0=y0, policy=policy)

    def solve_adjoint(self, y, rhs):
        """Solve ``DA(y) p = rhs`` with the state's boundary conditions."""
        p = solve_sparse(self.linearized_operator(y), rhs, self.constrained)
        return FeFunction(self.mesh, p, self.space)


def _values(y):
    return np.asarray(y.values if isinstance(y, FeFunction) else y, dtype=float)
