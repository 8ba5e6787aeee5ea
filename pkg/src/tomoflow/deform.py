"""Linearized deformations: warping, adjoint transport, flow maps.

The forward model never integrates a flow ODE exactly; it chains per-step
linearized warps on the fine time grid (step ``dt = 1/(MN)``):

    warped[0] = template
    warped[j](x) = interp(warped[j-1], x - dt * nu[j](x)),   j = 1..MN

Two backward transports are provided:

* ``pull_back_eta`` is the continuum-faithful recursion: multiply by the
  divergence factor ``1 + dt * div nu_j`` and compose with the displaced
  identity ``x + dt * nu_j(x)``.  It approximates mass-preserving transport
  to O(dt) and feeds the diagnostics.
* ``StepSampler.push`` is the exact matrix transpose of the corresponding
  warp step.  Chaining pushes gives the exact adjoint of the warp chain,
  which is what the solver's gradients are built from; the two transports
  agree to O(dt).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (
    Grid2,
    TimeGrid,
    VectorField2,
    VelocityFieldSeries,
    divergence,
    interp_bilinear,
    interp_bilinear_with_gradient,
    splat_bilinear,
)

__all__ = [
    "StepSampler",
    "WarpState",
    "EtaTable",
    "push_forward_template",
    "seed_eta",
    "pull_back_eta",
    "pull_back_exact",
    "integrate_flow_map",
]


class StepSampler:
    """One warp step ``x -> x - dt * nu(x)`` as a reusable linear map.

    ``pull`` applies the step to an image (gather), ``push`` applies the
    exact transpose (scatter), and ``grad_prev`` returns the interpolant
    derivative of a source image at the displaced sample points, which is
    the chain-rule factor of the step w.r.t. the velocity.
    """

    def __init__(self, grid: Grid2, nu_j: VectorField2, dt: float):
        self.grid = grid
        self.identity = not (np.any(nu_j.u) or np.any(nu_j.v))
        if self.identity:
            self.px = self.py = None
            return
        x, y = grid.meshgrid()
        self.px = x - dt * nu_j.u
        self.py = y - dt * nu_j.v

    def pull(self, values: np.ndarray) -> np.ndarray:
        if self.identity:
            return values.copy()
        return interp_bilinear(self.grid, values, self.px, self.py)

    def push(self, values: np.ndarray) -> np.ndarray:
        if self.identity:
            return values.copy()
        return splat_bilinear(self.grid, values, self.px, self.py)

    def grad_prev(self, prev_values: np.ndarray):
        if self.identity:
            x, y = self.grid.meshgrid()
            _, gx, gy = interp_bilinear_with_gradient(self.grid, prev_values, x, y)
            return gx, gy
        _, gx, gy = interp_bilinear_with_gradient(
            self.grid, prev_values, self.px, self.py
        )
        return gx, gy


@dataclass
class WarpState:
    """Warped template at every fine time, plus the per-step samplers.

    ``nu_source`` records the velocity series the chain was built from, so
    downstream adjoint transports can assert they pair with the right flow.
    """

    grid: Grid2
    time_grid: TimeGrid
    warped: list
    samplers: list = field(default_factory=list)
    nu_source: VelocityFieldSeries | None = None

    def gate_image(self, i: int) -> np.ndarray:
        return self.warped[self.time_grid.gate_fine_index(i)]


def push_forward_template(
    grid: Grid2, template: np.ndarray, nu: VelocityFieldSeries
) -> WarpState:
    """Chain the warp recursion over all fine time steps.

    With zero velocity every step is the identity and ``warped[j]`` equals
    the template bitwise.
    """
    tg = nu.time_grid
    dt = tg.dt
    warped = [np.array(template, dtype=np.float64, copy=True)]
    samplers = [None]  # slot 0 unused; step j consumes nu[j]
    for j in range(1, tg.mn + 1):
        sampler = StepSampler(grid, nu[j], dt)
        warped.append(sampler.pull(warped[-1]))
        samplers.append(sampler)
    return WarpState(grid, tg, warped, samplers, nu)


def seed_eta(
    template_warped_at_gate: np.ndarray, gate_residual_backproj: np.ndarray
) -> np.ndarray:
    """Transport seed at a gate time: the back-projected residual, unchanged.

    The warped template is part of the seed's definition (the residual was
    formed from it) but does not enter the value.
    """
    if template_warped_at_gate.shape != gate_residual_backproj.shape:
        raise ValueError("warped template and residual back-projection differ in shape")
    return np.array(gate_residual_backproj, dtype=np.float64, copy=True)


def pull_back_eta(
    grid: Grid2,
    seed: np.ndarray,
    nu: VelocityFieldSeries,
    gate_index: int,
) -> list:
    """Mass-preserving transport of a gate seed back to time zero.

    Returns ``eta[j]`` for ``j = 0..i*M`` with ``eta[i*M]`` the seed itself;
    each backward step multiplies by the divergence factor and composes with
    the displaced identity via bilinear interpolation.
    """
    tg = nu.time_grid
    dt = tg.dt
    j_gate = tg.gate_fine_index(gate_index)
    etas = [None] * (j_gate + 1)
    etas[j_gate] = np.array(seed, dtype=np.float64, copy=True)
    x, y = grid.meshgrid()
    for j in range(j_gate - 1, -1, -1):
        nu_j = nu[j]
        if not (np.any(nu_j.u) or np.any(nu_j.v)):
            etas[j] = etas[j + 1].copy()
            continue
        moved = interp_bilinear(grid, etas[j + 1], x + dt * nu_j.u, y + dt * nu_j.v)
        factor = 1.0 + dt * divergence(grid, nu_j.u, nu_j.v)
        etas[j] = factor * moved
    return etas


def pull_back_exact(
    seed: np.ndarray,
    warp_state: WarpState,
    gate_index: int,
) -> list:
    """Adjoint transport through the exact transposes of the warp steps.

    Returns ``X[j]`` for ``j = 0..i*M`` where ``X[i*M]`` is the seed and
    ``X[j-1] = C_j^T X[j]`` with ``C_j`` the step-j warp matrix.  ``X[0]``
    is the exact adjoint of the whole chain applied to the seed.
    """
    tg = warp_state.time_grid
    j_gate = tg.gate_fine_index(gate_index)
    xs = [None] * (j_gate + 1)
    xs[j_gate] = np.array(seed, dtype=np.float64, copy=True)
    for j in range(j_gate, 0, -1):
        xs[j - 1] = warp_state.samplers[j].push(xs[j])
    return xs


class EtaTable:
    """Transported adjoint fields for all gates and fine times.

    ``eta(j, i)`` is defined for ``j <= i*M``; the window accessor ``h(j, i)``
    extends by zero for ``j > i*M``, matching the time-window convention of
    the gradient assembly.
    """

    def __init__(self, grid: Grid2, nu: VelocityFieldSeries, seeds: dict):
        self.grid = grid
        self.time_grid = nu.time_grid
        self._table = {
            i: pull_back_eta(grid, seed, nu, i) for i, seed in sorted(seeds.items())
        }

    def gates(self):
        return sorted(self._table.keys())

    def eta(self, j: int, i: int) -> np.ndarray:
        j_gate = self.time_grid.gate_fine_index(i)
        if j > j_gate:
            raise IndexError(f"eta undefined for fine index {j} past gate {i}")
        return self._table[i][j]

    def h(self, j: int, i: int) -> np.ndarray:
        j_gate = self.time_grid.gate_fine_index(i)
        if j > j_gate:
            return self.grid.zeros()
        return self._table[i][j]


def integrate_flow_map(
    grid: Grid2,
    nu: VelocityFieldSeries,
    j_from: int,
    j_to: int,
) -> VectorField2:
    """Coordinates of the flow map between two fine time indices.

    Composes the per-step linearized maps; diagnostic use only (the solver
    never materializes maps).  Forward in time applies
    ``x -> x + dt * nu[j](x)`` for ``j = j_from..j_to-1``; backward applies
    ``x -> x - dt * nu[j](x)`` for ``j = j_from..j_to+1``.  Velocity values
    at the moving positions come from bilinear interpolation with zero
    extension, so trajectories leaving the domain stop moving.
    """
    tg = nu.time_grid
    if not (0 <= j_from <= tg.mn and 0 <= j_to <= tg.mn):
        raise ValueError("fine time indices out of range")
    dt = tg.dt
    phi_x, phi_y = grid.meshgrid()
    phi_x = phi_x.copy()
    phi_y = phi_y.copy()
    if j_to >= j_from:
        steps = range(j_from, j_to)
        sign = 1.0
    else:
        steps = range(j_from, j_to, -1)
        sign = -1.0
    for j in steps:
        u = interp_bilinear(grid, nu[j].u, phi_x, phi_y)
        v = interp_bilinear(grid, nu[j].v, phi_x, phi_y)
        phi_x = phi_x + sign * dt * u
        phi_y = phi_y + sign * dt * v
    return VectorField2(grid, phi_x, phi_y)
