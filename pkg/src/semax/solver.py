"""Direct-stiffness connectivity and an unpreconditioned CG Poisson solve.

The solve runs on the global DOF space of a structured box mesh: local
element fields are related to global vectors by a gather (summation of
shared copies) and a scatter (duplication), homogeneous Dirichlet
conditions are imposed by zeroing boundary rows, and the operator inside
CG is gather(Ax(scatter(x))) followed by the mask.  Shared-DOF sums
accumulate in ascending element order, so repeated runs are bitwise
reproducible for a fixed backend.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import SpectralBasis
from .geometry import BoxMesh, build_geom_factors, build_mass_diag, node_coords
from .kernels import ElementField, KernelVariant, OpCounters, ax_apply

_RHS_CHUNK = 512


class SolverError(RuntimeError):
    """Breakdown inside CG (non-finite values or indefinite operator)."""


@dataclass(frozen=True)
class GatherScatterMap:
    """Local-to-global DOF map for a structured box mesh.

    ``local_to_global`` has one entry per local DOF in element-major
    order; ``multiplicity`` counts the local copies of each global DOF
    and ``boundary`` flags global DOFs on the domain boundary.
    """

    degree: int
    extents: tuple[int, int, int]
    n_global: int
    local_to_global: np.ndarray
    multiplicity: np.ndarray
    boundary: np.ndarray

    def scatter(self, xg: np.ndarray) -> np.ndarray:
        return xg[self.local_to_global]

    def gather(self, local: np.ndarray) -> np.ndarray:
        # bincount walks the local array in order, so shared copies are
        # summed by ascending element id: deterministic.
        return np.bincount(self.local_to_global, weights=local,
                           minlength=self.n_global)

    def mask(self, xg: np.ndarray) -> np.ndarray:
        out = xg.copy()
        out[self.boundary] = 0.0
        return out


def build_gs_map(mesh: BoxMesh, degree: int) -> GatherScatterMap:
    """Global numbering with conforming faces: (Ex N+1)(Ey N+1)(Ez N+1) DOFs."""
    ex, ey, ez = mesh.extents
    n = degree + 1
    gx_n, gy_n, gz_n = ex * degree + 1, ey * degree + 1, ez * degree + 1

    ids = np.arange(mesh.n_elements)
    kz, jy, ix = np.unravel_index(ids, (ez, ey, ex))
    loc = np.arange(n)
    gx = ix[:, None, None, None] * degree + loc[None, None, None, :]
    gy = jy[:, None, None, None] * degree + loc[None, None, :, None]
    gz = kz[:, None, None, None] * degree + loc[None, :, None, None]
    l2g = ((gz * gy_n + gy) * gx_n + gx).reshape(-1)

    n_global = gx_n * gy_n * gz_n
    mult = np.bincount(l2g, minlength=n_global).astype(np.float64)

    bx = np.zeros(gx_n, dtype=bool)
    bx[[0, -1]] = True
    by = np.zeros(gy_n, dtype=bool)
    by[[0, -1]] = True
    bz = np.zeros(gz_n, dtype=bool)
    bz[[0, -1]] = True
    boundary = (bz[:, None, None] | by[None, :, None]
                | bx[None, None, :]).reshape(-1)

    return GatherScatterMap(degree=degree, extents=mesh.extents,
                            n_global=n_global, local_to_global=l2g,
                            multiplicity=mult, boundary=boundary)


def gather_scatter(gs: GatherScatterMap, local: np.ndarray) -> np.ndarray:
    """Replace every local copy of a shared DOF by the sum over all copies."""
    local = np.asarray(local, dtype=np.float64)
    if local.shape != gs.local_to_global.shape:
        raise ValueError(f"local field shape {local.shape} does not match "
                         f"map ({gs.local_to_global.shape})")
    return gs.scatter(gs.gather(local))


def conjugate_gradient(apply_op, b, tol, max_iters):
    """Plain CG from a zero start; returns (x, iters, residual history).

    ``apply_op`` must be SPD on the subspace containing b.  Residual
    history holds the 2-norms ||r_0||..||r_k||.  Raises SolverError on
    non-finite values or a nonpositive curvature p.Ap.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    x = np.zeros_like(b)
    r = b.copy()
    rho = float(r @ r)
    history = [math.sqrt(rho)]
    if history[0] == 0.0:
        return x, 0, history
    target = tol * history[0]
    p = r.copy()
    for k in range(1, max_iters + 1):
        q = apply_op(p)
        curv = float(p @ q)
        if not np.isfinite(curv):
            raise SolverError(f"non-finite curvature at iteration {k}")
        if curv <= 0.0:
            raise SolverError(
                f"operator not positive definite: p.Ap = {curv:.3e} "
                f"at iteration {k}")
        alpha = rho / curv
        x += alpha * p
        r -= alpha * q
        rho_next = float(r @ r)
        if not np.isfinite(rho_next):
            raise SolverError(f"non-finite residual at iteration {k}")
        history.append(math.sqrt(rho_next))
        if history[-1] <= target:
            return x, k, history
        p = r + (rho_next / rho) * p
        rho = rho_next
    return x, max_iters, history


@dataclass
class CGResult:
    solution: np.ndarray
    iterations: int
    residuals: list[float]
    converged: bool
    gs: GatherScatterMap
    counters: OpCounters = field(default_factory=OpCounters)
    ax_seconds: float = 0.0

    @property
    def ax_gflops(self) -> float:
        if self.ax_seconds <= 0.0:
            return 0.0
        return self.counters.flops / self.ax_seconds / 1e9


def cg_solve(mesh: BoxMesh, basis: SpectralBasis, rhs, tol: float = 1e-8,
             max_iters: int = 1000, variant: KernelVariant | None = None,
             backend: str | None = None) -> CGResult:
    """Solve the Poisson problem -div(grad u) = rhs with zero Dirichlet walls.

    ``rhs`` is a callable taking an (..., 3) coordinate array and
    returning point values of the forcing.  The right-hand side is
    rhs * diagonal mass, gathered and masked; the returned solution is a
    global DOF vector (use the embedded map to scatter it onto elements).
    """
    variant = variant or KernelVariant("reference")
    gs = build_gs_map(mesh, basis.degree)
    geom = build_geom_factors(mesh, basis)
    mass = build_mass_diag(mesh, basis)

    n3 = basis.n_points ** 3
    b_local = np.empty(mesh.n_elements * n3)
    for start in range(0, mesh.n_elements, _RHS_CHUNK):
        stop = min(start + _RHS_CHUNK, mesh.n_elements)
        coords = node_coords(mesh, basis, slice(start, stop))
        b_local[start * n3:stop * n3] = np.asarray(rhs(coords)).reshape(-1)
    b_local *= mass
    b = gs.mask(gs.gather(b_local))

    counters = OpCounters()
    timing = [0.0]

    def apply_op(xg):
        u = ElementField(degree=basis.degree, elements=mesh.n_elements,
                         values=gs.scatter(xg))
        t0 = time.perf_counter()
        w = ax_apply(variant, u, geom, basis, counters, backend=backend)
        timing[0] += time.perf_counter() - t0
        return gs.mask(gs.gather(w.values))

    x, iters, history = conjugate_gradient(apply_op, b, tol, max_iters)
    converged = history[-1] <= tol * history[0]
    return CGResult(solution=x, iterations=iters, residuals=history,
                    converged=converged, gs=gs, counters=counters,
                    ax_seconds=timing[0])


def manufactured_solution(coords: np.ndarray) -> np.ndarray:
    """sin(pi x) sin(pi y) sin(pi z): analytic, zero on the unit-cube walls."""
    return (np.sin(np.pi * coords[..., 0]) * np.sin(np.pi * coords[..., 1])
            * np.sin(np.pi * coords[..., 2]))


def manufactured_rhs(coords: np.ndarray) -> np.ndarray:
    """Forcing whose exact Poisson solution is :func:`manufactured_solution`."""
    return 3.0 * np.pi ** 2 * manufactured_solution(coords)


def solve_manufactured(mesh: BoxMesh, basis: SpectralBasis, tol: float = 1e-10,
                       max_iters: int = 2000,
                       variant: KernelVariant | None = None,
                       backend: str | None = None) -> tuple[CGResult, float]:
    """Run the manufactured problem and report the max nodal error."""
    res = cg_solve(mesh, basis, manufactured_rhs, tol=tol,
                   max_iters=max_iters, variant=variant, backend=backend)
    exact = manufactured_solution(node_coords(mesh, basis)).reshape(-1)
    err = float(np.max(np.abs(res.gs.scatter(res.solution) - exact)))
    return res, err
