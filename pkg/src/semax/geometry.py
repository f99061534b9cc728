"""Hexahedral box meshes and per-node geometric factors.

A mesh is a structured partition of an axis-aligned box into Ex*Ey*Ez
elements, optionally deformed by a smooth sinusoidal perturbation of the
node coordinates.  The geometric factors are the six unique entries of the
symmetric metric tensor w * |J| * (dr/dx)(dr/dx)^T evaluated at every GLL
node, with the quadrature weight w = rho_i rho_j rho_k folded in.  They are
stored as six separate element-major arrays, which is also the layout the
kernels consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import SpectralBasis

# Elements processed per block when building factors, to bound peak memory
# (the 3x3 Jacobians are the dominant intermediate).
_CHUNK = 512


class GeometryError(ValueError):
    """Invalid mesh parameters or a degenerate element mapping."""


@dataclass(frozen=True)
class BoxMesh:
    """Structured mesh of hexahedra over an axis-aligned box.

    ``extents`` are the element counts per direction, ``origin``/``lengths``
    define the physical box, and ``alpha`` in [0, 0.2) controls the optional
    smooth deformation (0 keeps every element a perfect brick).
    """

    extents: tuple[int, int, int]
    origin: tuple[float, float, float]
    lengths: tuple[float, float, float]
    alpha: float = 0.0

    @property
    def n_elements(self) -> int:
        ex, ey, ez = self.extents
        return ex * ey * ez


@dataclass(frozen=True)
class GeomFactors:
    """Six metric-factor arrays, each of length E*(N+1)^3, element-major."""

    degree: int
    elements: int
    g11: np.ndarray
    g12: np.ndarray
    g13: np.ndarray
    g22: np.ndarray
    g23: np.ndarray
    g33: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.g11, self.g12, self.g13, self.g22, self.g23, self.g33)

    def stacked(self) -> np.ndarray:
        """View the six factors as one (6, E, n, n, n) array."""
        n = self.degree + 1
        return np.stack([a.reshape(self.elements, n, n, n)
                         for a in self.arrays()])


def build_box_mesh(extents, origin=(0.0, 0.0, 0.0), lengths=(1.0, 1.0, 1.0),
                   alpha: float = 0.0) -> BoxMesh:
    """Validate parameters and construct a :class:`BoxMesh`."""
    extents = tuple(int(e) for e in extents)
    if len(extents) != 3 or any(e < 1 for e in extents):
        raise GeometryError(f"element counts must be >= 1, got {extents}")
    origin = tuple(float(v) for v in origin)
    lengths = tuple(float(v) for v in lengths)
    if any(l <= 0 for l in lengths):
        raise GeometryError(f"box lengths must be positive, got {lengths}")
    if not 0.0 <= alpha < 0.2:
        raise GeometryError(f"deformation alpha must be in [0, 0.2), got {alpha}")
    return BoxMesh(extents=extents, origin=origin, lengths=lengths, alpha=alpha)


def element_corners(mesh: BoxMesh) -> np.ndarray:
    """Undeformed trilinear corner coordinates, shape (E, 2, 2, 2, 3).

    Corner index order matches the node order: i (x) fastest, then j, k.
    """
    ex, ey, ez = mesh.extents
    hx, hy, hz = (l / e for l, e in zip(mesh.lengths, mesh.extents))
    corners = np.empty((ez, ey, ex, 2, 2, 2, 3))
    cz = mesh.origin[2] + hz * np.arange(ez + 1)
    cy = mesh.origin[1] + hy * np.arange(ey + 1)
    cx = mesh.origin[0] + hx * np.arange(ex + 1)
    for dk in range(2):
        for dj in range(2):
            for di in range(2):
                corners[..., dk, dj, di, 0] = cx[di:ex + di][None, None, :]
                corners[..., dk, dj, di, 1] = cy[dj:ey + dj][None, :, None]
                corners[..., dk, dj, di, 2] = cz[dk:ez + dk][:, None, None]
    return corners.reshape(mesh.n_elements, 2, 2, 2, 3)


def _deform(mesh: BoxMesh, coords: np.ndarray) -> np.ndarray:
    """Apply the smooth in-place-invertible perturbation to node coordinates.

    Each coordinate is shifted by alpha * L_d/pi times a product-of-sines
    bump that vanishes on the box boundary; for alpha < 0.2 the perturbed
    Jacobian stays strictly diagonally dominant, hence positive.
    """
    if mesh.alpha == 0.0:
        return coords
    hat = (coords - np.asarray(mesh.origin)) / np.asarray(mesh.lengths)
    bump = np.sin(np.pi * hat[..., 0]) * np.sin(np.pi * hat[..., 1]) \
        * np.sin(np.pi * hat[..., 2])
    return coords + mesh.alpha / np.pi * np.asarray(mesh.lengths) * bump[..., None]


def node_coords(mesh: BoxMesh, basis: SpectralBasis,
                elements: slice | None = None) -> np.ndarray:
    """Physical coordinates of every GLL node, shape (E, n, n, n, 3).

    Axis order is (element, k, j, i, xyz) so that the i index is fastest
    when flattened, matching the element-major field layout.  ``elements``
    restricts the result to a slice of element ids.
    """
    ex, ey, ez = mesh.extents
    n = basis.n_points
    ref = 0.5 * (basis.points + 1.0)  # GLL nodes mapped to [0, 1]
    hx, hy, hz = (l / e for l, e in zip(mesh.lengths, mesh.extents))

    ids = np.arange(mesh.n_elements)[elements if elements is not None else slice(None)]
    kz, jy, ix = np.unravel_index(ids, (ez, ey, ex))  # element grid position
    coords = np.empty((len(ids), n, n, n, 3))
    coords[..., 0] = mesh.origin[0] + hx * (ix[:, None, None, None]
                                            + ref[None, None, None, :])
    coords[..., 1] = mesh.origin[1] + hy * (jy[:, None, None, None]
                                            + ref[None, None, :, None])
    coords[..., 2] = mesh.origin[2] + hz * (kz[:, None, None, None]
                                            + ref[None, :, None, None])
    return _deform(mesh, coords)


def _metric_chunk(coords: np.ndarray, basis: SpectralBasis):
    """Jacobian determinant and inverse Jacobian for one coordinate chunk."""
    d = basis.deriv
    # dx/dr by differencing the isoparametric map along each tensor axis.
    f = np.empty(coords.shape[:-1] + (3, 3))
    f[..., 0] = np.einsum('il,ekjla->ekjia', d, coords)  # d/d xi
    f[..., 1] = np.einsum('jl,eklia->ekjia', d, coords)  # d/d eta
    f[..., 2] = np.einsum('kl,eljia->ekjia', d, coords)  # d/d gamma
    jac = np.linalg.det(f)
    return jac, f


def build_geom_factors(mesh: BoxMesh, basis: SpectralBasis) -> GeomFactors:
    """Compute the six metric-factor arrays for every node of every element.

    Raises
    ------
    GeometryError
        If any element has a non-positive Jacobian determinant.
    """
    n = basis.n_points
    e_total = mesh.n_elements
    w3 = (basis.weights[:, None, None] * basis.weights[None, :, None]
          * basis.weights[None, None, :])  # indexed [k, j, i]
    out = [np.empty(e_total * n**3) for _ in range(6)]

    for start in range(0, e_total, _CHUNK):
        stop = min(start + _CHUNK, e_total)
        coords = node_coords(mesh, basis, slice(start, stop))
        jac, f = _metric_chunk(coords, basis)
        if np.any(jac <= 0.0):
            bad = start + int(np.argwhere(np.any(
                jac.reshape(stop - start, -1) <= 0.0, axis=1))[0, 0])
            raise GeometryError(
                f"non-positive Jacobian in element {bad} "
                f"(min det {jac.min():.3e})")
        rx = np.linalg.inv(f)  # rx[..., r, m] = dr_r / dx_m
        scale = w3[None] * jac
        gmat = np.einsum('...rm,...sm->...rs', rx, rx)
        flat = slice(start * n**3, stop * n**3)
        for dst, (r, s) in zip(out, ((0, 0), (0, 1), (0, 2),
                                     (1, 1), (1, 2), (2, 2))):
            dst[flat] = (scale * gmat[..., r, s]).ravel()

    g11, g12, g13, g22, g23, g33 = out
    return GeomFactors(degree=basis.degree, elements=e_total,
                       g11=g11, g12=g12, g13=g13,
                       g22=g22, g23=g23, g33=g33)


def build_mass_diag(mesh: BoxMesh, basis: SpectralBasis) -> np.ndarray:
    """Diagonal GLL mass matrix w*|J| per node, length E*(N+1)^3.

    Summing the result over all nodes gives the mesh volume (quadrature
    consistency).
    """
    n = basis.n_points
    e_total = mesh.n_elements
    w3 = (basis.weights[:, None, None] * basis.weights[None, :, None]
          * basis.weights[None, None, :])
    mass = np.empty(e_total * n**3)
    for start in range(0, e_total, _CHUNK):
        stop = min(start + _CHUNK, e_total)
        coords = node_coords(mesh, basis, slice(start, stop))
        jac, _ = _metric_chunk(coords, basis)
        mass[start * n**3:stop * n**3] = (w3[None] * jac).ravel()
    return mass
