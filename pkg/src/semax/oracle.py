"""Brute-force verification path: explicit dense element matrices.

Forming A^e is exactly what the matrix-free operator exists to avoid, so
this module does it deliberately and only at small degree.  Two builders
are provided.  ``assemble_local`` probes the production kernel with
canonical basis vectors, which checks linearity and turns symmetry and
null-space tests into genuine statements about the kernel.
``assemble_local_quadrature`` re-derives the matrix from the bilinear form
with Kronecker-product gradient matrices and shares no code with the
kernel beyond the 1-D basis, breaking the circularity at N <= 3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import SpectralBasis
from .geometry import GeomFactors
from .kernels import ElementField, KernelVariant, ax_apply

_MAX_PROBE_DEGREE = 6
_MAX_QUAD_DEGREE = 3


class OracleError(ValueError):
    """Requested degree too large for dense assembly, or shape mismatch."""


@dataclass(frozen=True)
class LocalMatrix:
    """Dense (N+1)^3 x (N+1)^3 operator of one element."""

    degree: int
    element: int
    matrix: np.ndarray


def _slice_element(g: GeomFactors, e: int) -> GeomFactors:
    if not 0 <= e < g.elements:
        raise OracleError(f"element index {e} outside 0..{g.elements - 1}")
    n3 = (g.degree + 1) ** 3
    cut = slice(e * n3, (e + 1) * n3)
    return GeomFactors(degree=g.degree, elements=1,
                       g11=g.g11[cut], g12=g.g12[cut], g13=g.g13[cut],
                       g22=g.g22[cut], g23=g.g23[cut], g33=g.g33[cut])


def assemble_local(e: int, g: GeomFactors, basis: SpectralBasis,
                   backend: str | None = None) -> LocalMatrix:
    """Assemble A^e column by column through the reference kernel.

    Column m is the kernel's response to the m-th canonical basis vector.
    Guarded to N <= 6 (343^2 entries) to keep the dense matrix small.
    """
    if basis.degree > _MAX_PROBE_DEGREE:
        raise OracleError(
            f"dense probe assembly limited to N <= {_MAX_PROBE_DEGREE}, "
            f"got N={basis.degree}")
    if g.degree != basis.degree:
        raise OracleError(f"factor degree {g.degree} != basis degree {basis.degree}")
    one = _slice_element(g, e)
    n3 = basis.n_points ** 3
    ref = KernelVariant("reference")
    a = np.empty((n3, n3))
    probe = np.zeros(n3)
    for m in range(n3):
        probe[m] = 1.0
        u = ElementField(degree=basis.degree, elements=1, values=probe.copy())
        a[:, m] = ax_apply(ref, u, one, basis, backend=backend).values
        probe[m] = 0.0
    return LocalMatrix(degree=basis.degree, element=e, matrix=a)


def assemble_local_quadrature(e: int, g: GeomFactors,
                              basis: SpectralBasis) -> LocalMatrix:
    """Assemble A^e directly from the bilinear form, independent of the kernel.

    A[m, n] = sum_q grad(l_m)(xi_q) . G_q grad(l_n)(xi_q) with the
    quadrature weights already folded into G.  The nodal gradients are
    Kronecker products of the 1-D derivative matrix with identities.
    """
    if basis.degree > _MAX_QUAD_DEGREE:
        raise OracleError(
            f"quadrature assembly limited to N <= {_MAX_QUAD_DEGREE}, "
            f"got N={basis.degree}")
    one = _slice_element(g, e)
    n = basis.n_points
    eye = np.eye(n)
    d = basis.deriv
    # Row q of each matrix is the reference-direction gradient of all nodal
    # basis functions at node q; node order is k-major, i fastest.
    grads = (np.kron(eye, np.kron(eye, d)),   # d/dr (i axis)
             np.kron(eye, np.kron(d, eye)),   # d/ds (j axis)
             np.kron(d, np.kron(eye, eye)))   # d/dt (k axis)
    gmat = {(0, 0): one.g11, (0, 1): one.g12, (0, 2): one.g13,
            (1, 1): one.g22, (1, 2): one.g23, (2, 2): one.g33}
    a = np.zeros((n ** 3, n ** 3))
    for r in range(3):
        for s in range(3):
            grs = gmat[(r, s) if r <= s else (s, r)]
            a += grads[r].T @ (grs[:, None] * grads[s])
    return LocalMatrix(degree=basis.degree, element=e, matrix=a)


def dense_matvec(a: LocalMatrix, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (a.matrix.shape[1],):
        raise OracleError(
            f"vector shape {u.shape} does not match matrix "
            f"{a.matrix.shape}")
    return a.matrix @ u
