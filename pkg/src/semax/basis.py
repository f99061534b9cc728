"""One-dimensional spectral machinery on Gauss-Lobatto-Legendre (GLL) nodes.

Provides Legendre polynomial evaluation, the GLL quadrature rule (nodes and
weights) and the nodal derivative matrix for a given polynomial degree.  The
three-dimensional operators elsewhere in the package are tensor products of
this one-dimensional basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Newton solve for the interior GLL nodes (roots of L'_N).
_NEWTON_TOL = 1e-14
_NEWTON_MAX_ITERS = 100


class BasisConstructionError(RuntimeError):
    """Root finding failed to converge; indicates a defect, not bad input."""


@dataclass(frozen=True)
class SpectralBasis:
    """Degree-N GLL basis: nodes, quadrature weights and derivative matrix.

    Attributes
    ----------
    degree : int
        Polynomial degree N; the rule has N+1 nodes.
    points : (N+1,) ndarray
        GLL nodes in [-1, 1], strictly increasing, symmetric about 0.
    weights : (N+1,) ndarray
        Positive quadrature weights summing to 2.
    deriv : (N+1, N+1) ndarray
        Nodal derivative matrix D with D[i, j] = l'_j(x_i) for the Lagrange
        cardinal functions l_j on the nodes.
    deriv_t : (N+1, N+1) ndarray
        Transpose of ``deriv``.
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray
    deriv: np.ndarray
    deriv_t: np.ndarray

    @property
    def n_points(self) -> int:
        return self.degree + 1


def legendre(n: int, x: float) -> tuple[float, float]:
    """Evaluate the Legendre polynomial L_n and its derivative at ``x``.

    Uses the three-term recurrence for the values and the derivative
    recurrence L'_k = L'_{k-2} + (2k-1) L_{k-1}, which stays exact at the
    endpoints x = +-1.

    Parameters
    ----------
    n : int
        Polynomial order, n >= 0.
    x : float
        Evaluation point in [-1, 1].

    Returns
    -------
    (float, float)
        L_n(x) and L'_n(x).
    """
    if n < 0:
        raise ValueError(f"Legendre order must be non-negative, got {n}")
    if not -1.0 <= x <= 1.0:
        raise ValueError(f"evaluation point {x} outside [-1, 1]")
    if n == 0:
        return 1.0, 0.0
    pm1, p = 1.0, x          # L_0, L_1
    dm1, d = 0.0, 1.0        # L'_0, L'_1
    for k in range(2, n + 1):
        pm1, p = p, ((2 * k - 1) * x * p - (k - 1) * pm1) / k
        dm1, d = d, dm1 + (2 * k - 1) * pm1
    return p, d


def _gll_points(n: int) -> np.ndarray:
    """Nodes of the (n+1)-point GLL rule: roots of (1 - x^2) L'_n(x)."""
    pts = np.empty(n + 1)
    pts[0], pts[n] = -1.0, 1.0
    if n == 1:
        return pts
    # Newton on L'_n for the interior nodes, seeded with the
    # Chebyshev-Lobatto points cos(pi*i/n) (descending, hence the flip).
    for i in range(1, n):
        x = np.cos(np.pi * i / n)
        converged = False
        for _ in range(_NEWTON_MAX_ITERS):
            ln, dln = legendre(n, x)
            # L''_n from the Legendre ODE: (1-x^2) L'' = 2x L' - n(n+1) L
            d2ln = (2.0 * x * dln - n * (n + 1) * ln) / (1.0 - x * x)
            step = dln / d2ln
            x -= step
            if abs(step) < _NEWTON_TOL:
                converged = True
                break
        if not converged:
            raise BasisConstructionError(
                f"GLL node {i} for degree {n} did not converge"
            )
        pts[n - i] = x
    # Kill asymmetric round-off so x_i = -x_{n-i} holds exactly.
    pts = 0.5 * (pts - pts[::-1])
    residual = max(abs(legendre(n, float(x))[1]) for x in pts[1:-1])
    # Scale-aware residual check: L'_n grows like n(n+1)/2 near the ends.
    if residual > 1e-10 * n * (n + 1):
        raise BasisConstructionError(
            f"GLL nodes for degree {n} have residual {residual:.3e}"
        )
    return pts


def build_basis(degree: int) -> SpectralBasis:
    """Construct the GLL basis of the given polynomial degree.

    Parameters
    ----------
    degree : int
        Polynomial degree N, 1 <= N <= 31.

    Returns
    -------
    SpectralBasis
        Immutable basis with nodes, weights and derivative matrix.
    """
    if not 1 <= degree <= 31:
        raise ValueError(f"degree must be in [1, 31], got {degree}")
    n = degree
    pts = _gll_points(n)

    ln_at = np.array([legendre(n, float(x))[0] for x in pts])
    weights = 2.0 / (n * (n + 1) * ln_at**2)

    # Closed-form nodal differentiation matrix; avoids the cancellation of
    # differentiating the Lagrange product form directly.
    d = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(n + 1):
            if i != j:
                d[i, j] = ln_at[i] / (ln_at[j] * (pts[i] - pts[j]))
    d[0, 0] = -n * (n + 1) / 4.0
    d[n, n] = n * (n + 1) / 4.0

    for arr in (pts, weights, d):
        arr.setflags(write=False)
    dt = d.T  # view of the read-only array
    return SpectralBasis(degree=degree, points=pts, weights=weights,
                         deriv=d, deriv_t=dt)
