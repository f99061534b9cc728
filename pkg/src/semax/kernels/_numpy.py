"""Pure-numpy backend: the same contractions as matmul/einsum batches.

Kept dependency-free so the package still works where numba cannot
compile.  BLAS reduces in its own order, so agreement with the numba
backend is at rounding level, not bitwise.
"""

import numpy as np

NAME = "numpy"


def _pass1(u4, d):
    ur = u4 @ d.T
    us = np.einsum('jl,ekli->ekji', d, u4)
    ut = np.einsum('kl,elji->ekji', d, u4)
    return ur, us, ut


def _combine(g, ur, us, ut):
    g11, g12, g13, g22, g23, g33 = g
    shur = g11 * ur + g12 * us + g13 * ut
    shus = g12 * ur + g22 * us + g23 * ut
    shut = g13 * ur + g23 * us + g33 * ut
    return shur, shus, shut


def _pass2(shur, shus, shut, dt):
    w = shur @ dt.T
    w += np.einsum('jl,ekli->ekji', dt, shus)
    w += np.einsum('kl,elji->ekji', dt, shut)
    return w


def _run_ref(u4, g, d, dt):
    shur, shus, shut = _combine(g, *_pass1(u4, d))
    return _pass2(shur, shus, shut, dt)


def _run_unrolled(u4, g, d, dt, uf):
    # Strided partial contractions accumulated in ascending stride order,
    # mirroring the unrolled reduction tree within reassociation tolerance.
    ur = np.zeros_like(u4)
    us = np.zeros_like(u4)
    ut = np.zeros_like(u4)
    for m in range(uf):
        sl = slice(m, None, uf)
        ur += u4[..., sl] @ d[:, sl].T
        us += np.einsum('jl,ekli->ekji', d[:, sl], u4[:, :, sl, :])
        ut += np.einsum('kl,elji->ekji', d[:, sl], u4[:, sl, :, :])
    shur, shus, shut = _combine(g, ur, us, ut)
    w = np.zeros_like(u4)
    for m in range(uf):
        sl = slice(m, None, uf)
        w += shur[..., sl] @ dt[:, sl].T
        w += np.einsum('jl,ekli->ekji', dt[:, sl], shus[:, :, sl, :])
        w += np.einsum('kl,elji->ekji', dt[:, sl], shut[:, sl, :, :])
    return w


def apply(kind, uf, u, g_arrays, d, dt, ne, n):
    u4 = u.reshape(ne, n, n, n)
    g = tuple(a.reshape(ne, n, n, n) for a in g_arrays)
    if kind in ("reference", "buffered"):
        # Buffering is meaningless for vectorized numpy; same code path.
        w = _run_ref(u4, g, d, dt)
    elif kind == "unrolled":
        w = _run_unrolled(u4, g, d, dt, uf)
    else:
        raise ValueError(f"backend cannot run variant kind {kind!r}")
    return np.ascontiguousarray(w).reshape(-1)
