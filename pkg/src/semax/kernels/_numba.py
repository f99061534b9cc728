"""Numba backend: compiled kernels, parallel over elements.

Elements are independent, so prange partitioning is safe and the result
is bit-identical for any thread count: every element is reduced in the
same scalar order regardless of which thread runs it.
"""

import numpy as np
from numba import njit, prange

NAME = "numba"


@njit(cache=True, parallel=True)
def _ref(w, u, g11, g12, g13, g22, g23, g33, d, dt, ne, n):
    nsq = n * n
    for e in prange(ne):
        base = e * n * nsq
        shur = np.empty((n, n, n))
        shus = np.empty((n, n, n))
        shut = np.empty((n, n, n))
        for k in range(n):
            for j in range(n):
                for i in range(n):
                    ar = 0.0
                    as_ = 0.0
                    at = 0.0
                    for l in range(n):
                        ar += d[i, l] * u[base + k * nsq + j * n + l]
                        as_ += d[j, l] * u[base + k * nsq + l * n + i]
                        at += d[k, l] * u[base + l * nsq + j * n + i]
                    q = base + k * nsq + j * n + i
                    shur[k, j, i] = g11[q] * ar + g12[q] * as_ + g13[q] * at
                    shus[k, j, i] = g12[q] * ar + g22[q] * as_ + g23[q] * at
                    shut[k, j, i] = g13[q] * ar + g23[q] * as_ + g33[q] * at
        for k in range(n):
            for j in range(n):
                for i in range(n):
                    acc = 0.0
                    for l in range(n):
                        acc += dt[i, l] * shur[k, j, l]
                    for l in range(n):
                        acc += dt[j, l] * shus[k, l, i]
                    for l in range(n):
                        acc += dt[k, l] * shut[l, j, i]
                    w[base + k * nsq + j * n + i] = acc


@njit(cache=True, parallel=True)
def _buffered(w, u, g11, g12, g13, g22, g23, g33, d, dt, ne, n):
    # Same arithmetic as _ref, but one element's inputs are first copied
    # into contiguous scratch blocks and all contractions read from those.
    nsq = n * n
    for e in prange(ne):
        base = e * n * nsq
        ub = np.empty((n, n, n))
        f11 = np.empty((n, n, n))
        f12 = np.empty((n, n, n))
        f13 = np.empty((n, n, n))
        f22 = np.empty((n, n, n))
        f23 = np.empty((n, n, n))
        f33 = np.empty((n, n, n))
        for k in range(n):
            for j in range(n):
                for i in range(n):
                    q = base + k * nsq + j * n + i
                    ub[k, j, i] = u[q]
                    f11[k, j, i] = g11[q]
                    f12[k, j, i] = g12[q]
                    f13[k, j, i] = g13[q]
                    f22[k, j, i] = g22[q]
                    f23[k, j, i] = g23[q]
                    f33[k, j, i] = g33[q]
        shur = np.empty((n, n, n))
        shus = np.empty((n, n, n))
        shut = np.empty((n, n, n))
        for k in range(n):
            for j in range(n):
                for i in range(n):
                    ar = 0.0
                    as_ = 0.0
                    at = 0.0
                    for l in range(n):
                        ar += d[i, l] * ub[k, j, l]
                        as_ += d[j, l] * ub[k, l, i]
                        at += d[k, l] * ub[l, j, i]
                    shur[k, j, i] = f11[k, j, i] * ar + f12[k, j, i] * as_ + f13[k, j, i] * at
                    shus[k, j, i] = f12[k, j, i] * ar + f22[k, j, i] * as_ + f23[k, j, i] * at
                    shut[k, j, i] = f13[k, j, i] * ar + f23[k, j, i] * as_ + f33[k, j, i] * at
        for k in range(n):
            for j in range(n):
                for i in range(n):
                    acc = 0.0
                    for l in range(n):
                        acc += dt[i, l] * shur[k, j, l]
                    for l in range(n):
                        acc += dt[j, l] * shus[k, l, i]
                    for l in range(n):
                        acc += dt[k, l] * shut[l, j, i]
                    w[base + k * nsq + j * n + i] = acc


@njit(cache=True, parallel=True)
def _unrolled(w, u, g11, g12, g13, g22, g23, g33, d, dt, ne, n, uf):
    # Dot products over l run as uf strided partial sums, folded ascending.
    nsq = n * n
    for e in prange(ne):
        base = e * n * nsq
        shur = np.empty((n, n, n))
        shus = np.empty((n, n, n))
        shut = np.empty((n, n, n))
        pr = np.empty(uf)
        ps = np.empty(uf)
        pt = np.empty(uf)
        for k in range(n):
            for j in range(n):
                for i in range(n):
                    for m in range(uf):
                        pr[m] = 0.0
                        ps[m] = 0.0
                        pt[m] = 0.0
                    for l0 in range(0, n, uf):
                        for m in range(uf):
                            l = l0 + m
                            pr[m] += d[i, l] * u[base + k * nsq + j * n + l]
                            ps[m] += d[j, l] * u[base + k * nsq + l * n + i]
                            pt[m] += d[k, l] * u[base + l * nsq + j * n + i]
                    ar = 0.0
                    as_ = 0.0
                    at = 0.0
                    for m in range(uf):
                        ar += pr[m]
                        as_ += ps[m]
                        at += pt[m]
                    q = base + k * nsq + j * n + i
                    shur[k, j, i] = g11[q] * ar + g12[q] * as_ + g13[q] * at
                    shus[k, j, i] = g12[q] * ar + g22[q] * as_ + g23[q] * at
                    shut[k, j, i] = g13[q] * ar + g23[q] * as_ + g33[q] * at
        for k in range(n):
            for j in range(n):
                for i in range(n):
                    for m in range(uf):
                        pr[m] = 0.0
                    for l0 in range(0, n, uf):
                        for m in range(uf):
                            l = l0 + m
                            pr[m] += (dt[i, l] * shur[k, j, l]
                                      + dt[j, l] * shus[k, l, i]
                                      + dt[k, l] * shut[l, j, i])
                    acc = 0.0
                    for m in range(uf):
                        acc += pr[m]
                    w[base + k * nsq + j * n + i] = acc


def apply(kind, uf, u, g_arrays, d, dt, ne, n):
    w = np.empty_like(u)
    d = np.ascontiguousarray(d)
    dt = np.ascontiguousarray(dt)
    g11, g12, g13, g22, g23, g33 = g_arrays
    if kind == "reference":
        _ref(w, u, g11, g12, g13, g22, g23, g33, d, dt, ne, n)
    elif kind == "buffered":
        _buffered(w, u, g11, g12, g13, g22, g23, g33, d, dt, ne, n)
    elif kind == "unrolled":
        _unrolled(w, u, g11, g12, g13, g22, g23, g33, d, dt, ne, n, uf)
    else:
        raise ValueError(f"backend cannot run variant kind {kind!r}")
    return w
