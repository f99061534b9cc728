import numpy as np
import pytest

import semax
from semax.kernels import KernelVariant


@pytest.fixture(scope="session", autouse=True)
def warm_numba():
    """Compile every numba kernel once so timed tests measure math, not JIT."""
    basis = semax.build_basis(1)
    mesh = semax.build_box_mesh((1, 1, 1))
    geom = semax.build_geom_factors(mesh, basis)
    u = semax.ElementField(degree=1, elements=1, values=np.ones(8))
    try:
        for variant in (KernelVariant("reference"), KernelVariant("buffered"),
                        KernelVariant("unrolled", 2)):
            semax.ax_apply(variant, u, geom, basis, backend="numba")
    except RuntimeError:
        pass  # no numba on this host; numpy fallback needs no warm-up


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


def random_setup(degree, extents, alpha, seed=0):
    """Shared helper: basis, mesh, factors and a random field."""
    basis = semax.build_basis(degree)
    mesh = semax.build_box_mesh(extents, alpha=alpha)
    geom = semax.build_geom_factors(mesh, basis)
    gen = np.random.default_rng(seed)
    values = gen.standard_normal(mesh.n_elements * basis.n_points ** 3)
    field = semax.ElementField(degree=degree, elements=mesh.n_elements,
                               values=values)
    return basis, mesh, geom, field
