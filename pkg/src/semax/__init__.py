"""semax: spectral-element Poisson kernels, solver driver and hardware model.

The package splits into five layers:

- :mod:`semax.basis` and :mod:`semax.geometry` build the 1-D GLL
  machinery and the per-element metric factors;
- :mod:`semax.kernels` applies the matrix-free operator in several
  variants over two backends;
- :mod:`semax.oracle` checks the kernels against dense assembly;
- :mod:`semax.solver` runs gather-scatter CG on a box mesh;
- :mod:`semax.perfmodel` and :mod:`semax.bench` project performance on
  described hardware and measure it on this host.
"""

from .basis import BasisConstructionError, SpectralBasis, build_basis, legendre
from .bench import BenchRecord, run_sweep
from .geometry import (BoxMesh, GeometryError, GeomFactors, build_box_mesh,
                       build_geom_factors, build_mass_diag, node_coords)
from .kernels import (ElementField, KernelVariant, OpCounters, VariantError,
                      active_backend, ax_apply, ax_traffic, largest_unroll,
                      pad_deriv, pad_field, parse_variant)
from .oracle import (LocalMatrix, OracleError, assemble_local,
                     assemble_local_quadrature, dense_matvec)
from .perfmodel import (DeviceFileError, DeviceSpec, InfeasibleConfigError,
                        ModelReport, bandwidth_throughput, constrain_throughput,
                        cost, flops_per_dof, intensity, list_devices,
                        load_device, load_measured, model_error, padding_gain,
                        peak_performance, resource_throughput)
from .solver import (CGResult, GatherScatterMap, SolverError, build_gs_map,
                     cg_solve, conjugate_gradient, gather_scatter,
                     manufactured_rhs, manufactured_solution,
                     solve_manufactured)

__version__ = "0.1.0"
