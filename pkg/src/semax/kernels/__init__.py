"""Matrix-free local Poisson operator and its optimization variants.

The operator maps a nodal field u to w = D^T G D u element by element:
pass 1 differentiates u along the three tensor axes and mixes the results
through the six metric factors, pass 2 applies the transposed derivative
contractions and sums.  Four variants share this contract:

``reference``
    Fixed ascending accumulation order, the bitwise-reproducible baseline.
``buffered``
    Stages one element's field and factors into contiguous scratch before
    contracting; identical arithmetic, different access pattern.
``unrolled(U)``
    Splits every length-(N+1) dot product into U strided partial sums,
    folded in ascending order at the end.  Requires U in {1, 2, 4, 8, 16}
    and (N+1) divisible by U, so the strides never straddle an element.
``padded(p)``
    Zero-embeds each element into (N+1+p)^3 so the padded size admits a
    larger unroll factor, runs unrolled at that size, and restricts the
    output.  Extra DOFs carry zero factors and never contribute.

Variants agree with the reference within 1e-13 relative (reassociation
only).  Two backends implement the contract: a numba one parallel over
elements and a vectorized numpy one, chosen by the SEMAX_BACKEND
environment variable (auto / numba / numpy) or per call.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import numpy as np

from ..basis import SpectralBasis
from ..geometry import GeomFactors

_VALID_UNROLL = (1, 2, 4, 8, 16)
_VARIANT_RE = re.compile(r"^(ref|reference|buffered|unroll(?:ed)?(\d+)|pad(?:ded)?(\d+))$")


class VariantError(ValueError):
    """Variant string malformed or constraints violated for this degree."""


@dataclass
class ElementField:
    """Element-major nodal field: flat array of length E*(N+1)^3.

    Within an element the lexicographic ijk order applies, i fastest, so
    ``view4d`` exposes the values as (E, k, j, i).
    """

    degree: int
    elements: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        want = self.elements * (self.degree + 1) ** 3
        if self.values.shape != (want,):
            raise ValueError(
                f"field for E={self.elements}, N={self.degree} needs shape "
                f"({want},), got {self.values.shape}")

    @property
    def view4d(self) -> np.ndarray:
        n = self.degree + 1
        return self.values.reshape(self.elements, n, n, n)

    def validate(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")


@dataclass(frozen=True)
class KernelVariant:
    """One of reference / buffered / unrolled(U) / padded(p)."""

    kind: str
    factor: int = 0  # U for unrolled, p for padded, unused otherwise

    def check(self, degree: int) -> None:
        n = degree + 1
        if self.kind in ("reference", "buffered"):
            return
        if self.kind == "unrolled":
            if self.factor not in _VALID_UNROLL:
                raise VariantError(
                    f"unroll factor must be one of {_VALID_UNROLL}, "
                    f"got {self.factor}")
            if n % self.factor:
                raise VariantError(
                    f"unroll factor {self.factor} does not divide N+1={n}")
            return
        if self.kind == "padded":
            if self.factor < 1:
                raise VariantError("padding amount must be >= 1")
            if largest_unroll(n + self.factor) <= largest_unroll(n):
                raise VariantError(
                    f"padding {n} -> {n + self.factor} points does not "
                    f"enable a larger unroll factor")
            return
        raise VariantError(f"unknown variant kind {self.kind!r}")

    def label(self) -> str:
        if self.kind == "unrolled":
            return f"unroll{self.factor}"
        if self.kind == "padded":
            return f"pad{self.factor}"
        return "ref" if self.kind == "reference" else self.kind


def parse_variant(text: str) -> KernelVariant:
    """Parse a CLI-style variant name: ref | buffered | unrollU | padP."""
    m = _VARIANT_RE.match(text.strip().lower())
    if not m:
        raise VariantError(
            f"cannot parse kernel variant {text!r} "
            "(expected ref, buffered, unrollU or padP)")
    if m.group(2) is not None:
        return KernelVariant("unrolled", int(m.group(2)))
    if m.group(3) is not None:
        return KernelVariant("padded", int(m.group(3)))
    return KernelVariant("buffered" if m.group(1) == "buffered" else "reference")


def largest_unroll(n_points: int) -> int:
    """Largest admissible unroll factor dividing the point count."""
    best = 1
    for u in _VALID_UNROLL:
        if n_points % u == 0:
            best = u
    return best


@dataclass
class OpCounters:
    """Exact operation and idealized-traffic tallies for Ax applications."""

    adds: int = 0
    mults: int = 0
    loads_bytes: int = 0
    writes_bytes: int = 0

    def charge(self, degree: int, elements: int) -> None:
        """Account one full application over E elements at this degree."""
        n = degree + 1
        dofs = elements * n ** 3
        self.adds += (6 * n + 6) * dofs
        self.mults += (6 * n + 9) * dofs
        loads, writes = ax_traffic(degree, elements)
        self.loads_bytes += loads
        self.writes_bytes += writes

    def merge(self, other: "OpCounters") -> None:
        self.adds += other.adds
        self.mults += other.mults
        self.loads_bytes += other.loads_bytes
        self.writes_bytes += other.writes_bytes

    @property
    def flops(self) -> int:
        return self.adds + self.mults


def ax_traffic(degree: int, elements: int) -> tuple[int, int]:
    """Idealized external traffic in bytes for one application.

    Seven double loads per DOF (six factors plus u, counting u once thanks
    to full intra-element reuse) and one double store of w.
    """
    if degree < 1 or elements < 1:
        raise ValueError(f"need degree >= 1 and elements >= 1, "
                         f"got N={degree}, E={elements}")
    dofs = elements * (degree + 1) ** 3
    return 7 * 8 * dofs, 8 * dofs


def pad_field(u: ElementField, g: GeomFactors, p: int) -> tuple[ElementField, GeomFactors]:
    """Zero-embed field and factors into (N+1+p)^3 elements.

    The extra slots get zero values and zero factors, so applying the
    operator at the padded size and restricting to the original block
    reproduces the unpadded result.
    """
    if p < 1:
        raise ValueError(f"padding amount must be >= 1, got {p}")
    if u.degree != g.degree or u.elements != g.elements:
        raise ValueError("field and factors disagree on degree or element count")
    n, e = u.degree + 1, u.elements
    n2 = n + p

    def embed(flat):
        out = np.zeros((e, n2, n2, n2))
        out[:, :n, :n, :n] = flat.reshape(e, n, n, n)
        return out.reshape(-1)

    pu = ElementField(degree=u.degree + p, elements=e, values=embed(u.values))
    pg = GeomFactors(degree=g.degree + p, elements=e,
                     g11=embed(g.g11), g12=embed(g.g12), g13=embed(g.g13),
                     g22=embed(g.g22), g23=embed(g.g23), g33=embed(g.g33))
    return pu, pg


def pad_deriv(deriv: np.ndarray, p: int) -> np.ndarray:
    """Derivative matrix zero-extended into the padded point count."""
    n = deriv.shape[0]
    out = np.zeros((n + p, n + p))
    out[:n, :n] = deriv
    return out


def ax_apply(variant: KernelVariant, u: ElementField, g: GeomFactors,
             basis: SpectralBasis, counters: OpCounters | None = None,
             backend: str | None = None) -> ElementField:
    """Apply the local operator to every element, returning w.

    ``counters``, when given, is charged with the exact add/mult/traffic
    totals of the work actually performed (padded variants charge at the
    padded size).  ``backend`` overrides the SEMAX_BACKEND selection for
    this call.
    """
    if not (u.degree == g.degree == basis.degree):
        raise ValueError(
            f"degree mismatch: field N={u.degree}, factors N={g.degree}, "
            f"basis N={basis.degree}")
    if u.elements != g.elements:
        raise ValueError(
            f"element count mismatch: field E={u.elements}, "
            f"factors E={g.elements}")
    variant.check(u.degree)

    impl = _resolve_backend(backend)
    n = basis.n_points

    if variant.kind == "padded":
        p = variant.factor
        pu, pg = pad_field(u, g, p)
        pd = pad_deriv(basis.deriv, p)
        uf = largest_unroll(n + p)
        w_flat = impl.apply("unrolled", uf, pu.values, pg.arrays(),
                            pd, pd.T.copy(), u.elements, n + p)
        w4 = w_flat.reshape(u.elements, n + p, n + p, n + p)
        out = np.ascontiguousarray(w4[:, :n, :n, :n]).reshape(-1)
        if counters is not None:
            counters.charge(u.degree + p, u.elements)
    else:
        out = impl.apply(variant.kind, variant.factor or 1, u.values,
                         g.arrays(), basis.deriv, basis.deriv_t,
                         u.elements, n)
        if counters is not None:
            counters.charge(u.degree, u.elements)
    return ElementField(degree=u.degree, elements=u.elements, values=out)


_numba_mod = None
_numba_failed = False


def _resolve_backend(name: str | None):
    global _numba_mod, _numba_failed
    name = name or os.environ.get("SEMAX_BACKEND", "auto")
    if name not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {name!r} "
                         "(expected auto, numba or numpy)")
    if name == "numpy":
        from . import _numpy
        return _numpy
    if _numba_mod is None and not _numba_failed:
        try:
            from . import _numba
            _numba_mod = _numba
        except ImportError:
            _numba_failed = True
    if _numba_mod is not None:
        return _numba_mod
    if name == "numba":
        raise RuntimeError("numba backend requested but numba is not importable")
    from . import _numpy
    return _numpy


def active_backend(name: str | None = None) -> str:
    """Name of the backend a call with this selection would actually use."""
    return _resolve_backend(name).NAME
