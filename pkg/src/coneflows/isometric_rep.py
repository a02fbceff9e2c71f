"""Isometric representations of a discrete cone by shifts.

Vectors are finitely supported functions on modes ``(site, channel)``; shifts
relabel sites, so every identity here holds exactly rather than to a
tolerance.  Kernel bases that are infinite in the continuum (for instance the
boundary strips of an orthant) are enumerated inside a :class:`Window` and
flagged ``exact=False``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cone_lattice import ConeSpec, LatticeModule, Point, Window, add, cone_points, sub
from .linalg_core import DEFAULT_TOL, Subspace, Tolerances, canonical_basis, kernel_of_adjoint, orthonormalize

Mode = tuple[Point, int]


class SparseVec(Mapping):
    """Finitely supported complex function on modes; zero amplitudes are dropped."""

    __slots__ = ("_data",)
    # keep numpy scalars from treating the mapping as an array on ``s * f``
    __array_ufunc__ = None

    def __init__(self, data: Mapping | Iterable | None = None):
        items = data.items() if isinstance(data, Mapping) else (data or ())
        clean = {}
        for k, v in items:
            v = complex(v)
            if v != 0:
                clean[(tuple(k[0]), int(k[1]))] = v
        self._data = clean

    @classmethod
    def delta(cls, mode: Mode, amplitude: complex = 1.0) -> "SparseVec":
        return cls({mode: amplitude})

    def __getitem__(self, key):
        return self._data.get(key, 0j)

    def __iter__(self):
        return iter(sorted(self._data))

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return f"SparseVec({dict(sorted(self._data.items()))})"

    def __eq__(self, other):
        if isinstance(other, SparseVec):
            return self._data == other._data
        return NotImplemented

    __hash__ = None

    def __add__(self, other: "SparseVec") -> "SparseVec":
        out = dict(self._data)
        for k, v in other._data.items():
            out[k] = out.get(k, 0j) + v
        return SparseVec(out)

    def __sub__(self, other: "SparseVec") -> "SparseVec":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "SparseVec":
        return SparseVec({k: scalar * v for k, v in self._data.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(v) ** 2 for v in self._data.values())))

    def inner(self, other: "SparseVec") -> complex:
        """``<self, other>``, antilinear in ``self``."""
        return sum((np.conj(v) * other[k] for k, v in self._data.items()), 0j)

    def support(self) -> list[Mode]:
        return sorted(self._data)

    def to_array(self, modes: Sequence[Mode]) -> np.ndarray:
        index = {m: i for i, m in enumerate(modes)}
        out = np.zeros(len(modes), dtype=complex)
        for k, v in self._data.items():
            if k not in index:
                raise KeyError(f"mode {k} is outside the coordinate list")
            out[index[k]] = v
        return out

    @classmethod
    def from_array(cls, modes: Sequence[Mode], values) -> "SparseVec":
        return cls(zip(modes, np.asarray(values)))

    def to_json(self) -> list:
        return [[list(site), ch, float(v.real), float(v.imag)] for (site, ch), v in sorted(self._data.items())]


@dataclass(frozen=True)
class KernelModes:
    x: Point
    modes: tuple[Mode, ...]
    exact: bool

    @property
    def dim(self) -> int:
        return len(self.modes)


class IsometricRep:
    """Base class: subclasses define how a cone element moves a single mode."""

    cone: ConeSpec

    def _check(self, x) -> tuple[int, ...]:
        c = self.cone.coefficients(x)
        if c is None:
            raise ValueError(f"{tuple(x)} is not in the cone")
        return c

    def shift_mode(self, x: Point, mode: Mode) -> Mode:
        raise NotImplementedError

    def unshift_mode(self, x: Point, mode: Mode) -> Mode | None:
        """Preimage of ``mode`` under ``V_x``, or ``None`` if outside the range."""
        raise NotImplementedError

    def is_mode(self, mode: Mode) -> bool:
        raise NotImplementedError

    def apply(self, x, f: SparseVec) -> SparseVec:
        x = tuple(x)
        self._check(x)
        return SparseVec({self.shift_mode(x, m): v for m, v in f.items()})

    def adjoint_apply(self, x, f: SparseVec) -> SparseVec:
        x = tuple(x)
        self._check(x)
        out = {}
        for m, v in f.items():
            pre = self.unshift_mode(x, m)
            if pre is not None:
                out[pre] = v
        return SparseVec(out)

    def range_projection(self, x, f: SparseVec) -> SparseVec:
        """``V_x V_x^* f``."""
        return self.apply(x, self.adjoint_apply(x, f))

    def modes_in(self, window: Window | None) -> list[Mode]:
        raise NotImplementedError

    def kernel_modes(self, x, window: Window | None = None) -> KernelModes:
        raise NotImplementedError

    def random_vector(self, rng: np.random.Generator, n_support: int, window: Window | None = None) -> SparseVec:
        modes = self.modes_in(window)
        if not modes:
            return SparseVec()
        pick = rng.choice(len(modes), size=min(n_support, len(modes)), replace=False)
        vals = rng.normal(size=len(pick)) + 1j * rng.normal(size=len(pick))
        return SparseVec({modes[i]: v for i, v in zip(sorted(pick), vals)})

    def to_dict(self) -> dict:
        raise NotImplementedError


class LatticeShift(IsometricRep):
    """``(V_x f)(p) = f(p - x)`` on functions supported in a lattice module, ``k`` channels."""

    def __init__(self, module: LatticeModule, multiplicity: int = 1):
        if multiplicity < 0:
            raise ValueError("multiplicity must be nonnegative")
        self.module = module
        self.cone = module.cone
        self.multiplicity = int(multiplicity)

    @classmethod
    def one_parameter(cls, multiplicity: int = 1) -> "LatticeShift":
        cone = ConeSpec.orthant(1)
        return cls(LatticeModule.of_cone(cone), multiplicity)

    def __repr__(self):
        return f"LatticeShift({self.module.to_dict()}, multiplicity={self.multiplicity})"

    def shift_mode(self, x, mode):
        return (add(mode[0], x), mode[1])

    def unshift_mode(self, x, mode):
        p = sub(mode[0], x)
        return (p, mode[1]) if p in self.module else None

    def is_mode(self, mode):
        return mode[0] in self.module and 0 <= mode[1] < self.multiplicity

    def modes_in(self, window):
        if window is None:
            raise ValueError("a lattice shift needs a window to enumerate modes")
        return [(p, c) for p in self.module.points_in(window) for c in range(self.multiplicity)]

    def _kernel_exact(self, x, window: Window) -> bool:
        """Whether ``A \\ (A+x)`` is finite and lies inside the window."""
        mod = self.module
        if mod.points is not None:
            return mod.declared_window is not None and window.covers(mod.declared_window)
        if self.cone.dim != 1:
            return False
        # in one dimension A is a half-line [m, inf) (or (-inf, m] for a negative generator)
        g = self.cone.generators[0][0]
        lo = [-(-h.offset // h.normal[0]) for h in mod.halfspaces if h.normal[0] > 0]
        hi = [h.offset // h.normal[0] for h in mod.halfspaces if h.normal[0] < 0]
        if g > 0 and lo and not hi:
            start = max(lo)
            return window.lower[0] <= start and start + x[0] - 1 <= window.upper[0]
        if g < 0 and hi and not lo:
            end = min(hi)
            return window.upper[0] >= end and end + x[0] + 1 >= window.lower[0]
        return False

    def kernel_modes(self, x, window=None):
        x = tuple(x)
        self._check(x)
        if window is None:
            raise ValueError("a lattice shift needs a window to enumerate kernel modes")
        modes = tuple(
            (p, c)
            for p in self.module.points_in(window)
            if sub(p, x) not in self.module
            for c in range(self.multiplicity)
        )
        return KernelModes(x, modes, self._kernel_exact(x, window))

    def to_dict(self):
        return {"flavor": "lattice_shift", "multiplicity": self.multiplicity}


class DirectSumShift(IsometricRep):
    """``V_x = S_{c_1(x)} (+) ... (+) S_{c_d(x)}``, one one-parameter shift per generator.

    ``c_i(x)`` are the generator coefficients of ``x``; summand ``i`` is
    ``l^2(N) (x) C^{k_i}``.  Modes are ``((i, n), channel)``.
    """

    def __init__(self, multiplicities: Sequence[int], cone: ConeSpec | None = None):
        ks = tuple(int(k) for k in multiplicities)
        if any(k < 0 for k in ks):
            raise ValueError("multiplicities must be nonnegative")
        cone = cone if cone is not None else ConeSpec.orthant(len(ks))
        if cone.dim != len(ks):
            raise ValueError(f"need one summand per generator: {cone.dim} generators, {len(ks)} summands")
        self.cone = cone
        self.multiplicities = ks

    def __repr__(self):
        return f"DirectSumShift({list(self.multiplicities)})"

    def shift_mode(self, x, mode):
        c = self.cone.coefficients(x)
        (i, n), ch = mode
        return ((i, n + c[i]), ch)

    def unshift_mode(self, x, mode):
        c = self.cone.coefficients(x)
        (i, n), ch = mode
        return ((i, n - c[i]), ch) if n - c[i] >= 0 else None

    def is_mode(self, mode):
        (i, n), ch = mode
        return 0 <= i < len(self.multiplicities) and n >= 0 and 0 <= ch < self.multiplicities[i]

    def modes_in(self, window=None):
        depth = range(10) if window is None else range(max(window.lower[0], 0), window.upper[0] + 1)
        return [((i, n), c) for i, k in enumerate(self.multiplicities) for n in depth for c in range(k)]

    def kernel_modes(self, x, window=None):
        x = tuple(x)
        c = self._check(x)
        modes = tuple(
            ((i, n), ch) for i, k in enumerate(self.multiplicities) for n in range(c[i]) for ch in range(k)
        )
        return KernelModes(x, modes, True)

    def to_dict(self):
        return {"flavor": "direct_sum", "multiplicities": list(self.multiplicities)}


def semigroup_check(rep: IsometricRep, x, y, trials: int = 10, rng=None, window: Window | None = None) -> float:
    """Largest ``||V_x V_y f - V_{x+y} f||`` over random sparse ``f``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    xy = add(x, y)
    worst = 0.0
    for _ in range(trials):
        f = rep.random_vector(rng, 20, window)
        worst = max(worst, (rep.apply(x, rep.apply(y, f)) - rep.apply(xy, f)).norm())
    return worst


def purity_probe(rep: IsometricRep, a, n_max: int, window: Window) -> list[int]:
    """Dimensions of ``ran(V_{na})`` seen inside the window, ``n = 1..n_max``."""
    a = tuple(a)
    if not rep.cone.is_interior(a):
        raise ValueError(f"{a} is not in the interior of the cone")
    modes = rep.modes_in(window)
    dims = []
    for n in range(1, n_max + 1):
        na = tuple(n * c for c in a)
        dims.append(sum(1 for m in modes if rep.unshift_mode(na, m) is not None))
    return dims


def kernel_splitting_defect(rep: IsometricRep, x, y, window: Window | None = None) -> dict:
    """Compare ``K_{x+y}`` with ``K_x (+) V_x K_y`` as mode sets."""
    kxy = set(rep.kernel_modes(add(x, y), window).modes)
    kx = set(rep.kernel_modes(x, window).modes)
    vky = {rep.shift_mode(tuple(x), m) for m in rep.kernel_modes(y, window).modes}
    if window is not None and isinstance(rep, LatticeShift):
        vky = {m for m in vky if m[0] in window}
    return {
        "overlap": len(kx & vky),
        "missing": sorted(kxy - (kx | vky)),
        "extra": sorted((kx | vky) - kxy),
    }


@dataclass(frozen=True, eq=False)
class AdditiveCocycle:
    """Additive cocycle determined by its values on the cone generators."""

    rep: IsometricRep
    generator_values: tuple[SparseVec, ...]
    exact: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, x, order: Sequence[int] | None = None) -> SparseVec:
        return extend_cocycle(self, x, order)

    def compatibility_defect(self) -> float:
        """``max ||h_i + V_i h_j - h_j - V_j h_i||`` over generator pairs."""
        gens = self.rep.cone.generators
        worst = 0.0
        for i, j in itertools.combinations(range(len(gens)), 2):
            hi, hj = self.generator_values[i], self.generator_values[j]
            lhs = hi + self.rep.apply(gens[i], hj)
            rhs = hj + self.rep.apply(gens[j], hi)
            worst = max(worst, (lhs - rhs).norm())
        return worst

    def scaled(self, s: complex) -> "AdditiveCocycle":
        return AdditiveCocycle(self.rep, tuple(s * h for h in self.generator_values), self.exact)

    def to_json(self) -> dict:
        return {
            "generators": [list(g) for g in self.rep.cone.generators],
            "values": [h.to_json() for h in self.generator_values],
            "exact": self.exact,
        }


def extend_cocycle(c: AdditiveCocycle, x, order: Sequence[int] | None = None) -> SparseVec:
    """``h_x`` by telescoping ``h_{a+g} = h_a + V_a h_g`` along the generator decomposition of ``x``."""
    x = tuple(x)
    coeffs = c.rep.cone.coefficients(x)
    if coeffs is None:
        raise ValueError(f"{x} is not in the cone")
    gens = c.rep.cone.generators
    order = tuple(range(len(gens))) if order is None else tuple(order)
    if order == tuple(range(len(gens))) and x in c._cache:
        return c._cache[x]
    steps = [j for j in order for _ in range(coeffs[j])]
    a = (0,) * c.rep.cone.dim
    h = SparseVec()
    for j in steps:
        h = h + c.rep.apply(a, c.generator_values[j])
        a = add(a, gens[j])
    if order == tuple(range(len(gens))):
        c._cache[x] = h
    return h


def _cocycle_system(rep: IsometricRep, window: Window | None):
    gens = rep.cone.generators
    kms = [rep.kernel_modes(g, window) for g in gens]
    unknowns = [(j, m) for j, km in enumerate(kms) for m in km.modes]
    blocks = []
    for i, j in itertools.combinations(range(len(gens)), 2):
        # columns: contribution of each unknown to h_i + V_i h_j - h_j - V_j h_i
        cols = []
        for (jj, m) in unknowns:
            delta = SparseVec.delta(m)
            if jj == i:
                vec = delta - rep.apply(gens[j], delta)
            elif jj == j:
                vec = rep.apply(gens[i], delta) - delta
            else:
                vec = SparseVec()
            cols.append(vec)
        keys = sorted({k for v in cols for k in v})
        blocks.append((keys, cols))
    n_rows = sum(len(k) for k, _ in blocks)
    mat = np.zeros((n_rows, len(unknowns)), dtype=complex)
    r0 = 0
    for keys, cols in blocks:
        idx = {k: r0 + t for t, k in enumerate(keys)}
        for col, vec in enumerate(cols):
            for k, v in vec.items():
                mat[idx[k], col] = v
        r0 += len(keys)
    return kms, unknowns, mat


def solve_cocycles(rep: IsometricRep, window: Window | None = None, tol: Tolerances = DEFAULT_TOL) -> list[AdditiveCocycle]:
    """Orthonormal basis (in generator-value coordinates) of the additive cocycles.

    Unknowns are the generator values ``h_j`` in ``span K_{g_j}``; constraints
    are the pairwise compatibility laws, evaluated exactly on the infinite
    lattice so that window truncation only ever removes solutions.
    """
    kms, unknowns, mat = _cocycle_system(rep, window)
    if not unknowns:
        return []
    if mat.shape[0] == 0:
        null = Subspace.full(len(unknowns))
    else:
        null = kernel_of_adjoint(mat.conj().T, tol)
    null = canonical_basis(null, tol)
    exact = all(km.exact for km in kms)
    out = []
    for col in null.basis.T:
        vals = [dict() for _ in rep.cone.generators]
        for (j, m), v in zip(unknowns, col):
            if abs(v) > 1e-15:
                vals[j][m] = v
        out.append(AdditiveCocycle(rep, tuple(SparseVec(v) for v in vals), exact))
    return out


def stabilized_cocycle_dimension(rep: IsometricRep, window: Window | None) -> dict:
    """Solution dimension at ``window`` and at the window grown by one step."""
    d0 = len(solve_cocycles(rep, window))
    if window is None or isinstance(rep, DirectSumShift):
        return {"dimension": d0, "grown_dimension": d0, "stable": True}
    d1 = len(solve_cocycles(rep, window.grown(1)))
    return {"dimension": d0, "grown_dimension": d1, "stable": d0 == d1}


@dataclass(frozen=True)
class DivisibilityReport:
    z: Point
    divisible: bool
    span_rank: int
    kernel_dim: int
    exact: bool

    @property
    def deficit(self) -> int:
        return self.kernel_dim - self.span_rank

    def to_dict(self) -> dict:
        return {
            "z": list(self.z),
            "divisible": self.divisible,
            "span_rank": self.span_rank,
            "kernel_dim": self.kernel_dim,
            "deficit": self.deficit,
            "exact": self.exact,
        }


def divisibility_check(rep: IsometricRep, cocycles: Sequence[AdditiveCocycle], z, window: Window | None = None,
                       tol: Tolerances = DEFAULT_TOL) -> DivisibilityReport:
    """Does ``{V_x h_y : h a cocycle, x + y <= z}`` span ``Ker(V_z^*)``?"""
    z = tuple(z)
    cz = rep.cone.coefficients(z)
    if cz is None:
        raise ValueError(f"{z} is not in the cone")
    km = rep.kernel_modes(z, window)
    modes = list(km.modes)
    index = set(modes)
    gens_pts = [p for p in cone_points(rep.cone, max(cz), include_zero=True)]
    vectors = []
    for y in gens_pts:
        cy = rep.cone.coefficients(y)
        if any(a > b for a, b in zip(cy, cz)):
            continue
        for x in gens_pts:
            cx = rep.cone.coefficients(x)
            if any(a + b > c for a, b, c in zip(cx, cy, cz)):
                continue
            for h in cocycles:
                v = rep.apply(x, h(y))
                v = SparseVec({m: a for m, a in v.items() if m in index})
                if len(v):
                    vectors.append(v.to_array(modes))
    rank = orthonormalize(vectors, dim=len(modes), tol=tol).rank if modes else 0
    exact = km.exact and all(h.exact for h in cocycles)
    return DivisibilityReport(z, rank == len(modes), rank, len(modes), exact)
