"""CCR and CAR flows on a window of modes, product-system fibers and decomposability.

A :class:`FlowModel` fixes an isometric representation, a window of modes
and a particle cutoff.  For each cone element ``x`` the window modes split
into kernel modes ``K_x`` and shifted source modes ``V_x(S_x)`` and the flow
is conjugation by the factorization isometry

    alpha_x(T) = U_x (1 (x) T|_{S_x}) U_x^*.

Bosonic comparisons are made on the low-particle sector
``n <= N // tol.sector_divisor``, where the truncated matrix exponentials are
accurate; fermionic ones on the whole space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cone_lattice import Point, Window, add, sub
from .fock import (
    ANTISYMMETRIC,
    SYMMETRIC,
    FactorizationMap,
    FockModel,
    FockOperator,
    annihilation,
    creation,
    exponential_tail,
    exponential_vector,
    factorization,
    inclusion_matrix,
    second_quantization,
    weyl_kernel_eval,
    weyl_operator,
    weyl_product_kernel_eval,
)
from .isometric_rep import AdditiveCocycle, IsometricRep, SparseVec
from .linalg_core import DEFAULT_TOL, Subspace, Tolerances, op_norm, orthonormalize, subspace_intersect

CCR = "CCR"
CAR = "CAR"


class WindowError(ValueError):
    """A shifted mode left the window."""


def _sparse_vec_coords(vec: SparseVec, modes, what: str = "vector") -> np.ndarray:
    index = {m: i for i, m in enumerate(modes)}
    out = np.zeros(len(modes), dtype=complex)
    for k, v in vec.items():
        if k not in index:
            raise WindowError(f"{what} has support on mode {k} outside the available modes")
        out[index[k]] = v
    return out


@dataclass(frozen=True)
class ModeSplit:
    x: Point
    kernel: tuple
    source: tuple
    image: tuple
    orphans: tuple


class FlowModel:
    """CCR (bosonic) or CAR (fermionic) flow of ``rep`` on the modes of ``window``."""

    def __init__(self, rep: IsometricRep, flavor: str, window: Window | None, cutoff: int | None,
                 tol: Tolerances = DEFAULT_TOL):
        if flavor not in (CCR, CAR):
            raise ValueError(f"flavor must be {CCR!r} or {CAR!r}")
        self.rep = rep
        self.flavor = flavor
        self.window = window
        self.tol = tol
        self.modes = tuple(rep.modes_in(window))
        self._modeset = frozenset(self.modes)
        self.statistics = SYMMETRIC if flavor == CCR else ANTISYMMETRIC
        self.fock = FockModel(self.statistics, self.modes, cutoff)
        self.cutoff = self.fock.cutoff
        self._splits: dict = {}
        self._factorizations: dict = {}
        self._fibers: dict = {}

    def __repr__(self):
        return f"FlowModel({self.rep!r}, {self.flavor}, modes={len(self.modes)}, cutoff={self.cutoff})"

    @property
    def exact(self) -> bool:
        return all(self.rep.kernel_modes(g, self.window).exact for g in self.rep.cone.generators)

    @property
    def sector(self) -> int:
        """Particle sector on which bosonic matrices are compared."""
        return self.cutoff // self.tol.sector_divisor

    def compare(self, a: FockOperator, b: FockOperator) -> float:
        diff = (a - b).matrix
        if self.flavor == CCR:
            # P diff P has the same norm as its low-sector block
            keep = np.flatnonzero(self.fock.particle_numbers <= self.sector)
            diff = diff[np.ix_(keep, keep)] if not sp.issparse(diff) else sp.csr_array(diff)[keep][:, keep]
        return op_norm(diff)

    # ---- operators on the window model

    def vec(self, u) -> np.ndarray:
        if isinstance(u, SparseVec):
            return _sparse_vec_coords(u, self.modes)
        return self.fock.coords(u)

    def weyl(self, u) -> FockOperator:
        return weyl_operator(self.fock, self.vec(u))

    def annihilation(self, u) -> FockOperator:
        return annihilation(self.fock, self.vec(u))

    def creation(self, u) -> FockOperator:
        return creation(self.fock, self.vec(u))

    def shift(self, x, u) -> SparseVec:
        return self.rep.apply(x, u if isinstance(u, SparseVec) else SparseVec.from_array(self.modes, u))

    # ---- the factorization at x

    def split(self, x) -> ModeSplit:
        x = tuple(x)
        if x not in self._splits:
            self.rep._check(x)
            kernel, source, image, orphans = [], [], [], []
            for m in self.modes:
                pre = self.rep.unshift_mode(x, m)
                if pre is None:
                    kernel.append(m)
                elif pre in self._modeset:
                    image.append(m)
                else:
                    orphans.append(m)
            source = [m for m in self.modes if self.rep.shift_mode(x, m) in self._modeset]
            self._splits[x] = ModeSplit(x, tuple(kernel), tuple(source), tuple(image), tuple(orphans))
        return self._splits[x]

    def factorization(self, x) -> tuple[FactorizationMap, np.ndarray]:
        """``U_x`` and the embedding ``J`` of the source Fock space into the window Fock space."""
        x = tuple(x)
        if x not in self._factorizations:
            s = self.split(x)
            kmodel = FockModel(self.statistics, s.kernel, self.cutoff if self.flavor == CCR else len(s.kernel))
            smodel = FockModel(self.statistics, s.source, self.cutoff if self.flavor == CCR else len(s.source))
            e1 = inclusion_matrix(s.kernel, self.fock)
            e2 = np.zeros((self.fock.m, len(s.source)), dtype=complex)
            for j, m in enumerate(s.source):
                e2[self.fock.mode_index[self.rep.shift_mode(x, m)], j] = 1.0
            fmap = factorization(kmodel, smodel, self.fock, e1, e2)
            j = second_quantization(smodel, self.fock, inclusion_matrix(s.source, self.fock))
            self._factorizations[x] = (fmap, j)
        return self._factorizations[x]

    def flow_apply(self, x, op: FockOperator) -> FockOperator:
        """``alpha_x(T)`` (or ``beta_x(T)``): conjugation by the factorization isometry."""
        x = tuple(x)
        if op.model is not self.fock:
            raise ValueError("operator lives on a different Fock model")
        s = self.split(x)
        src = frozenset(s.source)
        if op.support is not None:
            for m in sorted(op.support):
                if m not in src:
                    raise WindowError(f"mode {m} escapes the window under V_{x}")
        fmap, j = self.factorization(x)
        t = op.matrix
        t_src = j.conj().T @ t @ j
        eye = sp.identity(fmap.model_1.dim, dtype=complex, format="csr")
        inner = sp.kron(eye, sp.csr_array(t_src), format="csr")
        u = fmap.matrix
        out = u @ inner @ u.conj().T
        out = out.toarray() if not sp.issparse(t) else sp.csr_array(out)
        support = None if op.support is None else frozenset(self.rep.shift_mode(x, m) for m in op.support)
        return FockOperator(self.fock, out, support)

    def flow_semigroup_check(self, x, y, generators) -> float:
        """``max_G ||alpha_x(alpha_y(G)) - alpha_{x+y}(G)||``."""
        xy = add(x, y)
        worst = 0.0
        for g in generators:
            worst = max(worst, self.compare(self.flow_apply(x, self.flow_apply(y, g)), self.flow_apply(xy, g)))
        return worst

    # ---- product-system fibers

    def fiber(self, x) -> "ProductFiber":
        x = tuple(x)
        if x not in self._fibers:
            km = self.rep.kernel_modes(x, self.window)
            cut = self.cutoff if self.flavor == CCR else min(self.cutoff, len(km.modes))
            self._fibers[x] = ProductFiber(x, FockModel(self.statistics, km.modes, cut), km.exact)
        return self._fibers[x]

    def product_map(self, x, y) -> FactorizationMap:
        """``U_{x,y}: E_x (x) E_y -> E_{x+y}``, second factor embedded through ``V_x``."""
        return _product_map(self, tuple(x), tuple(y))


@dataclass(frozen=True)
class ProductFiber:
    x: Point
    fock: FockModel
    exact: bool

    @property
    def dim(self) -> int:
        return self.fock.dim


def _product_map(model: FlowModel, x, y) -> FactorizationMap:
    key = ("product", x, y)
    if key in model._factorizations:
        return model._factorizations[key]
    fx, fy, fxy = model.fiber(x), model.fiber(y), model.fiber(add(x, y))
    target = fxy.fock
    e1 = np.zeros((target.m, fx.fock.m), dtype=complex)
    for j, m in enumerate(fx.fock.modes):
        if m not in target.mode_index:
            raise WindowError(f"kernel mode {m} of {x} is missing from the kernel of {add(x, y)}")
        e1[target.mode_index[m], j] = 1.0
    e2 = np.zeros((target.m, fy.fock.m), dtype=complex)
    for j, m in enumerate(fy.fock.modes):
        img = model.rep.shift_mode(x, m)
        if img not in target.mode_index:
            raise WindowError(f"mode {m} escapes the window under V_{x}")
        e2[target.mode_index[img], j] = 1.0
    fmap = factorization(fx.fock, fy.fock, target, e1, e2)
    model._factorizations[key] = fmap
    return fmap


def associativity_defect(model: FlowModel, x, y, z) -> float:
    """Compare ``U_{x+y,z}(U_{x,y} (x) 1)`` with ``U_{x,y+z}(1 (x) U_{y,z})`` below the cutoff."""
    x, y, z = tuple(x), tuple(y), tuple(z)
    uxy = model.product_map(x, y).matrix
    uxy_z = model.product_map(add(x, y), z).matrix
    uyz = model.product_map(y, z).matrix
    ux_yz = model.product_map(x, add(y, z)).matrix
    dx, dy, dz = (model.fiber(p).dim for p in (x, y, z))
    left = uxy_z @ sp.kron(uxy, sp.identity(dz), format="csr")
    right = ux_yz @ sp.kron(sp.identity(dx), uyz, format="csr")
    nx, ny, nz = (model.fiber(p).fock.particle_numbers for p in (x, y, z))
    total = (nx[:, None, None] + ny[None, :, None] + nz[None, None, :]).ravel()
    keep = np.flatnonzero(total <= model.fiber(add(add(x, y), z)).fock.max_particles)
    diff = (left - right)[:, keep]
    return float(np.max(np.abs(diff.toarray()), initial=0.0))


def interior_points(model: FlowModel, x) -> list:
    """Lattice points ``y`` with ``0 < y < x`` (both ``y`` and ``x - y`` nonzero cone elements)."""
    cone = model.rep.cone
    cx = cone.coefficients(x)
    if cx is None:
        raise ValueError(f"{tuple(x)} is not in the cone")
    out = []
    for coeffs in itertools.product(*(range(c + 1) for c in cx)):
        if any(coeffs) and tuple(coeffs) != tuple(cx):
            out.append(cone.point(coeffs))
    return out


@dataclass(frozen=True, eq=False)
class DecomposableSpace:
    x: Point
    subdivisions: tuple
    basis: Subspace = field(repr=False)
    sector_dims: tuple
    sector_full_dims: tuple
    vacuous: bool
    exact: bool

    @property
    def dim(self) -> int:
        return self.basis.rank

    def ratios(self) -> tuple:
        return tuple(d / f if f else 0.0 for d, f in zip(self.sector_dims, self.sector_full_dims))

    def to_dict(self) -> dict:
        return {
            "x": list(self.x),
            "subdivisions": [list(y) for y in self.subdivisions],
            "sector_dims": list(self.sector_dims),
            "sector_full_dims": list(self.sector_full_dims),
            "dim": self.dim,
            "vacuous": self.vacuous,
            "exact": self.exact,
        }


def _split_range(model: FlowModel, x, y, rows=None) -> np.ndarray:
    """Columns spanning ``U_{y,x-y}(E_y (x) Omega) + U_{y,x-y}(Omega (x) E_{x-y})``."""
    fmap = model.product_map(y, sub(x, y))
    d2 = fmap.model_2.dim
    cols = [i * d2 for i in range(fmap.model_1.dim)] + list(range(1, d2))
    m = fmap.matrix[:, cols].toarray()
    return m if rows is None else m[rows]


def decomposable_space(model: FlowModel, x, subdivisions=None, by_sector: bool = True,
                       tol: Tolerances = DEFAULT_TOL) -> DecomposableSpace:
    """Vectors of ``E_x`` splitting across the product map at every ``y`` in ``subdivisions``.

    The vacuum is included.  The constraints preserve particle number, so by
    default each sector is solved separately and the results are assembled.
    """
    x = tuple(x)
    ys = interior_points(model, x) if subdivisions is None else [tuple(y) for y in subdivisions]
    fib = model.fiber(x)
    for y in ys:
        if not (any(y) and model.rep.cone.coefficients(y) is not None
                and model.rep.cone.coefficients(sub(x, y)) is not None and y != x):
            raise ValueError(f"subdivision point {y} is not strictly between 0 and {x}")
    dim = fib.dim
    nums = fib.fock.particle_numbers
    n_max = int(nums.max()) if dim else 0
    full_dims = tuple(int(np.sum(nums == n)) for n in range(n_max + 1))
    if not ys:
        return DecomposableSpace(x, (), Subspace.full(dim), full_dims, full_dims, True, fib.exact)
    if by_sector:
        blocks, dims = [], []
        for n in range(n_max + 1):
            rows = np.flatnonzero(nums == n)
            space = Subspace.full(len(rows))
            for y in ys:
                r = _split_range(model, x, y, rows)
                space = subspace_intersect(space, orthonormalize(r, dim=len(rows), tol=tol), tol)
            emb = np.zeros((dim, space.rank), dtype=complex)
            emb[rows] = space.basis
            blocks.append(emb)
            dims.append(space.rank)
        basis = Subspace(dim, np.hstack(blocks))
        sector_dims = tuple(dims)
    else:
        basis = Subspace.full(dim)
        for y in ys:
            basis = subspace_intersect(basis, orthonormalize(_split_range(model, x, y), dim=dim, tol=tol), tol)
        p = basis.projector()
        sector_dims = tuple(
            int(round(np.trace(p[np.ix_(nums == n, nums == n)]).real)) for n in range(n_max + 1)
        )
    exact = fib.exact and all(model.fiber(y).exact for y in ys)
    return DecomposableSpace(x, tuple(ys), basis, sector_dims, full_dims, False, exact)


@dataclass(frozen=True)
class DecomposabilityCheck:
    ok: bool
    max_residual: float
    checked: int


def inductive_decomposability_check(model: FlowModel, x, y, tol: Tolerances = DEFAULT_TOL) -> DecomposabilityCheck:
    """Split each basis vector of ``D_{x+y}`` at ``x`` and test the pieces lie in ``D_x`` and ``D_y``."""
    x, y = tuple(x), tuple(y)
    dxy = decomposable_space(model, add(x, y), tol=tol)
    dx = decomposable_space(model, x, tol=tol)
    dy = decomposable_space(model, y, tol=tol)
    fmap = model.product_map(x, y)
    d1, d2 = fmap.model_1.dim, fmap.model_2.dim
    cols = [i * d2 for i in range(d1)] + list(range(1, d2))
    b = fmap.matrix[:, cols].toarray()
    worst = 0.0
    for a in dxy.basis.basis.T:
        coef, *_ = np.linalg.lstsq(b, a, rcond=None)
        worst = max(worst, float(np.linalg.norm(b @ coef - a)))
        ax = coef[:d1]
        ay = np.concatenate([[0.0], coef[d1:]])
        worst = max(worst, dx.basis.residual(ax), dy.basis.residual(ay))
    return DecomposabilityCheck(worst <= 1e-10, worst, dxy.dim)


def embeddability_check(model: FlowModel, x, y, tol: Tolerances = DEFAULT_TOL) -> DecomposabilityCheck:
    """``U_{x,y}(D_x (x) Omega)`` and ``U_{x,y}(Omega (x) D_y)`` inside ``D_{x+y}``."""
    x, y = tuple(x), tuple(y)
    dxy = decomposable_space(model, add(x, y), tol=tol)
    dx = decomposable_space(model, x, tol=tol)
    dy = decomposable_space(model, y, tol=tol)
    fmap = model.product_map(x, y)
    d2 = fmap.model_2.dim
    u = fmap.matrix.toarray()
    left = u[:, [i * d2 for i in range(fmap.model_1.dim)]] @ dx.basis.basis
    right = u[:, list(range(d2))] @ dy.basis.basis
    worst = max(dxy.basis.residual(left), dxy.basis.residual(right))
    return DecomposabilityCheck(worst <= 1e-10, worst, dx.dim + dy.dim)


def refinement_table(rep_factory, sizes, cutoff: int = 2, flavor: str = CCR) -> list[dict]:
    """Decomposable ``n``-particle dimensions for ``x = M`` grid steps, ``Y = {1..M-1}``."""
    rows = []
    for m in sizes:
        rep = rep_factory()
        model = FlowModel(rep, flavor, Window((0,), (m - 1,)), cutoff)
        ds = decomposable_space(model, (m,))
        rows.append({
            "M": m,
            "sector_dims": list(ds.sector_dims),
            "sector_full_dims": list(ds.sector_full_dims),
            "ratios": [float(r) for r in ds.ratios()],
        })
    return rows


# ---- exponential units and gauge cocycles (CCR)


def _cocycle_coords(model: FlowModel, c: AdditiveCocycle, x):
    fib = model.fiber(x)
    return _sparse_vec_coords(c(x), fib.fock.modes, f"h_{tuple(x)}")


def exponential_unit_check(model: FlowModel, cocycles, x, y) -> dict:
    """Unit multiplicativity and the exponential inner-product law for ``e(h_x)``."""
    if model.flavor != CCR:
        raise ValueError("exponential units are checked on the CCR flow")
    x, y = tuple(x), tuple(y)
    xy = add(x, y)
    cocycles = list(cocycles)
    fmap = model.product_map(x, y)
    mult = 0.0
    for c in cocycles:
        ex = exponential_vector(model.fiber(x).fock, _cocycle_coords(model, c, x))
        ey = exponential_vector(model.fiber(y).fock, _cocycle_coords(model, c, y))
        exy = exponential_vector(model.fiber(xy).fock, _cocycle_coords(model, c, xy))
        mult = max(mult, float(np.linalg.norm(fmap.matrix @ np.kron(ex, ey) - exy)))
    closed = 0.0
    truncated = 0.0
    tail = 0.0
    for c1, c2 in itertools.product(cocycles, repeat=2):
        # multiplicativity of <u_x, u'_x> forces <h_{x+y}, h'_{x+y}> = <h_x, h'_x> + <h_y, h'_y>
        lhs = np.exp(c1(xy).inner(c2(xy)))
        rhs = np.exp(c1(x).inner(c2(x))) * np.exp(c1(y).inner(c2(y)))
        closed = max(closed, abs(lhs - rhs) / max(abs(rhs), 1e-300))
        f = model.fiber(x).fock
        e1 = exponential_vector(f, _cocycle_coords(model, c1, x))
        e2 = exponential_vector(f, _cocycle_coords(model, c2, x))
        truncated = max(truncated, abs(np.vdot(e1, e2) - np.exp(c1(x).inner(c2(x)))))
        tail = max(tail, exponential_tail(c1(x).norm() * c2(x).norm(), f.cutoff))
    return {"multiplicativity": mult, "inner_product_closed_form": closed,
            "inner_product_truncated": truncated, "truncation_tail": tail}


def gauge_cocycle_check(model: FlowModel, c: AdditiveCocycle, x, y, rng=None, samples: int = 20,
                        matrix_level: bool = True) -> dict:
    """``W(h_x) alpha_x(W(h_y)) = W(h_{x+y})`` at kernel level and, optionally, on truncated matrices."""
    if model.flavor != CCR:
        raise ValueError("gauge cocycles are checked on the CCR flow")
    rng = rng if rng is not None else np.random.default_rng(0)
    x, y = tuple(x), tuple(y)
    xy = add(x, y)
    hx, hy, hxy = c(x), c(y), c(xy)
    vhy = model.rep.apply(x, hy)
    modes = sorted(set(hx) | set(vhy) | set(hxy))
    ux, uy, uxy = (_sparse_vec_coords(v, modes) for v in (hx, vhy, hxy))
    phase_overlap = abs(np.vdot(ux, uy))
    kernel = 0.0
    for _ in range(samples if modes else 0):
        a = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
        b = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
        a /= max(1.0, np.linalg.norm(a))
        b /= max(1.0, np.linalg.norm(b))
        lhs = weyl_product_kernel_eval(ux, uy, a, b)
        rhs = weyl_kernel_eval(uxy, a, b)
        kernel = max(kernel, abs(lhs - rhs) / abs(rhs))
    out = {"kernel_residual": kernel, "phase_overlap": float(phase_overlap)}
    if matrix_level:
        lhs = model.weyl(hx) @ model.flow_apply(x, model.weyl(hy))
        out["matrix_residual"] = model.compare(lhs, model.weyl(hxy))
        out["sector"] = model.sector
    return out
