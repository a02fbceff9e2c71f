"""Dense complex linear algebra and subspace geometry.

Everything downstream (kernels of shift adjoints, the subspaces entering the
properness test, decomposable spaces) is expressed as a :class:`Subspace`, an
orthonormal column basis inside a fixed ambient ``C^n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class Tolerances:
    """Every numerical threshold used by the toolkit, in one place.

    ``rank`` is relative to the largest singular value; ``sector_divisor``
    selects the low-particle sector ``n <= N // sector_divisor`` on which
    truncated bosonic matrices are compared.
    """

    rank: float = 1e-8
    ortho: float = 1e-10
    containment: float = 1e-8
    zero: float = 1e-8
    positive: float = 1.0
    sector_divisor: int = 3

    def updated(self, **overrides) -> "Tolerances":
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown tolerance names: {sorted(unknown)}")
        return replace(self, **overrides)


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True, eq=False)
class Subspace:
    """Column-orthonormal basis of a subspace of ``C^ambient_dim``."""

    ambient_dim: int
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=complex)
        if basis.ndim != 2 or basis.shape[0] != self.ambient_dim:
            raise ValueError(
                f"basis shape {basis.shape} incompatible with ambient dimension {self.ambient_dim}"
            )
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def zero(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.zeros((ambient_dim, 0), dtype=complex))

    @classmethod
    def full(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.eye(ambient_dim, dtype=complex))

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def residual(self, vectors) -> float:
        """Largest distance of the given columns from this subspace."""
        v = np.asarray(vectors, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.size == 0:
            return 0.0
        r = v - self.basis @ (self.basis.conj().T @ v)
        return float(np.max(np.linalg.norm(r, axis=0)))

    def contains(self, vectors, tol: float = DEFAULT_TOL.containment) -> bool:
        return self.residual(vectors) <= tol

    def orthonormality_error(self) -> float:
        if self.rank == 0:
            return 0.0
        g = self.basis.conj().T @ self.basis
        return float(np.max(np.abs(g - np.eye(self.rank))))

    def same_as(self, other: "Subspace", tol: float = 1e-9) -> bool:
        if self.ambient_dim != other.ambient_dim or self.rank != other.rank:
            return False
        return bool(np.max(np.abs(self.projector() - other.projector()), initial=0.0) <= tol)


def _as_columns(vectors, dim: int | None = None) -> np.ndarray:
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return vectors.astype(complex)
    vecs = [np.asarray(v, dtype=complex).ravel() for v in vectors]
    if not vecs:
        if dim is None:
            raise ValueError("cannot infer the dimension of an empty vector list")
        return np.zeros((dim, 0), dtype=complex)
    lengths = {len(v) for v in vecs}
    if len(lengths) != 1:
        raise ValueError(f"vectors have mismatched dimensions {sorted(lengths)}")
    return np.column_stack(vecs)


def _range_basis(m: np.ndarray, tol: float) -> np.ndarray:
    if m.shape[1] == 0 or m.shape[0] == 0:
        return np.zeros((m.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] <= np.finfo(float).tiny:
        return np.zeros((m.shape[0], 0), dtype=complex)
    r = int(np.sum(s > tol * s[0]))
    return u[:, :r]


def orthonormalize(vectors, dim: int | None = None, tol: Tolerances = DEFAULT_TOL) -> Subspace:
    """Orthonormal basis of the span of ``vectors``.

    ``vectors`` is either a list of 1-d arrays or a 2-d array whose columns are
    the vectors.  An all-zero or empty input yields the rank-0 subspace.
    """
    m = _as_columns(vectors, dim)
    return Subspace(m.shape[0], _range_basis(m, tol.rank))


def canonical_basis(space: Subspace, tol: Tolerances = DEFAULT_TOL) -> Subspace:
    """Rotation-independent basis: Gram-Schmidt on the projector columns in order.

    Two bases of the same subspace give the same result, and coordinate
    subspaces come back as (phase-free) standard basis vectors.
    """
    if space.rank == 0:
        return space
    p = space.projector()
    chosen: list[np.ndarray] = []
    for j in range(space.ambient_dim):
        v = p[:, j].copy()
        for q in chosen:
            v -= q * np.vdot(q, v)
        for q in chosen:
            v -= q * np.vdot(q, v)
        nv = np.linalg.norm(v)
        if nv > np.sqrt(tol.rank):
            chosen.append(v / nv)
            if len(chosen) == space.rank:
                break
    return Subspace(space.ambient_dim, np.column_stack(chosen))


def kernel_of_adjoint(m, tol: Tolerances = DEFAULT_TOL) -> Subspace:
    """Orthogonal complement of the column range of ``m`` (that is, ``Ker(m*)``)."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    n = m.shape[0]
    if m.shape[1] == 0:
        return Subspace.full(n)
    u, s, _ = np.linalg.svd(m, full_matrices=True)
    r = 0 if s.size == 0 or s[0] <= np.finfo(float).tiny else int(np.sum(s > tol.rank * s[0]))
    return Subspace(n, u[:, r:])


def subspace_intersect(u: Subspace, w: Subspace, tol: Tolerances = DEFAULT_TOL) -> Subspace:
    """Intersection via principal angles.

    Singular values of ``U* W`` are the cosines of the principal angles (the
    nonzero singular values of ``P_U P_W``); directions with cosine above
    ``1 - tol.rank`` are common to both subspaces.
    """
    if u.ambient_dim != w.ambient_dim:
        raise ValueError(f"ambient dimensions differ: {u.ambient_dim} vs {w.ambient_dim}")
    if u.rank == 0 or w.rank == 0:
        return Subspace.zero(u.ambient_dim)
    left, s, right_h = np.linalg.svd(u.basis.conj().T @ w.basis)
    k = int(np.sum(s > 1.0 - tol.rank))
    if k == 0:
        return Subspace.zero(u.ambient_dim)
    # average both representations of the common directions, then re-orthonormalize
    from_u = u.basis @ left[:, :k]
    from_w = w.basis @ right_h.conj().T[:, :k]
    return orthonormalize(0.5 * (from_u + from_w), tol=tol)


def complement_within(u: Subspace, ambient: Subspace, tol: Tolerances = DEFAULT_TOL) -> Subspace:
    """Orthogonal complement of ``u`` inside ``ambient``."""
    if u.ambient_dim != ambient.ambient_dim:
        raise ValueError(f"ambient dimensions differ: {u.ambient_dim} vs {ambient.ambient_dim}")
    res = ambient.residual(u.basis)
    if res > tol.containment:
        raise ValueError(f"subspace is not contained in the ambient subspace (max residual {res:.3e})")
    if ambient.rank == 0:
        return Subspace.zero(ambient.ambient_dim)
    coords = ambient.basis.conj().T @ u.basis
    inner = kernel_of_adjoint(coords, tol)
    return Subspace(ambient.ambient_dim, ambient.basis @ inner.basis)


def _is_monomial(m: sp.csr_array) -> bool:
    ones = m.copy()
    ones.data = np.ones_like(ones.data, dtype=float)
    return ones.sum(axis=1).max() <= 1 and ones.sum(axis=0).max() <= 1


def op_norm(m) -> float:
    """Largest singular value.  Accepts dense arrays and scipy sparse matrices."""
    if sp.issparse(m):
        m = sp.csr_array(m)
        m.eliminate_zeros()
        if m.nnz == 0:
            return 0.0
        if _is_monomial(m):
            return float(np.max(np.abs(m.data)))
        if min(m.shape) <= 2048:
            return float(np.linalg.norm(m.toarray(), 2))
        return float(spla.svds(m, k=1, return_singular_vectors=False, tol=1e-12)[0])
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))
