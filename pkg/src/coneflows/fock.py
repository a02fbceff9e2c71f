"""Truncated symmetric and antisymmetric Fock spaces over a finite mode list.

Basis order is graded lexicographic: by particle number, then by the sorted
tuple of occupied mode indices (with repetition for bosons).  Fermionic basis
vectors are ``e_{s_1} ^ ... ^ e_{s_k}`` with ``s_1 < ... < s_k``, so creating
into mode ``i`` costs ``(-1)^{#occupied modes before i}``.

Creation, annihilation, parity and second-quantized operators are sparse;
Weyl operators are dense matrix exponentials.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .linalg_core import op_norm

SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"

MAX_DENSE_DIM = 6000


def fock_dimension(statistics: str, m: int, cutoff: int) -> int:
    if statistics == SYMMETRIC:
        return sum(math.comb(m + n - 1, n) for n in range(cutoff + 1))
    return sum(math.comb(m, n) for n in range(min(m, cutoff) + 1))


class FockModel:
    """Fock space over ``modes`` truncated at ``cutoff`` total particles.

    ``cutoff=None`` means no truncation, which is only allowed for fermions.
    """

    def __init__(self, statistics: str, modes: Sequence[Hashable], cutoff: int | None = None):
        if statistics not in (SYMMETRIC, ANTISYMMETRIC):
            raise ValueError(f"unknown statistics {statistics!r}")
        self.statistics = statistics
        self.modes = tuple(modes)
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("mode labels must be distinct")
        if cutoff is None:
            if statistics == SYMMETRIC:
                raise ValueError("a bosonic Fock model needs a finite cutoff")
            cutoff = len(self.modes)
        if cutoff < 0:
            raise ValueError("cutoff must be nonnegative")
        self.cutoff = int(cutoff)
        self.mode_index = {m: i for i, m in enumerate(self.modes)}

    def __repr__(self):
        return f"FockModel({self.statistics}, m={self.m}, cutoff={self.cutoff}, dim={self.dim})"

    @property
    def m(self) -> int:
        return len(self.modes)

    @property
    def symmetric(self) -> bool:
        return self.statistics == SYMMETRIC

    @property
    def max_particles(self) -> int:
        return self.cutoff if self.symmetric else min(self.m, self.cutoff)

    @cached_property
    def basis(self) -> tuple[tuple[int, ...], ...]:
        """Each state as the sorted tuple of occupied mode indices."""
        combos = itertools.combinations_with_replacement if self.symmetric else itertools.combinations
        return tuple(s for n in range(self.max_particles + 1) for s in combos(range(self.m), n))

    @cached_property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.basis)}

    @cached_property
    def particle_numbers(self) -> np.ndarray:
        return np.array([len(s) for s in self.basis])

    @property
    def dim(self) -> int:
        return len(self.basis)

    def occupations(self, state: tuple[int, ...]) -> tuple[int, ...]:
        occ = [0] * self.m
        for i in state:
            occ[i] += 1
        return tuple(occ)

    def state_of_occupations(self, occ: Sequence[int]) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(occ) for _ in range(n))

    def sector(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.particle_numbers == n)

    def sector_projector(self, n_max: int) -> sp.csr_array:
        """Diagonal projector onto states with at most ``n_max`` particles."""
        return sp.diags_array((self.particle_numbers <= n_max).astype(float), format="csr").astype(complex)

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def coords(self, f) -> np.ndarray:
        """Mode-space vector from an array or a ``{mode_label: amplitude}`` mapping."""
        if isinstance(f, dict) or hasattr(f, "items"):
            out = np.zeros(self.m, dtype=complex)
            for k, v in f.items():
                out[self.mode_index[k]] = v
            return out
        f = np.asarray(f, dtype=complex).ravel()
        if f.shape != (self.m,):
            raise ValueError(f"mode vector has length {f.size}, model has {self.m} modes")
        return f

    @cached_property
    def _creation_cache(self) -> dict:
        return {}

    def _mode_creation(self, i: int) -> sp.csr_array:
        """Sparse ``a*(e_i)``, built on first use."""
        if i in self._creation_cache:
            return self._creation_cache[i]
        rows, cols, vals = [], [], []
        for col, s in enumerate(self.basis):
            if len(s) >= self.cutoff:
                continue
            if self.symmetric:
                amp = math.sqrt(s.count(i) + 1)
            else:
                if i in s:
                    continue
                amp = -1.0 if sum(1 for j in s if j < i) % 2 else 1.0
            rows.append(self.index[tuple(sorted(s + (i,)))])
            cols.append(col)
            vals.append(amp)
        op = sp.csr_array(
            (np.array(vals, dtype=complex), (np.array(rows, dtype=int), np.array(cols, dtype=int))),
            shape=(self.dim, self.dim),
        )
        self._creation_cache[i] = op
        return op

    def creation_matrix(self, f) -> sp.csr_array:
        f = self.coords(f)
        nz = np.flatnonzero(f)
        if len(nz) == 1 and f[nz[0]] == 1:
            return self._mode_creation(nz[0])
        out = sp.csr_array((self.dim, self.dim), dtype=complex)
        for i in nz:
            out = out + f[i] * self._mode_creation(i)
        return out

    def support_of(self, f) -> frozenset:
        f = self.coords(f)
        return frozenset(self.modes[i] for i in np.flatnonzero(np.abs(f) > 0))


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Matrix on a :class:`FockModel` basis.

    ``support`` is the set of mode labels the operator acts on nontrivially
    (``None`` when unknown); flows use it to check that shifted supports stay
    inside the window.
    """

    model: FockModel
    matrix: object = field(repr=False)
    support: frozenset | None = None

    def __post_init__(self):
        shape = self.matrix.shape
        if shape != (self.model.dim, self.model.dim):
            raise ValueError(f"operator shape {shape} does not match model dimension {self.model.dim}")

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    @property
    def H(self) -> "FockOperator":
        return FockOperator(self.model, self.matrix.conj().T, self.support)

    def _combine(self, other, res):
        sup = None if self.support is None or other.support is None else self.support | other.support
        if sp.issparse(res):
            res = sp.csr_array(res)
        return FockOperator(self.model, res, sup)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return self._combine(other, self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other: "FockOperator"):
        a, b = self.matrix, other.matrix
        if sp.issparse(a) != sp.issparse(b):
            a = a.toarray() if sp.issparse(a) else a
            b = b.toarray() if sp.issparse(b) else b
        return self._combine(other, a + b)

    def __sub__(self, other: "FockOperator"):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return FockOperator(self.model, scalar * self.matrix, self.support)

    __rmul__ = __mul__

    def norm(self) -> float:
        return op_norm(self.matrix)


def identity(model: FockModel) -> FockOperator:
    return FockOperator(model, sp.identity(model.dim, dtype=complex, format="csr"), frozenset())


def commutator(a: FockOperator, b: FockOperator) -> FockOperator:
    return a @ b - b @ a


def anticommutator(a: FockOperator, b: FockOperator) -> FockOperator:
    return a @ b + b @ a


def exponential_vector(model: FockModel, u) -> np.ndarray:
    """Truncated ``e(u)``: coefficient ``prod u_i^{n_i} / sqrt(n_i!)`` on each occupation state."""
    if not model.symmetric:
        raise ValueError("exponential vectors are defined on the symmetric Fock space only")
    u = model.coords(u)
    out = np.empty(model.dim, dtype=complex)
    for k, s in enumerate(model.basis):
        occ = model.occupations(s)
        out[k] = np.prod([u[i] ** n / math.sqrt(math.factorial(n)) for i, n in enumerate(occ) if n])
    return out


def creation(model: FockModel, f) -> FockOperator:
    return FockOperator(model, model.creation_matrix(f), model.support_of(f))


def annihilation(model: FockModel, f) -> FockOperator:
    return FockOperator(model, model.creation_matrix(f).conj().T.tocsr(), model.support_of(f))


def field_generator(model: FockModel, u) -> np.ndarray:
    c = model.creation_matrix(u)
    return (c - c.conj().T).toarray()


def weyl_operator(model: FockModel, u) -> FockOperator:
    """``W(u) = exp(a*(u) - a(u))`` on the truncated space (scaling and squaring)."""
    if not model.symmetric:
        raise ValueError("Weyl operators are defined on the symmetric Fock space only")
    if model.dim > MAX_DENSE_DIM:
        raise ValueError(f"model dimension {model.dim} too large for a dense Weyl matrix")
    return FockOperator(model, sla.expm(field_generator(model, u)), model.support_of(u))


def unitarity_defect(op: FockOperator) -> float:
    m = op.toarray()
    return op_norm(m.conj().T @ m - np.eye(m.shape[0]))


def weyl_kernel_eval(u, v, w) -> complex:
    """Exact ``<e(v), W(u) e(w)> = exp(-|u|^2/2 - <u,w> + <v, u+w>)``."""
    u, v, w = (np.asarray(t, dtype=complex).ravel() for t in (u, v, w))
    if not (u.shape == v.shape == w.shape):
        raise ValueError("u, v, w must have a common dimension")
    return complex(np.exp(-0.5 * np.vdot(u, u).real - np.vdot(u, w) + np.vdot(v, u + w)))


def weyl_product_kernel_eval(u, v, a, b) -> complex:
    """Exact ``<e(a), W(u) W(v) e(b)>`` via the Weyl action on ``e(b)``."""
    u, v, a, b = (np.asarray(t, dtype=complex).ravel() for t in (u, v, a, b))
    pre = np.exp(-0.5 * np.vdot(v, v).real - np.vdot(v, b))
    return complex(pre * weyl_kernel_eval(u, a, v + b))


def ccr_phase(u, v) -> complex:
    """``exp(-i Im <u, v>)``."""
    return complex(np.exp(-1j * np.vdot(np.asarray(u).ravel(), np.asarray(v).ravel()).imag))


def weyl_tail_bound(norm_u: float, norm_v: float, norm_w: float, cutoff: int) -> float:
    """Analytic bound on the truncation error of ``<e(v), W(u) e(w)>``."""
    n1 = cutoff + 1
    return math.exp(norm_u + norm_v + norm_w) * (norm_u + norm_w) ** n1 / math.factorial(n1)


def weyl_truncation_estimate(norm_sum: float, cutoff: int, sector: int) -> float:
    """Size estimate of ``W(u) W(v)`` truncation leakage seen from sectors ``n <= sector``.

    ``s^(2L) / L!`` with ``s = |u| + |v|`` and ``L = cutoff - sector + 1`` levels
    between the compared sector and the first dropped one.  A heuristic scale,
    not a rigorous bound; it is used only as the tolerance for cutoffs too small
    for the fixed ``1e-6`` threshold.
    """
    levels = cutoff - sector + 1
    return norm_sum ** (2 * levels) / math.factorial(levels)


def exponential_tail(norm_sq: float, cutoff: int) -> float:
    """``sum_{n > N} t^n / n!``, the inner-product mass dropped by truncating ``e(u)``."""
    term, total = 1.0, 0.0
    for n in range(1, cutoff + 1):
        term *= norm_sq / n
    n = cutoff + 1
    while True:
        term *= norm_sq / n
        total += term
        if term < 1e-300 or term < total * 1e-17:
            return total
        n += 1


def _apply_sequence(model: FockModel, ops: Sequence) -> np.ndarray:
    """``A_1 A_2 ... A_k Omega`` for creation matrices ``A_j`` (rightmost applied first)."""
    out = model.vacuum()
    for op in reversed(ops):
        out = op @ out
        if not np.any(out):
            break
    return out


def _state_vectors(model: FockModel, state: tuple[int, ...], images: Sequence) -> tuple[list, float]:
    """Creation matrices for the image modes of a basis state, and the bosonic normalisation."""
    vecs = [images[i] for i in state]
    norm = 1.0
    if model.symmetric:
        for n in model.occupations(state):
            norm *= math.sqrt(math.factorial(n))
    return vecs, norm


def second_quantization(model_in: FockModel, model_out: FockModel, u, tol: float = 1e-10) -> sp.csr_array:
    """Matrix of ``Gamma(U)`` from ``model_in`` to ``model_out`` for an isometry ``U`` of mode spaces."""
    u = np.asarray(u, dtype=complex)
    if model_in.statistics != model_out.statistics:
        raise ValueError("statistics differ")
    if model_in.cutoff != model_out.cutoff and model_in.max_particles > model_out.max_particles:
        raise ValueError("particle cutoffs are incompatible")
    if u.shape != (model_out.m, model_in.m):
        raise ValueError(f"isometry shape {u.shape} does not match modes ({model_out.m}, {model_in.m})")
    defect = np.max(np.abs(u.conj().T @ u - np.eye(model_in.m)), initial=0.0)
    if defect > tol:
        raise ValueError(f"mode map is not isometric (defect {defect:.3e})")
    images = [model_out.creation_matrix(u[:, i]) for i in range(model_in.m)]
    cols = []
    for s in model_in.basis:
        vecs, norm = _state_vectors(model_in, s, images)
        cols.append(_apply_sequence(model_out, vecs) / norm)
    return sp.csr_array(np.column_stack(cols)) if cols else sp.csr_array((model_out.dim, 0))


@dataclass(frozen=True, eq=False)
class FactorizationMap:
    """Isometry ``Gamma(K_1) (x) Gamma(K_2) -> Gamma(K_1 (+) K_2)`` on product basis index ``i1 * dim2 + i2``.

    Product states whose combined particle number exceeds the joint cutoff
    map to zero; ``dropped`` counts them.
    """

    model_1: FockModel
    model_2: FockModel
    joint: FockModel
    matrix: sp.csr_array = field(repr=False)
    dropped: int

    def product_index(self, i1: int, i2: int) -> int:
        return i1 * self.model_2.dim + i2

    def kept_columns(self) -> np.ndarray:
        n1 = self.model_1.particle_numbers
        n2 = self.model_2.particle_numbers
        total = (n1[:, None] + n2[None, :]).ravel()
        return np.flatnonzero(total <= self.joint.max_particles)

    def gram_defect(self) -> float:
        """Deviation of the image Gram matrix from the identity on kept product states."""
        keep = self.kept_columns()
        m = self.matrix[:, keep]
        g = (m.conj().T @ m).toarray()
        return float(np.max(np.abs(g - np.eye(len(keep))), initial=0.0))


def _check_embeddings(joint: FockModel, e1: np.ndarray, e2: np.ndarray, tol: float) -> None:
    cross = np.max(np.abs(e1.conj().T @ e2), initial=0.0)
    if cross > tol:
        raise ValueError(f"embedding ranges are not orthogonal (overlap {cross:.3e})")


def _factorization(model_1, model_2, joint, embed_1, embed_2, kernel_first: bool, tol: float) -> FactorizationMap:
    e1 = np.asarray(embed_1, dtype=complex)
    e2 = np.asarray(embed_2, dtype=complex)
    if e1.shape != (joint.m, model_1.m) or e2.shape != (joint.m, model_2.m):
        raise ValueError("embedding shapes do not match the models")
    _check_embeddings(joint, e1, e2, tol)
    for e, mdl in ((e1, model_1), (e2, model_2)):
        d = np.max(np.abs(e.conj().T @ e - np.eye(mdl.m)), initial=0.0)
        if d > tol:
            raise ValueError(f"embedding is not isometric (defect {d:.3e})")
    c1 = [joint.creation_matrix(e1[:, i]) for i in range(model_1.m)]
    c2 = [joint.creation_matrix(e2[:, i]) for i in range(model_2.m)]
    cols, rows, vals = [], [], []
    dropped = 0
    for i1, s1 in enumerate(model_1.basis):
        v1, n1 = _state_vectors(model_1, s1, c1)
        for i2, s2 in enumerate(model_2.basis):
            if len(s1) + len(s2) > joint.max_particles:
                dropped += 1
                continue
            v2, n2 = _state_vectors(model_2, s2, c2)
            seq = v1 + v2 if kernel_first else v2 + v1
            img = _apply_sequence(joint, seq) / (n1 * n2)
            nz = np.flatnonzero(np.abs(img) > 0)
            col = i1 * model_2.dim + i2
            rows.extend(nz)
            cols.extend([col] * len(nz))
            vals.extend(img[nz])
    mat = sp.csr_array(
        (np.array(vals, dtype=complex), (np.array(rows, dtype=int), np.array(cols, dtype=int))),
        shape=(joint.dim, model_1.dim * model_2.dim),
    )
    return FactorizationMap(model_1, model_2, joint, mat, dropped)


def factorization_symmetric(model_1, model_2, joint, embed_1, embed_2, tol: float = 1e-10) -> FactorizationMap:
    """``e(xi) (x) e(eta) -> e(E_1 xi + E_2 eta)``."""
    if not (model_1.symmetric and model_2.symmetric and joint.symmetric):
        raise ValueError("symmetric factorization needs symmetric models")
    return _factorization(model_1, model_2, joint, embed_1, embed_2, True, tol)


def factorization_antisymmetric(model_1, model_2, joint, embed_1, embed_2, tol: float = 1e-10) -> FactorizationMap:
    """``(xi_1 ^ ... ^ xi_m) (x) (eta_1 ^ ... ^ eta_n) -> E_2 eta_1 ^ ... ^ E_2 eta_n ^ E_1 xi_1 ^ ... ^ E_1 xi_m``.

    The second factor's vectors are wedged first.
    """
    if model_1.symmetric or model_2.symmetric or joint.symmetric:
        raise ValueError("antisymmetric factorization needs antisymmetric models")
    return _factorization(model_1, model_2, joint, embed_1, embed_2, False, tol)


def factorization(model_1, model_2, joint, embed_1, embed_2, tol: float = 1e-10) -> FactorizationMap:
    if joint.symmetric:
        return factorization_symmetric(model_1, model_2, joint, embed_1, embed_2, tol)
    return factorization_antisymmetric(model_1, model_2, joint, embed_1, embed_2, tol)


def parity_operator(model: FockModel, marked) -> FockOperator:
    """``(-1)^{number of particles in marked modes}``, diagonal."""
    if model.symmetric:
        raise ValueError("parity operators are used on the antisymmetric Fock space")
    marked = frozenset(marked)
    unknown = marked - set(model.modes)
    if unknown:
        raise ValueError(f"marked modes not in the model: {sorted(unknown)[:3]}")
    idx = {model.mode_index[m] for m in marked}
    signs = np.array([(-1.0) ** sum(1 for i in s if i in idx) for s in model.basis], dtype=complex)
    return FockOperator(model, sp.diags_array(signs, format="csr"), frozenset())


def inclusion_matrix(sub_modes: Sequence[Hashable], model: FockModel) -> np.ndarray:
    """Mode-space isometry sending each label of ``sub_modes`` to the same label in ``model``."""
    e = np.zeros((model.m, len(sub_modes)), dtype=complex)
    for j, lab in enumerate(sub_modes):
        e[model.mode_index[lab], j] = 1.0
    return e
