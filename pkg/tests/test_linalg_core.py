import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from coneflows.linalg_core import (
    DEFAULT_TOL,
    Subspace,
    canonical_basis,
    complement_within,
    kernel_of_adjoint,
    op_norm,
    orthonormalize,
    subspace_intersect,
)

from oracles import pivoted_rank, projector_product_rank


def random_isometry(rng, n, k):
    a = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    q, _ = np.linalg.qr(a)
    return q


def random_subspace(rng, n, k):
    return Subspace(n, random_isometry(rng, n, k))


class TestOrthonormalize:
    def test_spanning_pair_is_full(self):
        s = orthonormalize([np.array([1, 0]), np.array([1, 1])])
        assert s.rank == 2
        assert s.same_as(Subspace.full(2))

    def test_collinear(self):
        s = orthonormalize([np.array([1, 0]), np.array([2, 0])])
        assert s.rank == 1
        assert abs(abs(s.basis[0, 0]) - 1) < 1e-12

    def test_fifty_random_vectors_in_c10(self):
        rng = np.random.default_rng(1)
        vecs = rng.normal(size=(10, 50)) + 1j * rng.normal(size=(10, 50))
        # frozen from the elimination oracle
        assert pivoted_rank(vecs) == 10
        s = orthonormalize(vecs)
        assert s.rank == 10
        again = orthonormalize(s.basis)
        assert again.same_as(s)

    def test_zero_input_is_rank_zero(self):
        s = orthonormalize([np.zeros(3), np.zeros(3)])
        assert s.rank == 0 and s.ambient_dim == 3

    def test_empty_with_dim(self):
        assert orthonormalize([], dim=4).rank == 0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatched"):
            orthonormalize([np.zeros(2), np.zeros(3)])


class TestKernelOfAdjoint:
    def test_identity(self):
        assert kernel_of_adjoint(np.eye(4)).rank == 0

    def test_shift_on_c3(self):
        shift = np.zeros((3, 2))
        shift[1, 0] = shift[2, 1] = 1
        k = kernel_of_adjoint(shift)
        assert k.rank == 1
        assert k.same_as(Subspace(3, np.array([[1], [0], [0]])))

    def test_random_isometry_projector_identity(self):
        q = random_isometry(np.random.default_rng(2), 8, 5)
        k = kernel_of_adjoint(q)
        assert k.rank == 3
        assert np.max(np.abs(k.projector() + q @ q.conj().T - np.eye(8))) <= 1e-12

    def test_empty_columns(self):
        assert kernel_of_adjoint(np.zeros((3, 0))).rank == 3


class TestIntersect:
    def test_self(self):
        u = random_subspace(np.random.default_rng(3), 6, 3)
        w = subspace_intersect(u, u)
        assert w.rank == 3
        assert np.max(np.abs(w.projector() - u.projector())) <= 1e-12

    def test_disjoint_axes(self):
        e = np.eye(2)
        assert subspace_intersect(Subspace(2, e[:, :1]), Subspace(2, e[:, 1:])).rank == 0

    def test_c4_overlap(self):
        e = np.eye(4)
        u, w = Subspace(4, e[:, :3]), Subspace(4, e[:, 1:])
        assert projector_product_rank(u.projector(), w.projector()) == 2
        r = subspace_intersect(u, w)
        assert r.rank == 2
        assert r.same_as(Subspace(4, e[:, 1:3]))

    def test_results_lie_in_both(self):
        rng = np.random.default_rng(4)
        common = random_isometry(rng, 9, 2)
        u = orthonormalize(np.hstack([common, rng.normal(size=(9, 2))]))
        w = orthonormalize(np.hstack([common, rng.normal(size=(9, 3))]))
        r = subspace_intersect(u, w)
        assert r.rank == 2
        assert u.residual(r.basis) <= 1e-10 and w.residual(r.basis) <= 1e-10

    def test_ambient_mismatch(self):
        with pytest.raises(ValueError):
            subspace_intersect(Subspace.full(2), Subspace.full(3))


class TestComplement:
    def test_complement_of_ambient(self):
        a = Subspace.full(3)
        assert complement_within(a, a).rank == 0

    def test_axis_in_c2(self):
        e = np.eye(2)
        c = complement_within(Subspace(2, e[:, :1]), Subspace.full(2))
        assert c.same_as(Subspace(2, e[:, 1:]))

    def test_random_rank_additivity(self):
        rng = np.random.default_rng(5)
        amb = random_subspace(rng, 10, 7)
        u = Subspace(10, amb.basis @ random_isometry(rng, 7, 3))
        c = complement_within(u, amb)
        assert c.rank == 4
        assert np.max(np.abs(c.projector() + u.projector() - amb.projector())) <= 1e-11
        assert np.max(np.abs(c.basis.conj().T @ u.basis)) <= 1e-12

    def test_not_contained_reports_residual(self):
        e = np.eye(3)
        with pytest.raises(ValueError, match="max residual"):
            complement_within(Subspace(3, e[:, 2:]), Subspace(3, e[:, :2]))


class TestOpNorm:
    def test_zero(self):
        assert op_norm(np.zeros((3, 3))) == 0.0
        assert op_norm(sp.csr_array((4, 4))) == 0.0

    @pytest.mark.parametrize("n", [1, 5, 40])
    def test_identity(self, n):
        assert op_norm(np.eye(n)) == pytest.approx(1.0, rel=1e-12)
        assert op_norm(sp.identity(n, format="csr")) == pytest.approx(1.0, rel=1e-12)

    def test_nilpotent(self):
        assert op_norm(np.array([[0, 2], [0, 0]])) == pytest.approx(2.0, rel=1e-12)

    def test_sparse_paths_agree_with_dense(self):
        rng = np.random.default_rng(6)
        m = sp.random(300, 300, density=0.02, random_state=7, format="csr")
        assert op_norm(m) == pytest.approx(np.linalg.norm(m.toarray(), 2), rel=1e-9)
        big = sp.random(2500, 2500, density=0.001, random_state=8, format="csr")
        assert op_norm(big) == pytest.approx(np.linalg.norm(big.toarray(), 2), rel=1e-9)
        perm = sp.csr_array((rng.normal(size=50), (rng.permutation(50), np.arange(50))), shape=(50, 50))
        assert op_norm(perm) == pytest.approx(np.max(np.abs(perm.data)), rel=1e-15)


def test_canonical_basis_is_rotation_independent():
    rng = np.random.default_rng(9)
    s = random_subspace(rng, 6, 3)
    rot = random_isometry(rng, 3, 3)
    a = canonical_basis(s)
    b = canonical_basis(Subspace(6, s.basis @ rot))
    assert np.max(np.abs(a.basis - b.basis)) <= 1e-10


def test_canonical_basis_of_coordinate_subspace():
    e = np.eye(5)
    s = Subspace(5, e[:, [1, 3]] @ np.array([[0.6, 0.8j], [0.8, -0.6j]]))
    c = canonical_basis(s)
    assert np.allclose(c.basis, e[:, [1, 3]], atol=1e-12)


def test_default_tolerances():
    assert DEFAULT_TOL.rank == 1e-8 and DEFAULT_TOL.ortho == 1e-10
    with pytest.raises(ValueError):
        DEFAULT_TOL.updated(bogus=1)


# ---- properties

dims = st.integers(min_value=2, max_value=8)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(n=dims, seed=seeds, data=st.data())
def test_orthonormality_of_computed_subspaces(n, seed, data):
    rng = np.random.default_rng(seed)
    k = data.draw(st.integers(min_value=1, max_value=2 * n))
    vecs = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    s = orthonormalize(vecs)
    assert s.orthonormality_error() <= 1e-10
    assert s.rank == pivoted_rank(vecs)


@settings(max_examples=40, deadline=None)
@given(n=dims, seed=seeds, data=st.data())
def test_double_complement(n, seed, data):
    rng = np.random.default_rng(seed)
    ka = data.draw(st.integers(min_value=1, max_value=n))
    ku = data.draw(st.integers(min_value=0, max_value=ka))
    amb = random_subspace(rng, n, ka)
    u = Subspace(n, amb.basis @ random_isometry(rng, ka, ku)) if ku else Subspace.zero(n)
    cc = complement_within(complement_within(u, amb), amb)
    assert np.max(np.abs(cc.projector() - u.projector()), initial=0.0) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(n=dims, seed=seeds, data=st.data())
def test_intersect_symmetric(n, seed, data):
    rng = np.random.default_rng(seed)
    kc = data.draw(st.integers(min_value=0, max_value=n // 2))
    common = random_isometry(rng, n, kc) if kc else np.zeros((n, 0))
    extra_u = data.draw(st.integers(min_value=0, max_value=n - kc))
    extra_w = data.draw(st.integers(min_value=0, max_value=n - kc))
    u = orthonormalize(np.hstack([common, rng.normal(size=(n, extra_u))]), dim=n)
    w = orthonormalize(np.hstack([common, rng.normal(size=(n, extra_w))]), dim=n)
    a, b = subspace_intersect(u, w), subspace_intersect(w, u)
    assert a.rank == b.rank
    assert np.max(np.abs(a.projector() - b.projector()), initial=0.0) <= 1e-9
    assert a.rank == projector_product_rank(u.projector(), w.projector())


@settings(max_examples=40, deadline=None)
@given(seed=seeds, data=st.data())
def test_kernel_of_isometry_projector(seed, data):
    rng = np.random.default_rng(seed)
    n = data.draw(st.integers(min_value=1, max_value=9))
    k = data.draw(st.integers(min_value=0, max_value=n))
    q = random_isometry(rng, n, k) if k else np.zeros((n, 0))
    ker = kernel_of_adjoint(q)
    assert np.max(np.abs(ker.projector() - (np.eye(n) - q @ q.conj().T))) <= 1e-10
