"""Independent reference computations used to freeze expected values.

Nothing here imports the package's numerical routines: each oracle re-derives
its answer from first principles (elimination, enumeration, explicit small
matrices) so agreement is a real cross-check.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def pivoted_rank(columns, tol=1e-9) -> int:
    """Rank by Gaussian elimination with full pivoting on a copy of the matrix."""
    a = np.array(columns, dtype=complex, copy=True)
    if a.size == 0:
        return 0
    rows, cols = a.shape
    scale = np.max(np.abs(a)) or 1.0
    rank = 0
    for _ in range(min(rows, cols)):
        sub = np.abs(a[rank:, rank:])
        if sub.size == 0:
            break
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= tol * scale:
            break
        i += rank
        j += rank
        a[[rank, i]] = a[[i, rank]]
        a[:, [rank, j]] = a[:, [j, rank]]
        pivot = a[rank, rank]
        a[rank + 1:] -= np.outer(a[rank + 1:, rank] / pivot, a[rank])
        rank += 1
    return rank


def projector_product_rank(pu: np.ndarray, pw: np.ndarray, tol=1e-8) -> int:
    """Intersection dimension as the multiplicity of eigenvalue 1 of ``P_U P_W P_U``."""
    ev = np.linalg.eigvalsh(pu @ pw @ pu)
    return int(np.sum(ev > 1 - tol))


def solve_integer_2x2(g1, g2, v):
    """Cramer's rule for ``v = a g1 + b g2`` over the rationals."""
    det = g1[0] * g2[1] - g1[1] * g2[0]
    a = Fraction(v[0] * g2[1] - v[1] * g2[0], det)
    b = Fraction(g1[0] * v[1] - g1[1] * v[0], det)
    return a, b


def set_differences(in_a, x, y, window_points):
    """``T1 \\ T2`` and ``T2 \\ T1`` by direct membership tests."""
    def shifted(p, s):
        return in_a(tuple(c - d for c, d in zip(p, s)))

    xy = tuple(a + b for a, b in zip(x, y))
    t1 = {p for p in window_points if shifted(p, x) and not shifted(p, xy)}
    t2 = {p for p in window_points if shifted(p, y) and not shifted(p, xy)}
    return t1 - t2, t2 - t1


def symmetric_occupations(m: int, n: int):
    """All occupation vectors of ``m`` modes with total ``n``."""
    return [occ for occ in itertools.product(range(n + 1), repeat=m) if sum(occ) == n]


def decomposable_count_1param(m_sites: int, n: int, cuts) -> int:
    """Brute-force count of ``n``-particle decomposable states for the one-parameter shift.

    In the occupation basis the product map at a cut ``y`` sends
    ``|occ_left> (x) |occ_right>`` to the joint occupation basis state, so
    ``E_y (x) Omega + Omega (x) E_{x-y}`` is spanned by basis states that live
    entirely on one side of the cut.  The constraints are coordinate
    subspaces; their intersection is spanned by the basis states passing
    every cut.
    """
    count = 0
    for occ in symmetric_occupations(m_sites, n):
        ok = True
        for y in cuts:
            left = any(occ[:y])
            right = any(occ[y:])
            if left and right:
                ok = False
                break
        count += ok
    return count


def decomposable_ratio_oracle(M: int) -> Fraction:
    full = len(symmetric_occupations(M, 2))
    return Fraction(decomposable_count_1param(M, 2, range(1, M)), full)


def jordan_wigner(m: int):
    """Explicit fermionic annihilators on ``(C^2)^{(x) m}``; mode 0 is the leftmost factor."""
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    eye = np.eye(2, dtype=complex)
    ops = []
    for i in range(m):
        factors = [z] * i + [lower] + [eye] * (m - i - 1)
        op = factors[0]
        for f in factors[1:]:
            op = np.kron(op, f)
        ops.append(op)
    return ops


def two_mode_witness_oracle():
    """``(||[g, h]||, ||{g, h}||)`` for ``g = a*(e_0) R``, ``h = a*(e_1) R`` with ``R`` the total parity.

    Frozen value: (2.0, 0.0).
    """
    a0, a1 = jordan_wigner(2)
    parity = np.diag([1.0, -1.0, -1.0, 1.0]).astype(complex)
    g = a0.conj().T @ parity
    h = a1.conj().T @ parity
    comm = np.linalg.norm(g @ h - h @ g, 2)
    anti = np.linalg.norm(g @ h + h @ g, 2)
    return float(comm), float(anti)


def bosonic_ladder(n_max: int) -> np.ndarray:
    """Single-mode annihilator truncated at ``n_max`` quanta (tridiagonal oracle)."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)
