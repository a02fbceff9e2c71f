"""Properness of a pair ``(x, y)`` and the witness separating CCR from CAR flows.

With ``K_x = Ker(V_x^*)`` both ``V_x(K_y)`` and ``V_y(K_x)`` sit inside
``K_{x+y}``.  Removing their common part ``core`` leaves ``U1`` and ``U2``; a
pair is proper when both are nonzero and orthogonal.  For such a pair the
bosonic generators built on ``U1`` and ``U2`` commute, while the fermionic
ones (twisted by parity operators) anticommute, which no cocycle conjugacy
can reconcile.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cone_lattice import (
    Window,
    add,
    cone_points,
    proper_search,
    proper_sets,
)
from .fock import (
    ANTISYMMETRIC,
    SYMMETRIC,
    FockModel,
    FockOperator,
    annihilation,
    creation,
    parity_operator,
    second_quantization,
    weyl_operator,
)
from .isometric_rep import DirectSumShift, IsometricRep, LatticeShift, SparseVec
from .linalg_core import (
    DEFAULT_TOL,
    Subspace,
    Tolerances,
    canonical_basis,
    complement_within,
    op_norm,
    orthonormalize,
    subspace_intersect,
)


class CrossCheckError(RuntimeError):
    """Set-level and subspace-level properness disagree."""


class NotProperError(ValueError):
    """Generators were requested for a pair that is not proper."""


@dataclass(frozen=True, eq=False)
class PropernessSubspaces:
    x: tuple
    y: tuple
    modes: tuple = field(repr=False)
    vx_ky: Subspace = field(repr=False)
    vy_kx: Subspace = field(repr=False)
    core: Subspace = field(repr=False)
    u1: Subspace = field(repr=False)
    u2: Subspace = field(repr=False)
    orthogonality_defect: float
    exact: bool
    tol_ortho: float = DEFAULT_TOL.ortho

    @property
    def orthogonal(self) -> bool:
        return self.orthogonality_defect <= self.tol_ortho

    @property
    def proper(self) -> bool:
        return self.u1.rank > 0 and self.u2.rank > 0 and self.orthogonal

    def failure_reason(self) -> str | None:
        if self.u1.rank == 0 and self.u2.rank == 0:
            return "U1 and U2 are zero"
        if self.u1.rank == 0:
            return "U1 is zero"
        if self.u2.rank == 0:
            return "U2 is zero"
        if not self.orthogonal:
            return f"U1 and U2 are not orthogonal (overlap {self.orthogonality_defect:.3e})"
        return None

    def dims(self) -> dict:
        return {
            "kernel": len(self.modes),
            "vx_ky": self.vx_ky.rank,
            "vy_kx": self.vy_kx.rank,
            "core": self.core.rank,
            "u1": self.u1.rank,
            "u2": self.u2.rank,
        }


def _range_projection_matrix(rep: IsometricRep, x, modes) -> np.ndarray:
    index = {m: i for i, m in enumerate(modes)}
    p = np.zeros((len(modes), len(modes)), dtype=complex)
    for j, m in enumerate(modes):
        for k, v in rep.range_projection(x, SparseVec.delta(m)).items():
            if k in index:
                p[index[k], j] = v
    return p


def properness_subspaces(rep: IsometricRep, x, y, w: Window | None = None,
                         tol: Tolerances = DEFAULT_TOL) -> PropernessSubspaces:
    """``V_x(K_y)``, ``V_y(K_x)``, their intersection and the two complements, in ``K_{x+y}`` coordinates.

    On ``K_{x+y}`` the range projection ``V_x V_x^*`` has range exactly
    ``V_x(K_y)``, so each side is read off a projection matrix.  For lattice
    shifts the dimensions are cross-checked against the set computation.
    """
    x, y = tuple(x), tuple(y)
    xy = add(x, y)
    km = rep.kernel_modes(xy, w)
    modes = km.modes
    n = len(modes)
    vx_ky = orthonormalize(_range_projection_matrix(rep, x, modes), dim=n, tol=tol)
    vy_kx = orthonormalize(_range_projection_matrix(rep, y, modes), dim=n, tol=tol)
    core = subspace_intersect(vx_ky, vy_kx, tol)
    u1 = canonical_basis(complement_within(core, vx_ky, tol), tol)
    u2 = canonical_basis(complement_within(core, vy_kx, tol), tol)
    ortho = float(np.max(np.abs(u1.basis.conj().T @ u2.basis), initial=0.0))
    out = PropernessSubspaces(x, y, modes, vx_ky, vy_kx, core, u1, u2, ortho, km.exact, tol.ortho)
    if isinstance(rep, LatticeShift) and w is not None:
        t1, t2 = proper_sets(rep.module, x, y, w)
        k = rep.multiplicity
        expected = (len(t1 - t2) * k, len(t2 - t1) * k)
        if (u1.rank, u2.rank) != expected:
            raise CrossCheckError(
                f"subspace dims (U1, U2) = {(u1.rank, u2.rank)} disagree with set counts {expected} at x={x}, y={y}"
            )
    return out


# ---- generators


@dataclass(frozen=True, eq=False)
class GeneratorFamilies:
    flavor: str
    model: object = field(repr=False)
    family_1: tuple = field(repr=False)
    family_2: tuple = field(repr=False)
    twist: FockOperator | None = field(default=None, repr=False)
    marked: dict = field(default_factory=dict)


def _car_modes(rep: IsometricRep, xy, w: Window | None) -> tuple:
    km = rep.kernel_modes(xy, w)
    if isinstance(rep, DirectSumShift) and w is None:
        depth = max(rep.cone.coefficients(xy)) + 1
        w = Window((0,), (depth,))
    window_modes = rep.modes_in(w)
    seen = set(km.modes)
    extra = [m for m in window_modes if m not in seen and rep.unshift_mode(xy, m) is not None]
    return tuple(km.modes) + tuple(extra)


def _embed(sub_modes, coords: np.ndarray, model: FockModel) -> np.ndarray:
    out = np.zeros(model.m, dtype=complex)
    for m, c in zip(sub_modes, coords):
        out[model.mode_index[m]] = c
    return out


def relative_commutant_generators(rep: IsometricRep, subspaces: PropernessSubspaces, flavor: str,
                                  w: Window | None = None, cutoff: int | None = None) -> GeneratorFamilies:
    """Generator families attached to ``U1`` and ``U2``.

    CAR: ``a#(xi) R_{x+y} R_{x,y}`` on the fermionic Fock space of the window
    modes, ``R_{x+y}`` the parity of the range modes ``V_{x+y}K`` and
    ``R_{x,y}`` the parity of the core.  CCR: ``W(xi)`` on the factor
    ``Gamma_s(U1)`` and ``W(eta)`` on ``Gamma_s(U2)`` of the factorized model
    ``Gamma_s(U1) (x) Gamma_s(U2)`` (default cutoff 2 per factor).
    """
    if not subspaces.proper:
        raise NotProperError(f"pair {subspaces.x}, {subspaces.y} is not proper: {subspaces.failure_reason()}")
    s = subspaces
    if flavor == "CAR":
        xy = add(s.x, s.y)
        modes = _car_modes(rep, xy, w)
        model = FockModel(ANTISYMMETRIC, modes, cutoff if cutoff is not None else len(modes))
        range_marked = [m for m in modes if rep.unshift_mode(xy, m) is not None]
        core_modes = [s.modes[i] for i in np.flatnonzero(np.abs(s.core.projector().diagonal()) > 1 - 1e-9)]
        if s.core.rank == len(core_modes):
            core_parity = parity_operator(model, core_modes)
        else:
            # core not spanned by modes: second-quantize the reflection 1 - 2 P_core
            refl = np.eye(model.m, dtype=complex)
            idx = [model.mode_index[m] for m in s.modes]
            refl[np.ix_(idx, idx)] -= 2 * s.core.projector()
            core_parity = FockOperator(model, second_quantization(model, model, refl), frozenset(s.modes))
            core_modes = []
        twist = parity_operator(model, range_marked) @ core_parity
        fams = []
        for u in (s.u1, s.u2):
            fam = []
            for xi in u.basis.T:
                f = _embed(s.modes, xi, model)
                fam.append(annihilation(model, f) @ twist)
                fam.append(creation(model, f) @ twist)
            fams.append(tuple(fam))
        marked = {"range_parity": [_mode_json(m) for m in range_marked],
                  "core_parity": [_mode_json(m) for m in core_modes],
                  "core_rank": s.core.rank}
        return GeneratorFamilies("CAR", model, fams[0], fams[1], twist, marked)
    if flavor == "CCR":
        n = 2 if cutoff is None else cutoff
        m1 = FockModel(SYMMETRIC, [("u1", i) for i in range(s.u1.rank)], n)
        m2 = FockModel(SYMMETRIC, [("u2", i) for i in range(s.u2.rank)], n)
        eye1 = sp.identity(m1.dim, dtype=complex, format="csr")
        eye2 = sp.identity(m2.dim, dtype=complex, format="csr")
        joint = FockModel(SYMMETRIC, list(m1.modes) + list(m2.modes), 2 * n)
        f1 = tuple(sp.kron(sp.csr_array(weyl_operator(m1, e).toarray()), eye2, format="csr")
                   for e in np.eye(s.u1.rank))
        f2 = tuple(sp.kron(eye1, sp.csr_array(weyl_operator(m2, e).toarray()), format="csr")
                   for e in np.eye(s.u2.rank))
        return GeneratorFamilies("CCR", (m1, m2, joint), f1, f2, None, {})
    raise ValueError(f"unknown flavor {flavor!r}")


def _mode_json(m):
    site, ch = m
    return [list(site), ch]


# ---- commutation report


@dataclass(frozen=True)
class CommutationReport:
    max_commutator: float
    max_anticommutator: float
    min_nonzero_commutator: float
    pairs: int


def _mat(g):
    return g.matrix if isinstance(g, FockOperator) else g


def commutation_report(family_1, family_2, tol: Tolerances = DEFAULT_TOL) -> CommutationReport:
    """Exhaustive pairwise ``||[g, h]||`` and ``||{g, h}||``.

    The minimum commutator runs over pairs with ``||g h|| > tol.zero``, so
    products that vanish identically (for example ``a*(xi) a*(xi)``) do not
    count.
    """
    max_c = max_a = 0.0
    min_c = np.inf
    pairs = 0
    for g in family_1:
        for h in family_2:
            gm, hm = _mat(g), _mat(h)
            gh, hg = gm @ hm, hm @ gm
            c, a = op_norm(gh - hg), op_norm(gh + hg)
            max_c, max_a = max(max_c, c), max(max_a, a)
            if op_norm(gh) > tol.zero:
                min_c = min(min_c, c)
            pairs += 1
    return CommutationReport(max_c, max_a, float(min_c) if np.isfinite(min_c) else 0.0, pairs)


def kernel_level_ccr_commutator(u1: Subspace, u2: Subspace) -> float:
    """``max ||[W(xi), W(eta)]|| = 2 |sin Im<xi, eta>|`` over basis pairs, exact for the CCR."""
    if u1.rank == 0 or u2.rank == 0:
        return 0.0
    g = u1.basis.conj().T @ u2.basis
    return float(np.max(2 * np.abs(np.sin(g.imag))))


# ---- witness


@dataclass(frozen=True)
class WitnessReport:
    pair: tuple | None
    verdict: str
    reason: str | None
    ccr_max_commutator: float | None = None
    ccr_kernel_commutator: float | None = None
    car_min_commutator: float | None = None
    car_max_anticommutator: float | None = None
    car_max_commutator: float | None = None
    dims: dict = field(default_factory=dict)
    certificate: dict | None = None
    parity: dict = field(default_factory=dict)
    window: dict | None = None
    car_cutoff: int | None = None
    ccr_cutoff: int | None = None
    candidates_tried: int = 0
    tol_zero: float = DEFAULT_TOL.zero
    tol_pos: float = DEFAULT_TOL.positive
    exact: bool = False

    @property
    def distinguished(self) -> bool:
        return self.verdict == "distinguished"

    def to_dict(self) -> dict:
        return {
            "pair": None if self.pair is None else [list(p) for p in self.pair],
            "verdict": self.verdict,
            "reason": self.reason,
            "ccr_max_commutator": self.ccr_max_commutator,
            "ccr_kernel_commutator": self.ccr_kernel_commutator,
            "car_min_commutator": self.car_min_commutator,
            "car_max_anticommutator": self.car_max_anticommutator,
            "car_max_commutator": self.car_max_commutator,
            "dims": dict(self.dims),
            "certificate": self.certificate,
            "parity": self.parity,
            "window": self.window,
            "car_cutoff": self.car_cutoff,
            "ccr_cutoff": self.ccr_cutoff,
            "candidates_tried": self.candidates_tried,
            "tol_zero": self.tol_zero,
            "tol_pos": self.tol_pos,
            "exact": self.exact,
        }


def _candidates(rep: IsometricRep, budget: int, w: Window | None):
    if isinstance(rep, LatticeShift):
        if w is None:
            raise ValueError("a lattice shift witness search needs a window")
        for cert in proper_search(rep.module, budget, w):
            yield cert.x, cert.y, cert
        return
    pts = cone_points(rep.cone, budget)
    for x in pts:
        for y in pts:
            yield x, y, None


def nonconjugacy_witness(rep: IsometricRep, budget: int, w: Window | None = None, car_cutoff: int | None = None,
                         ccr_cutoff: int = 2, tol: Tolerances = DEFAULT_TOL) -> WitnessReport:
    """Search for a proper pair, build both generator families and compare their (anti)commutators."""
    win = None if w is None else w.to_dict()
    common = {"window": win, "tol_zero": tol.zero, "tol_pos": tol.positive}
    if budget <= 0:
        return WitnessReport(None, "inconclusive", "empty search", **common)
    tried = 0
    found = None
    for x, y, cert in _candidates(rep, budget, w):
        tried += 1
        subs = properness_subspaces(rep, x, y, w, tol)
        if subs.proper:
            found = (subs, cert)
            break
    if found is None:
        return WitnessReport(None, "inconclusive", "no proper pair", candidates_tried=tried, **common)
    subs, cert = found
    car = relative_commutant_generators(rep, subs, "CAR", w, car_cutoff)
    ccr = relative_commutant_generators(rep, subs, "CCR", w, ccr_cutoff)
    car_rep = commutation_report(car.family_1, car.family_2, tol)
    ccr_rep = commutation_report(ccr.family_1, ccr.family_2, tol)
    kernel = kernel_level_ccr_commutator(subs.u1, subs.u2)
    ccr_max = max(ccr_rep.max_commutator, kernel)
    ok = (ccr_max <= tol.zero and car_rep.min_nonzero_commutator >= tol.positive
          and car_rep.max_anticommutator <= tol.zero)
    return WitnessReport(
        pair=(subs.x, subs.y),
        verdict="distinguished" if ok else "inconclusive",
        reason=None if ok else "commutation thresholds not met",
        ccr_max_commutator=ccr_max,
        ccr_kernel_commutator=kernel,
        car_min_commutator=car_rep.min_nonzero_commutator,
        car_max_anticommutator=car_rep.max_anticommutator,
        car_max_commutator=car_rep.max_commutator,
        dims=subs.dims(),
        certificate=None if cert is None else cert.to_dict(),
        parity=car.marked,
        car_cutoff=car.model.cutoff,
        ccr_cutoff=ccr.model[0].cutoff,
        candidates_tried=tried,
        exact=subs.exact,
        **common,
    )
