"""Discrete simplicial cones, lattice modules and set-level properness.

Points are plain tuples of ints.  A cone is the monoid generated by ``d``
linearly independent integer vectors, so membership is a unique rational
solve followed by an integrality and sign test.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

Point = tuple[int, ...]


def _solve_exact(columns: Sequence[Sequence[int]], rhs: Sequence[int]) -> list[Fraction] | None:
    """Solve ``sum_j c_j columns[j] = rhs`` over the rationals; ``None`` if singular."""
    d = len(rhs)
    a = [[Fraction(columns[j][i]) for j in range(d)] + [Fraction(rhs[i])] for i in range(d)]
    for col in range(d):
        pivot = next((r for r in range(col, d) if a[r][col] != 0), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        for r in range(d):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][d] / a[i][i] for i in range(d)]


@dataclass(frozen=True)
class ConeSpec:
    """Simplicial integer cone ``{sum n_j g_j : n_j in N}``."""

    generators: tuple[Point, ...]

    def __post_init__(self):
        gens = tuple(tuple(int(c) for c in g) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        d = len(gens)
        if d == 0:
            raise ValueError("a cone needs at least one generator")
        if any(len(g) != d for g in gens):
            raise ValueError(f"need {d} generators of length {d}, got lengths {[len(g) for g in gens]}")
        if _solve_exact(gens, [0] * d) is None:
            raise ValueError(f"generators {gens} are linearly dependent")

    @classmethod
    def orthant(cls, d: int) -> "ConeSpec":
        return cls(tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))

    @property
    def dim(self) -> int:
        return len(self.generators)

    def coefficients(self, v: Sequence[int]) -> tuple[int, ...] | None:
        """Generator coefficients of ``v`` if ``v`` lies in the cone, else ``None``."""
        if len(v) != self.dim:
            raise ValueError(f"point {tuple(v)} has dimension {len(v)}, cone has {self.dim}")
        sol = _solve_exact(self.generators, v)
        if any(c.denominator != 1 or c < 0 for c in sol):
            return None
        return tuple(int(c) for c in sol)

    def point(self, coefficients: Sequence[int]) -> Point:
        return tuple(
            sum(n * g[i] for n, g in zip(coefficients, self.generators)) for i in range(self.dim)
        )

    def is_interior(self, v: Sequence[int]) -> bool:
        c = self.coefficients(v)
        return c is not None and all(n >= 1 for n in c)

    def to_dict(self) -> dict:
        return {"generators": [list(g) for g in self.generators]}

    @classmethod
    def from_dict(cls, data: dict) -> "ConeSpec":
        return cls(tuple(tuple(g) for g in data["generators"]))


def cone_contains(cone: ConeSpec, v: Sequence[int]) -> bool:
    return cone.coefficients(v) is not None


def _require_in_cone(cone: ConeSpec, x: Sequence[int]) -> tuple[int, ...]:
    c = cone.coefficients(x)
    if c is None:
        raise ValueError(f"{tuple(x)} is not in the cone")
    return c


def add(p: Sequence[int], q: Sequence[int]) -> Point:
    return tuple(a + b for a, b in zip(p, q))


def sub(p: Sequence[int], q: Sequence[int]) -> Point:
    return tuple(a - b for a, b in zip(p, q))


@dataclass(frozen=True)
class Window:
    """Integer box ``[lower, upper]`` (inclusive)."""

    lower: Point
    upper: Point

    def __post_init__(self):
        lo = tuple(int(c) for c in self.lower)
        hi = tuple(int(c) for c in self.upper)
        if len(lo) != len(hi):
            raise ValueError("window bounds have different dimensions")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"window lower {lo} exceeds upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def box(cls, d: int, upper: int, lower: int = 0) -> "Window":
        return cls((lower,) * d, (upper,) * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def __contains__(self, p) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lower, p, self.upper))

    def points(self) -> Iterator[Point]:
        return itertools.product(*(range(a, b + 1) for a, b in zip(self.lower, self.upper)))

    def grown(self, steps: int = 1) -> "Window":
        return Window(self.lower, tuple(b + steps for b in self.upper))

    def covers(self, other: "Window") -> bool:
        return all(a <= c for a, c in zip(self.lower, other.lower)) and all(
            b >= c for b, c in zip(self.upper, other.upper)
        )

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, data: dict) -> "Window":
        return cls(tuple(data["lower"]), tuple(data["upper"]))


@dataclass(frozen=True)
class HalfSpace:
    """Constraint ``<normal, y> >= offset``."""

    normal: Point
    offset: int

    def holds(self, p: Sequence[int]) -> bool:
        return sum(a * c for a, c in zip(self.normal, p)) >= self.offset


@dataclass(frozen=True)
class LatticeModule:
    """Region ``A`` of ``Z^d`` with ``A + P`` contained in ``A``.

    Given either by integer half-spaces or by an explicit point set, in which
    case ``declared_window`` records the box the set was specified in.
    """

    cone: ConeSpec
    halfspaces: tuple[HalfSpace, ...] | None = None
    points: frozenset | None = None
    declared_window: Window | None = None

    def __post_init__(self):
        if (self.halfspaces is None) == (self.points is None):
            raise ValueError("give exactly one of halfspaces or points")
        d = self.cone.dim
        if self.halfspaces is not None:
            hs = tuple(
                h if isinstance(h, HalfSpace) else HalfSpace(tuple(h[0]), int(h[1]))
                for h in self.halfspaces
            )
            hs = tuple(HalfSpace(tuple(int(c) for c in h.normal), int(h.offset)) for h in hs)
            if any(len(h.normal) != d for h in hs):
                raise ValueError("half-space normal has the wrong dimension")
            object.__setattr__(self, "halfspaces", hs)
        else:
            pts = frozenset(tuple(int(c) for c in p) for p in self.points)
            if any(len(p) != d for p in pts):
                raise ValueError("module point has the wrong dimension")
            if not pts:
                raise ValueError("a lattice module must be nonempty")
            object.__setattr__(self, "points", pts)

    @classmethod
    def of_cone(cls, cone: ConeSpec, offset: Sequence[int] | None = None) -> "LatticeModule":
        """The translate ``offset + P`` written as half-spaces of the dual cone."""
        d = cone.dim
        offset = tuple(offset) if offset is not None else (0,) * d
        # rows of G^{-1}, cleared of denominators, are the facet normals
        inv_cols = [_solve_exact(cone.generators, [int(i == k) for i in range(d)]) for k in range(d)]
        hs = []
        for i in range(d):
            row = [inv_cols[k][i] for k in range(d)]
            scale = math.lcm(*(c.denominator for c in row))
            normal = tuple(int(c * scale) for c in row)
            hs.append(HalfSpace(normal, sum(a * c for a, c in zip(normal, offset))))
        return cls(cone, halfspaces=tuple(hs))

    @classmethod
    def from_points(cls, cone: ConeSpec, points: Iterable[Sequence[int]], window: Window) -> "LatticeModule":
        return cls(cone, points=frozenset(tuple(p) for p in points), declared_window=window)

    @property
    def dim(self) -> int:
        return self.cone.dim

    def __contains__(self, p) -> bool:
        if self.halfspaces is not None:
            return all(h.holds(p) for h in self.halfspaces)
        return tuple(p) in self.points

    def points_in(self, w: Window) -> list[Point]:
        return [p for p in w.points() if p in self]

    def to_dict(self) -> dict:
        if self.halfspaces is not None:
            return {
                "halfspaces": [{"normal": list(h.normal), "offset": h.offset} for h in self.halfspaces]
            }
        return {"points": sorted(list(p) for p in self.points), "window": self.declared_window.to_dict()}

    @classmethod
    def from_dict(cls, cone: ConeSpec, data: dict) -> "LatticeModule":
        if "halfspaces" in data:
            return cls(
                cone,
                halfspaces=tuple(HalfSpace(tuple(h["normal"]), int(h["offset"])) for h in data["halfspaces"]),
            )
        return cls.from_points(cone, data["points"], Window.from_dict(data["window"]))


@dataclass(frozen=True)
class ModuleCheck:
    ok: bool
    violation: tuple[Point, Point] | None = None


def module_check(a: LatticeModule, w: Window) -> ModuleCheck:
    """Verify ``A + g`` stays in ``A`` for every generator, as far as ``w`` can see."""
    for p in w.points():
        if p not in a:
            continue
        for g in a.cone.generators:
            q = add(p, g)
            if q in w and q not in a:
                return ModuleCheck(False, (p, g))
    return ModuleCheck(True)


def shifted_region(a: LatticeModule, x: Sequence[int], w: Window) -> frozenset:
    """``(A + x)`` intersected with the window."""
    _require_in_cone(a.cone, x)
    return frozenset(p for p in w.points() if sub(p, x) in a)


@dataclass(frozen=True)
class ProperPairCertificate:
    x: Point
    y: Point
    t1_witness: Point
    t2_witness: Point
    window: Window
    t1_minus_t2: int
    t2_minus_t1: int
    disjoint_verified: bool = True

    def to_dict(self) -> dict:
        return {
            "x": list(self.x),
            "y": list(self.y),
            "t1_witness": list(self.t1_witness),
            "t2_witness": list(self.t2_witness),
            "t1_minus_t2_count": self.t1_minus_t2,
            "t2_minus_t1_count": self.t2_minus_t1,
            "disjoint_verified": self.disjoint_verified,
            "window": self.window.to_dict(),
        }


@dataclass(frozen=True)
class ProperPairFailure:
    x: Point
    y: Point
    window: Window
    reason: str

    def __bool__(self) -> bool:
        return False


def proper_sets(a: LatticeModule, x, y, w: Window) -> tuple[frozenset, frozenset]:
    """``T1 = (A+x) \\ (A+x+y)`` and ``T2 = (A+y) \\ (A+x+y)`` inside ``w``."""
    xy = add(x, y)
    big = shifted_region(a, xy, w)
    t1 = shifted_region(a, x, w) - big
    t2 = shifted_region(a, y, w) - big
    return t1, t2


def proper_pair_check(a: LatticeModule, x, y, w: Window) -> ProperPairCertificate | ProperPairFailure:
    x, y = tuple(x), tuple(y)
    zero = (0,) * a.dim
    for name, p in (("x", x), ("y", y)):
        _require_in_cone(a.cone, p)
        if p == zero:
            raise ValueError(f"{name} must be a nonzero cone element")
    t1, t2 = proper_sets(a, x, y, w)
    d12, d21 = t1 - t2, t2 - t1
    if d12 & d21:
        raise AssertionError("set differences T1\\T2 and T2\\T1 intersect")
    if not d12 and not d21:
        return ProperPairFailure(x, y, w, "T1\\T2 and T2\\T1 empty within window")
    if not d12:
        return ProperPairFailure(x, y, w, "T1\\T2 empty within window")
    if not d21:
        return ProperPairFailure(x, y, w, "T2\\T1 empty within window")
    return ProperPairCertificate(x, y, min(d12), min(d21), w, len(d12), len(d21))


def cone_points(cone: ConeSpec, budget: int, include_zero: bool = False) -> list[Point]:
    """Cone elements whose generator coefficients are all at most ``budget``."""
    pts = []
    for coeffs in itertools.product(range(budget + 1), repeat=cone.dim):
        if include_zero or any(coeffs):
            pts.append(cone.point(coeffs))
    return pts


def proper_search(a: LatticeModule, budget: int, w: Window) -> list[ProperPairCertificate]:
    """All ordered pairs ``(x, y)`` with coefficients ``<= budget`` passing the set test.

    Ordering is lexicographic in the coefficient vectors of ``x`` then ``y``.
    """
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    pts = cone_points(a.cone, budget)
    found = []
    for x in pts:
        for y in pts:
            result = proper_pair_check(a, x, y, w)
            if isinstance(result, ProperPairCertificate):
                found.append(result)
    return found
