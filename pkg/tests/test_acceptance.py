"""One test per acceptance criterion, each at its stated tolerance and runtime budget."""

import contextlib
import io
import re
import time
from fractions import Fraction

import numpy as np

from coneflows import cli
from coneflows.cone_lattice import ConeSpec, HalfSpace, LatticeModule, Window, proper_search
from coneflows.config import named_rng
from coneflows.distinguish import nonconjugacy_witness, properness_subspaces
from coneflows.fock import (
    FockModel,
    anticommutator,
    annihilation,
    ccr_phase,
    creation,
    weyl_kernel_eval,
    weyl_operator,
    weyl_product_kernel_eval,
)
from coneflows.flows import CAR, CCR, FlowModel, decomposable_space, exponential_unit_check, gauge_cocycle_check
from coneflows.isometric_rep import (
    AdditiveCocycle,
    DirectSumShift,
    LatticeShift,
    SparseVec,
    divisibility_check,
    solve_cocycles,
)
from coneflows.linalg_core import op_norm

from oracles import decomposable_count_1param, decomposable_ratio_oracle, set_differences, two_mode_witness_oracle

SEED = 20240601


def in_ball(rng, dim, radius):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return radius * rng.uniform(0.0, 1.0) * v / np.linalg.norm(v)


def on_sphere(rng, dim, radius):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return radius * v / np.linalg.norm(v)


def test_criterion_01_weyl_kernel_level(criterion):
    t0 = time.perf_counter()
    rng = named_rng(SEED, "acceptance-1")
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 9))
        u, v = in_ball(rng, d, 1.0), in_ball(rng, d, 1.0)
        phase = ccr_phase(u, v)
        for _ in range(100):
            a, b = in_ball(rng, d, 1.0), in_ball(rng, d, 1.0)
            lhs = weyl_product_kernel_eval(u, v, a, b)
            rhs = phase * weyl_kernel_eval(u + v, a, b)
            worst = max(worst, abs(lhs - rhs) / abs(rhs))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 5
    criterion(1, ok, f"max relative error {worst:.2e} (<= 1e-12), {dt:.2f} s (< 5 s)")
    assert ok


def test_criterion_02_weyl_matrix_level(criterion):
    t0 = time.perf_counter()
    rng = named_rng(SEED, "acceptance-2")
    model = FockModel("symmetric", range(3), 12)
    low = np.flatnonzero(model.particle_numbers <= 12 // 3)
    full = sector = 0.0
    for _ in range(5):
        u, v = on_sphere(rng, 3, 0.5), on_sphere(rng, 3, 0.5)
        lhs = weyl_operator(model, u).toarray() @ weyl_operator(model, v).toarray()
        diff = lhs - ccr_phase(u, v) * weyl_operator(model, u + v).toarray()
        full = max(full, op_norm(diff))
        sector = max(sector, op_norm(diff[np.ix_(low, low)]))
    dt = time.perf_counter() - t0
    ok = full <= 1e-6 and dt < 60
    criterion(2, ok, f"full-space operator-norm residual {full:.2e} (<= 1e-6), {dt:.2f} s (< 60 s); "
                     f"sectors n <= 4 only: {sector:.2e}")
    assert ok, "truncated Weyl matrices cannot meet the full-space bound; see the decisions ledger"


def test_criterion_03_car_exact(criterion):
    t0 = time.perf_counter()
    m = 6
    model = FockModel("antisymmetric", range(m))
    e = np.eye(m)
    ann = [annihilation(model, e[i]) for i in range(m)]
    cre = [creation(model, e[i]) for i in range(m)]
    eye = np.eye(model.dim)
    mixed = pure = 0.0
    for i in range(m):
        for j in range(m):
            mixed = max(mixed, op_norm(anticommutator(ann[i], cre[j]).toarray() - (i == j) * eye))
            pure = max(pure, op_norm(anticommutator(ann[i], ann[j]).toarray()))
    dt = time.perf_counter() - t0
    ok = mixed <= 1e-12 and pure <= 1e-13 and dt < 10
    criterion(3, ok, f"{{a,a*}} residual {mixed:.1e} (<= 1e-12), {{a,a}} {pure:.1e} (<= 1e-13), {dt:.2f} s (< 10 s)")
    assert ok


def test_criterion_04_flow_laws(criterion):
    t0 = time.perf_counter()
    rep = LatticeShift.one_parameter()

    def sv(**amps):
        return SparseVec({((int(k[1:]),), 0): v for k, v in amps.items()})

    car = FlowModel(rep, CAR, Window((0,), (6,)), None)
    gens = [car.annihilation(sv(p0=1.0)), car.annihilation(sv(p0=0.6, p1=-0.8j)), car.creation(sv(p1=1.0))]
    car_semigroup = max(op_norm((car.flow_apply((1,), car.flow_apply((2,), g)) - car.flow_apply((3,), g)).matrix)
                        for g in gens)
    u = sv(p1=0.5j, p2=0.3)
    car_shift = op_norm((car.flow_apply((2,), car.annihilation(u)) - car.annihilation(car.shift((2,), u))).matrix)

    ccr = FlowModel(rep, CCR, Window((0,), (2,)), 12)
    low = np.flatnonzero(ccr.fock.particle_numbers <= ccr.sector)
    full = sector = 0.0
    for w in [sv(p0=0.4), sv(p0=0.3, p1=0.2j)]:
        diff = (ccr.flow_apply((1,), ccr.weyl(w)) - ccr.weyl(ccr.shift((1,), w))).toarray()
        full, sector = max(full, op_norm(diff)), max(sector, op_norm(diff[np.ix_(low, low)]))
    g = ccr.weyl(sv(p0=0.4))
    diff = (ccr.flow_apply((1,), ccr.flow_apply((1,), g)) - ccr.flow_apply((2,), g)).toarray()
    full, sector = max(full, op_norm(diff)), max(sector, op_norm(diff[np.ix_(low, low)]))
    dt = time.perf_counter() - t0
    ok = car_semigroup <= 1e-12 and car_shift <= 1e-12 and full <= 1e-6 and dt < 60
    criterion(4, ok, f"CAR semigroup {car_semigroup:.1e}, CAR shift {car_shift:.1e} (<= 1e-12); "
                     f"CCR full-space {full:.2e} (<= 1e-6), sectors n <= 4 only: {sector:.1e}; {dt:.2f} s (< 60 s)")
    assert ok, "truncated CCR flow matrices cannot meet the full-space bound; see the decisions ledger"


def test_criterion_05_decomposability(criterion):
    t0 = time.perf_counter()
    rep = LatticeShift.one_parameter()
    ds = decomposable_space(FlowModel(rep, CCR, Window((0,), (2,)), 2), (2,), [(1,)])
    oracle = (1, 2, decomposable_count_1param(2, 2, [1]))
    ratios = {}
    for M in (2, 4, 8, 16):
        d = decomposable_space(FlowModel(rep, CCR, Window((0,), (M - 1,)), 2), (M,))
        ratios[M] = Fraction(d.sector_dims[2], d.sector_full_dims[2])
    good_ratios = all(r == Fraction(2, M + 1) == decomposable_ratio_oracle(M) for M, r in ratios.items())
    dt = time.perf_counter() - t0
    ok = ds.sector_dims == (1, 2, 2) == oracle and good_ratios and dt < 120
    criterion(5, ok, f"sector dims {ds.sector_dims} (oracle {oracle}); n=2 ratios "
                     f"{', '.join(f'M={M}: {r}' for M, r in ratios.items())}; {dt:.2f} s (< 120 s)")
    assert ok


def test_criterion_06_cocycle_space(criterion):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for ks in [(1, 1), (2, 1)]:
        rep = DirectSumShift(ks)
        cs = solve_cocycles(rep)
        divisible = all(divisibility_check(rep, cs, z).divisible for z in [(1, 1), (2, 1), (1, 3)])
        ok &= len(cs) == sum(ks) and divisible
        parts.append(f"{ks}: dim {len(cs)} (expect {sum(ks)}), divisible {divisible}")
    dt = time.perf_counter() - t0
    ok &= dt < 30
    criterion(6, ok, "; ".join(parts) + f"; {dt:.2f} s (< 30 s)")
    assert ok


def test_criterion_07_properness(criterion):
    t0 = time.perf_counter()
    orthant = LatticeModule.of_cone(ConeSpec.orthant(2))
    w = Window.box(2, 3)
    found = {(c.x, c.y): c for c in proper_search(orthant, 1, w)}
    cert = found.get(((1, 0), (0, 1)))
    witnesses_ok = False
    if cert is not None:
        d1, d2 = set_differences(lambda p: p in orthant, cert.x, cert.y, list(w.points()))
        witnesses_ok = cert.t1_witness in d1 and cert.t2_witness in d2

    one_param = [
        (LatticeModule.of_cone(ConeSpec.orthant(1)), Window((0,), (10,))),
        (LatticeModule.of_cone(ConeSpec.orthant(1), (-3,)), Window((-5,), (8,))),
        (LatticeModule(ConeSpec(((2,),)), halfspaces=(HalfSpace((1,), 1),)), Window((-2,), (12,))),
        (LatticeModule(ConeSpec(((-1,),)), halfspaces=(HalfSpace((-1,), -4),)), Window((-10,), (6,))),
    ]
    empty = all(proper_search(a, b, win) == [] for a, win in one_param for b in (1, 2, 3))
    sub_empty = not any(properness_subspaces(LatticeShift.one_parameter(2), (i,), (j,), Window((0,), (10,))).proper
                        for i in range(1, 4) for j in range(1, 4))
    dt = time.perf_counter() - t0
    ok = cert is not None and witnesses_ok and empty and sub_empty and dt < 5
    criterion(7, ok, f"orthant pair (e1, e2) found with verified witnesses: {witnesses_ok}; "
                     f"1-parameter searches empty: {empty and sub_empty}; {dt:.2f} s (< 5 s)")
    assert ok


def test_criterion_08_witness(criterion):
    t0 = time.perf_counter()
    assert two_mode_witness_oracle() == (2.0, 0.0)
    orth = nonconjugacy_witness(LatticeShift(LatticeModule.of_cone(ConeSpec.orthant(2))), 2, Window.box(2, 3))
    full_cutoff = orth.car_cutoff == 16
    ok = (orth.distinguished and full_cutoff and orth.ccr_max_commutator <= 1e-8
          and orth.car_max_anticommutator <= 1e-8 and orth.car_min_commutator >= 1.9)
    ds = nonconjugacy_witness(DirectSumShift((1, 1)), 2)
    ok &= ds.distinguished
    dt = time.perf_counter() - t0
    ok &= dt < 120
    criterion(8, ok, f"orthant {orth.verdict} (ccr {orth.ccr_max_commutator:.1e}, car anti "
                     f"{orth.car_max_anticommutator:.1e}, car min {orth.car_min_commutator:.3f}, "
                     f"cutoff {orth.car_cutoff}); direct sum {ds.verdict}; {dt:.2f} s (< 120 s)")
    assert ok


def test_criterion_09_gauge_cocycle(criterion):
    rep = DirectSumShift((1, 1))
    cs = solve_cocycles(rep)
    rng = named_rng(SEED, "acceptance-9")
    model = FlowModel(rep, CCR, Window((0,), (3,)), 12)
    kernel = closed = 0.0
    mixes = []
    for _ in range(5):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        vals = tuple(a * p + b * q for p, q in zip(cs[0].generator_values, cs[1].generator_values))
        mixes.append(AdditiveCocycle(rep, vals).scaled(0.3))
    for c in mixes:
        for x, y in [((1, 0), (0, 1)), ((2, 1), (1, 2)), ((1, 1), (3, 0))]:
            out = gauge_cocycle_check(model, c, x, y, rng=rng, matrix_level=False)
            kernel = max(kernel, out["kernel_residual"])
    for x, y in [((1, 0), (0, 1)), ((1, 1), (1, 0))]:
        closed = max(closed, exponential_unit_check(model, cs + mixes, x, y)["inner_product_closed_form"])
    ok = kernel <= 1e-12 and closed <= 1e-15
    criterion(9, ok, f"gauge kernel residual {kernel:.1e} (<= 1e-12); unit inner-product law closed form {closed:.1e}")
    assert ok


def test_criterion_10_determinism(criterion, configs_dir):
    commands = ["verify-relations", "cocycles", "divisibility", "decomposables", "proper-search", "witness"]
    configs = ["default.json", "direct_sum.json", "one_param.json", "orthant.json", "degenerate.json"]
    mismatched = []
    runs = 0
    for cfg in configs:
        for cmd in commands:
            texts = []
            for _ in range(2):
                out, err = io.StringIO(), io.StringIO()
                with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
                    rc = cli.main([cmd, "--config", str(configs_dir / cfg)])
                texts.append((rc, re.sub(r'"run": \{[^}]*\}', '"run": {}', out.getvalue()), err.getvalue()))
            runs += 1
            if texts[0] != texts[1]:
                mismatched.append(f"{cmd}:{cfg}")
    ok = not mismatched
    criterion(10, ok, f"{runs} command/config pairs run twice, byte-identical outside the run block"
                      + (f"; mismatches: {mismatched}" if mismatched else ""))
    assert ok
