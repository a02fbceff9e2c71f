"""Command-line entry points.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 internal cross-check violation.
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from .cone_lattice import Window, add, cone_points, proper_search
from .config import CONFIG_SCHEMA, REPORT_SCHEMA, ConfigError, Setup, build, config_point, load_config
from .distinguish import CrossCheckError, nonconjugacy_witness, properness_subspaces
from .flows import CCR, FlowModel, WindowError, decomposable_space, refinement_table
from .fock import (
    ANTISYMMETRIC,
    SYMMETRIC,
    FockModel,
    annihilation,
    anticommutator,
    ccr_phase,
    commutator,
    creation,
    exponential_tail,
    exponential_vector,
    identity,
    weyl_kernel_eval,
    weyl_operator,
    weyl_product_kernel_eval,
    weyl_truncation_estimate,
)
from .isometric_rep import LatticeShift, divisibility_check, solve_cocycles, stabilized_cocycle_dimension
from .linalg_core import op_norm
from .reports import RunReport, check_eq, check_ge, check_le, dumps, info

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CROSSCHECK = 0, 1, 2, 3


def ball_vector(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    """Random complex vector with norm uniform in ``[0, radius]``."""
    g = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return g / np.linalg.norm(g) * radius * rng.uniform()


def _sphere_vector(rng, dim, radius):
    g = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return g / np.linalg.norm(g) * radius


def _require_window(setup: Setup) -> Window | None:
    if isinstance(setup.rep, LatticeShift) and setup.window is None:
        raise ConfigError("$.window", "a lattice shift needs a window")
    return setup.window


# ---- verify-relations


def weyl_kernel_residual(rng, max_dim=8, pairs=100, points=100) -> float:
    """Largest relative error of ``W(u)W(v) = e^{-i Im<u,v>} W(u+v)`` between exponential vectors."""
    worst = 0.0
    for _ in range(pairs):
        d = int(rng.integers(1, max_dim + 1))
        u, v = ball_vector(rng, d, 1.0), ball_vector(rng, d, 1.0)
        for _ in range(points):
            a, b = ball_vector(rng, d, 1.0), ball_vector(rng, d, 1.0)
            lhs = weyl_product_kernel_eval(u, v, a, b)
            rhs = ccr_phase(u, v) * weyl_kernel_eval(u + v, a, b)
            worst = max(worst, abs(lhs - rhs) / abs(rhs))
    return worst


def weyl_matrix_residuals(rng, modes=3, cutoff=12, norm=0.5, trials=5, sector_divisor=3) -> tuple[float, float]:
    """``(sector-compressed, full)`` operator-norm residuals of the Weyl relation on truncated matrices."""
    model = FockModel(SYMMETRIC, range(modes), cutoff)
    p = model.sector_projector(cutoff // sector_divisor).toarray()
    sector = full = 0.0
    for _ in range(trials):
        u, v = _sphere_vector(rng, modes, norm), _sphere_vector(rng, modes, norm)
        r = (weyl_operator(model, u) @ weyl_operator(model, v)).toarray()
        r = r - ccr_phase(u, v) * weyl_operator(model, u + v).toarray()
        sector = max(sector, op_norm(p @ r @ p))
        full = max(full, op_norm(r))
    return sector, full


def car_relation_defects(modes: int) -> tuple[float, float]:
    """``max ||{a_i, a_j^*} - delta_ij||`` and ``max ||{a_i, a_j}||`` over all basis pairs."""
    model = FockModel(ANTISYMMETRIC, range(modes))
    eye = np.eye(modes)
    one = identity(model)
    ann = [annihilation(model, e) for e in eye]
    cre = [creation(model, e) for e in eye]
    mixed = pure = 0.0
    for i in range(modes):
        for j in range(modes):
            mixed = max(mixed, (anticommutator(ann[i], cre[j]) - one * float(i == j)).norm())
            pure = max(pure, anticommutator(ann[i], ann[j]).norm())
    return mixed, pure


def cmd_verify_relations(setup: Setup, report: RunReport) -> None:
    f = setup.config.get("fock", {})
    tol = setup.tol
    kdim, kp, kq = f.get("kernel_dim", 8), f.get("kernel_pairs", 100), f.get("kernel_points", 100)
    res = weyl_kernel_residual(setup.rng("weyl-kernel"), kdim, kp, kq)
    report.add(check_le("weyl_relation_kernel", res, 1e-12,
                        {"max_dim": kdim, "pairs": kp, "points": kq, "max_norm": 1.0}))

    m = f.get("modes", 3)
    n = f.get("cutoff", setup.config.get("cutoff", 12))
    norm = f.get("norm", 0.5)
    trials = f.get("matrix_trials", 5)
    k = n // tol.sector_divisor
    sector_res, full_res = weyl_matrix_residuals(setup.rng("weyl-matrix"), m, n, norm, trials, tol.sector_divisor)
    threshold = 1e-6 if n >= 12 else max(1e-6, weyl_truncation_estimate(2 * norm, n, k))
    inputs = {"modes": m, "cutoff": n, "norm": norm, "trials": trials, "sector": k}
    report.add(
        check_le("weyl_relation_matrix_sector", sector_res, threshold, inputs),
        info("weyl_relation_matrix_full_space", full_res, inputs, exact=False),
    )

    bos = FockModel(SYMMETRIC, range(m), n)
    p = bos.sector_projector(n - 1)
    worst = 0.0
    for i in range(m):
        for j in range(m):
            e_i, e_j = np.eye(m)[i], np.eye(m)[j]
            c = commutator(annihilation(bos, e_i), creation(bos, e_j)) - identity(bos) * float(i == j)
            worst = max(worst, op_norm(p @ c.matrix @ p))
    report.add(check_le("ccr_commutator_below_cutoff", worst, 1e-12, {"modes": m, "cutoff": n, "sector": n - 1},
                        exact=True))

    fm = f.get("fermion_modes", 4)
    mixed, pure = car_relation_defects(fm)
    report.add(
        check_le("car_anticommutator_mixed", mixed, 1e-12, {"modes": fm}, exact=True),
        check_le("car_anticommutator_pure", pure, 1e-13, {"modes": fm}, exact=True),
    )

    rng = setup.rng("exponential-vectors")
    worst, bound = 0.0, 0.0
    for _ in range(trials):
        u, v = ball_vector(rng, m, norm), ball_vector(rng, m, norm)
        got = np.vdot(exponential_vector(bos, u), exponential_vector(bos, v))
        err = abs(got - np.exp(np.vdot(u, v)))
        tail = exponential_tail(float(np.linalg.norm(u) * np.linalg.norm(v)), n)
        worst, bound = max(worst, err - tail), max(bound, tail)
    report.add(check_le("exponential_inner_product_beyond_tail", worst, 1e-12,
                        {"modes": m, "cutoff": n, "max_tail": bound}))


# ---- cocycles and divisibility


def _z_points(setup: Setup) -> list:
    zs = setup.config.get("points", {}).get("z")
    if zs is None:
        total = (0,) * setup.cone.dim
        for g in setup.cone.generators:
            total = add(total, g)
        zs = [total]
    out = []
    for i, z in enumerate(zs):
        if setup.cone.coefficients(z) is None:
            raise ConfigError(f"$.points.z[{i}]", f"{list(z)} is not in the cone")
        out.append(tuple(z))
    return out


def _cocycle_section(setup: Setup, report: RunReport):
    window = _require_window(setup)
    cocycles = solve_cocycles(setup.rep, window, setup.tol)
    exact = all(c.exact for c in cocycles) if cocycles else all(
        setup.rep.kernel_modes(g, window).exact for g in setup.cone.generators
    )
    stab = stabilized_cocycle_dimension(setup.rep, window)
    defect = max((c.compatibility_defect() for c in cocycles), default=0.0)
    report.add(
        info("cocycle_dimension", len(cocycles), {"window": None if window is None else window.to_dict()}, exact),
        info("cocycle_dimension_grown_window", stab["grown_dimension"], {}, exact),
        check_le("cocycle_compatibility_defect", defect, 1e-12, {"cocycles": len(cocycles)}, exact=True),
    )
    report.results["cocycles"] = {
        "dimension": len(cocycles),
        "vacuous": len(cocycles) == 0,
        "window_stable": stab["stable"],
        "basis": [c.to_json() for c in cocycles],
    }
    return cocycles, window


def cmd_cocycles(setup: Setup, report: RunReport) -> None:
    cocycles, window = _cocycle_section(setup, report)
    div = []
    for z in _z_points(setup):
        r = divisibility_check(setup.rep, cocycles, z, window, setup.tol)
        report.add(info("divisible", r.divisible, {"z": list(z)}, r.exact))
        div.append(r.to_dict())
    report.results["divisibility"] = div


def cmd_divisibility(setup: Setup, report: RunReport) -> None:
    cocycles, window = _cocycle_section(setup, report)
    div = []
    for z in _z_points(setup):
        r = divisibility_check(setup.rep, cocycles, z, window, setup.tol)
        report.add(
            check_eq("divisible", r.divisible, True, {"z": list(z)}, r.exact),
            info("span_rank", r.span_rank, {"z": list(z), "kernel_dim": r.kernel_dim}, r.exact),
        )
        div.append(r.to_dict())
    report.results["divisibility"] = div


# ---- decomposables


def cmd_decomposables(setup: Setup, report: RunReport) -> None:
    window = _require_window(setup)
    dec = setup.config.get("decomposables", {})
    flavor = dec.get("flavor", CCR)
    cutoff = setup.config.get("cutoff", 2)
    g0 = setup.cone.generators[0]
    x = config_point(setup, "x", add(g0, g0), section="decomposables")
    subs = dec.get("subdivisions")
    if subs is not None:
        for i, y in enumerate(subs):
            if setup.cone.coefficients(y) is None:
                raise ConfigError(f"$.decomposables.subdivisions[{i}]", f"{list(y)} is not in the cone")
    model = FlowModel(setup.rep, flavor, window, cutoff, setup.tol)
    try:
        ds = decomposable_space(model, x, subs, tol=setup.tol)
    except ValueError as exc:
        raise ConfigError("$.decomposables", str(exc)) from exc
    inputs = {"x": list(x), "flavor": flavor, "cutoff": cutoff}
    for n, (dn, fn) in enumerate(zip(ds.sector_dims, ds.sector_full_dims)):
        report.add(info(f"decomposable_dim_sector_{n}", dn, dict(inputs, sector=n, full_dim=fn), ds.exact))
    kernel_dim = model.fiber(x).fock.m
    report.add(
        check_eq("vacuum_contained", ds.sector_dims[0] if ds.sector_dims else 0, 1, inputs),
        check_eq("one_particle_contained", ds.sector_dims[1] if len(ds.sector_dims) > 1 else 0,
                 kernel_dim if cutoff >= 1 else 0, inputs),
    )
    if not ds.vacuous:
        mono = decomposable_space(model, x, subs, by_sector=False, tol=setup.tol)
        report.add(check_eq("sector_and_monolithic_agree", mono.sector_dims == ds.sector_dims, True, inputs))
    report.results["decomposables"] = ds.to_dict()

    ms = dec.get("refinement", [])
    if ms:
        rep = setup.rep
        if not (isinstance(rep, LatticeShift) and setup.cone.dim == 1):
            raise ConfigError("$.decomposables.refinement", "refinement runs on a one-parameter lattice shift")
        rows = refinement_table(lambda: rep, ms, cutoff=2, flavor=flavor)
        for row in rows:
            dims, full = row["sector_dims"], row["sector_full_dims"]
            ratio = Fraction(dims[2], full[2]) if len(dims) > 2 and full[2] else None
            row["ratio_2"] = None if ratio is None else str(ratio)
            if rep.multiplicity == 1 and flavor == CCR and ratio is not None:
                report.add(check_eq("refinement_ratio_2", str(ratio), str(Fraction(2, row["M"] + 1)), {"M": row["M"]}))
            else:
                report.add(info("refinement_ratio_2", row["ratio_2"], {"M": row["M"]}))
            row.pop("ratios")
        report.results["refinement"] = rows


# ---- properness and witness


def cmd_proper_search(setup: Setup, report: RunReport) -> None:
    window = _require_window(setup)
    budget = setup.config.get("budget", 1)
    rep = setup.rep
    found = []
    if isinstance(rep, LatticeShift):
        for cert in proper_search(rep.module, budget, window):
            subs = properness_subspaces(rep, cert.x, cert.y, window, setup.tol)  # raises on disagreement
            item = cert.to_dict()
            item["dims"] = subs.dims()
            item["subspace_proper"] = subs.proper
            found.append(item)
    else:
        pts = cone_points(setup.cone, budget)
        for x in pts:
            for y in pts:
                subs = properness_subspaces(rep, x, y, window, setup.tol)
                if subs.proper:
                    found.append({"x": list(x), "y": list(y), "dims": subs.dims(), "subspace_proper": True})
    report.add(
        info("proper_pairs_found", len(found), {"budget": budget}),
        check_eq("set_and_subspace_agree", all(f["subspace_proper"] for f in found), True, {"budget": budget}),
    )
    report.results["proper_pairs"] = found


def cmd_witness(setup: Setup, report: RunReport) -> None:
    window = _require_window(setup)
    budget = setup.config.get("budget", 1)
    wcfg = setup.config.get("witness", {})
    w = nonconjugacy_witness(setup.rep, budget, window, wcfg.get("car_cutoff"), wcfg.get("ccr_cutoff", 2), setup.tol)
    d = w.to_dict()
    floats = ("ccr_max_commutator", "ccr_kernel_commutator", "car_min_commutator",
              "car_max_anticommutator", "car_max_commutator")
    for key in floats:
        d.pop(key)
    d.pop("tol_zero")
    d.pop("tol_pos")
    if w.pair is not None:
        inputs = {"pair": [list(p) for p in w.pair], "car_cutoff": w.car_cutoff, "ccr_cutoff": w.ccr_cutoff}
        report.add(
            check_le("ccr_max_commutator", w.ccr_max_commutator, setup.tol.zero, inputs),
            info("ccr_kernel_commutator", w.ccr_kernel_commutator, inputs, exact=False),
            check_le("car_max_anticommutator", w.car_max_anticommutator, setup.tol.zero, inputs),
            check_ge("car_min_commutator", w.car_min_commutator, setup.tol.positive, inputs),
            info("car_max_commutator", w.car_max_commutator, inputs, exact=False),
        )
    report.add(info("verdict", w.verdict, {"budget": budget, "reason": w.reason}, w.exact))
    report.results["witness"] = d


COMMANDS = {
    "verify-relations": (cmd_verify_relations, "Weyl, CCR and CAR relation checks on truncated Fock spaces"),
    "cocycles": (cmd_cocycles, "additive cocycle basis with divisibility verdicts"),
    "divisibility": (cmd_divisibility, "divisibility of the representation at the requested points"),
    "decomposables": (cmd_decomposables, "decomposable fiber vectors per particle sector, refinement table"),
    "proper-search": (cmd_proper_search, "search for proper pairs (x, y)"),
    "witness": (cmd_witness, "CCR/CAR distinguishing witness"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coneflows", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON run configuration")
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--seed", type=int, help="override the configured seed")
    p = sub.add_parser("schema", help="print the configuration or report JSON schema")
    p.add_argument("kind", choices=["config", "report"])
    return parser


def run(command: str, config: dict) -> RunReport:
    """Execute one command on a validated configuration."""
    setup = build(config)
    report = RunReport(command, config)
    t0 = time.perf_counter()
    COMMANDS[command][0](setup, report)
    report.wall_time_s = time.perf_counter() - t0
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        sys.stdout.write(dumps(CONFIG_SCHEMA if args.kind == "config" else REPORT_SCHEMA))
        return EXIT_OK
    try:
        config = load_config(args.config, args.seed)
        report = run(args.command, config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except WindowError as exc:
        print(f"config error at $.window: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CrossCheckError as exc:
        print(f"cross-check violation: {exc}", file=sys.stderr)
        return EXIT_CROSSCHECK
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    failed = [c.name for c in report.checks if not c.passed]
    status = "PASS" if not failed else "FAIL " + ", ".join(failed)
    print(f"{args.command}: {len(report.checks)} checks, {status}", file=sys.stderr)
    return EXIT_OK if not failed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
