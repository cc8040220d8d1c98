"""Experiment runner: reproducible named experiments over the library.

Each subcommand builds a domain fixture, runs one experiment kind, writes a
deterministic CSV (plus a JSON summary of pass/fail criteria and a sidecar
metadata file carrying the timestamp), and exits 0 iff every criterion passed.
A JSON manifest can run several experiments in one invocation.
"""

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import burgers, eigen, extremal, green, grid, quotient

DEFAULT_SEED = eigen.DEFAULT_SEED
KINDS = ("eigen", "quotient", "green", "extremal", "burgers", "full-chain")


@dataclass
class DomainSpec:
    shape: str = "box"
    dims: tuple[int, int, int] = (17, 17, 17)
    h: float = 1.0 / 16.0
    radius: float | None = None
    config: str | None = None

    def build(self) -> grid.VoxelDomain:
        if self.config:
            return grid.load_domain_config(self.config)
        return grid.build_domain(self.shape, self.dims, self.h, radius=self.radius)


@dataclass
class ExperimentSpec:
    name: str
    kind: str
    domain: DomainSpec = field(default_factory=DomainSpec)
    m: int = 10
    mu: tuple[float, ...] = (1.0, 4.0, 10.0)
    R: tuple[float, ...] = (5.0, 10.0, 20.0)
    nu: float = 0.5
    tend_frac: float = 0.5
    tol: float = 0.05
    seed: int = DEFAULT_SEED
    x0: tuple[int, int, int] | None = None
    out: str = "out"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class CriterionRow:
    criterion: str
    value: float
    bound: float
    margin: float
    passed: bool


@dataclass
class ReportBundle:
    name: str
    rows: list[CriterionRow]
    csv_path: str
    summary_path: str

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _probe_point(spec: ExperimentSpec, domain: grid.VoxelDomain) -> tuple[int, int, int]:
    if spec.x0 is not None:
        if not domain.is_interior(spec.x0):
            raise ValueError(f"x0={spec.x0} is not an interior node")
        return tuple(spec.x0)
    return grid.deepest_interior_node(domain)


def _run_eigen(spec: ExperimentSpec, domain):
    pairs = eigen.compute_eigenpairs(domain, spec.m, seed=spec.seed)
    rows2 = eigen.check_corollary2(pairs, tol_disc=spec.tol)
    csv_rows = [[r.index, r.lam, r.sup, r.ratio] for r in rows2]
    worst = max(r.ratio for r in rows2)
    crits = [
        CriterionRow(
            "corollary2_max_ratio", worst, 1.0 + spec.tol, 1.0 + spec.tol - worst,
            all(r.ok for r in rows2),
        )
    ]
    return ["n", "lambda", "sup_phi", "cor2_ratio"], csv_rows, crits


def _run_quotient(spec: ExperimentSpec, domain):
    pairs = eigen.compute_eigenpairs(domain, spec.m, seed=spec.seed)
    x0 = _probe_point(spec, domain)
    res = quotient.maximize_over_span(pairs, x0)
    closed = quotient.closed_form_value(
        np.array([p.lam for p in pairs]),
        np.array([p.phi.values[domain.packed_index(x0)] for p in pairs]),
        res.mu,
    )
    crits = [
        CriterionRow(
            "sharp_bound", res.q_max, quotient.SHARP_CONSTANT * (1.0 + spec.tol),
            quotient.SHARP_CONSTANT * (1.0 + spec.tol) - res.q_max,
            res.q_max <= quotient.SHARP_CONSTANT * (1.0 + spec.tol),
        )
    ]
    oracle_q = float("nan")
    gap = float("nan")
    if spec.m <= 8:
        oracle = quotient.brute_force_maximize(pairs, x0, seed=spec.seed)
        oracle_q = oracle.q_max
        gap = abs(res.q_max - oracle.q_max) / oracle.q_max
        crits.append(CriterionRow("oracle_gap", gap, 1e-6, 1e-6 - gap, gap <= 1e-6))
    csv_rows = [[res.m, res.mu, res.q_max, closed, oracle_q, gap]]
    return ["m", "mu", "q_max", "closed_form", "oracle", "oracle_rel_gap"], csv_rows, crits


def _run_green(spec: ExperimentSpec, domain):
    x0 = _probe_point(spec, domain)
    csv_rows, crits = [], []
    for mu in spec.mu:
        sol = green.solve_green(domain, x0, mu)
        l2r = green.check_l2_bound(sol, tol_disc=spec.tol)
        pwr = green.check_pointwise_bound(sol, tol_disc=spec.tol)
        csv_rows.append([mu, sol.l2_sq, l2r.bound, l2r.margin, pwr.worst_rel_violation])
        crits.append(
            CriterionRow(
                f"l2_mass_mu_{mu:g}", sol.l2_sq, (1.0 + spec.tol) * l2r.bound,
                (1.0 + spec.tol) * l2r.bound - sol.l2_sq, l2r.passed,
            )
        )
        crits.append(
            CriterionRow(
                f"pointwise_mu_{mu:g}", pwr.worst_rel_violation, spec.tol,
                spec.tol - pwr.worst_rel_violation, pwr.passed,
            )
        )
    return ["mu", "l2_sq", "bound", "margin", "worst_rel_violation"], csv_rows, crits


def _run_extremal(spec: ExperimentSpec, domain):
    csv_rows = []
    uncut = extremal.radial_integrals(extremal.uncut_profile())
    csv_rows.append([float("inf"), uncut.sup, uncut.grad_sq, uncut.lap_sq, uncut.quotient])
    for R in spec.R:
        ints = extremal.radial_integrals(extremal.cutoff_sequence(R))
        csv_rows.append([R, ints.sup, ints.grad_sq, ints.lap_sq, ints.quotient])
    err = abs(uncut.quotient - quotient.SHARP_CONSTANT)
    crits = [CriterionRow("uncut_quotient", uncut.quotient, 1e-6, 1e-6 - err, err <= 1e-6)]
    bump = extremal.embed_in_domain(extremal.cutoff_sequence(max(spec.R)), domain)
    q = quotient.quotient(bump, grid.deepest_interior_node(domain))
    floor = 0.90 * quotient.SHARP_CONSTANT
    crits.append(CriterionRow("embedded_quotient", q, floor, q - floor, q >= floor))
    crits.append(
        CriterionRow(
            "embedded_below_sharp", q, quotient.SHARP_CONSTANT * (1.0 + spec.tol),
            quotient.SHARP_CONSTANT * (1.0 + spec.tol) - q,
            q <= quotient.SHARP_CONSTANT * (1.0 + spec.tol),
        )
    )
    return ["R", "sup", "grad_sq", "lap_sq", "quotient"], csv_rows, crits


def _run_burgers(spec: ExperimentSpec, domain):
    target_T = 2.0
    pairs = eigen.compute_eigenpairs(domain, 1, seed=spec.seed)
    probe = burgers.eigenmode_state(domain, spec.nu, 1.0, pairs)
    y_unit = burgers.grad_energy(probe.u)
    y0_needed = math.sqrt(256.0 * math.pi**2 * spec.nu**3 / (27.0 * target_T))
    state = burgers.eigenmode_state(domain, spec.nu, math.sqrt(y0_needed / y_unit), pairs)
    T = burgers.blowup_horizon(burgers.grad_energy(state.u), spec.nu)
    _, monitor = burgers.simulate(state, spec.tend_frac * T)
    margins = burgers.monitor_bounds(monitor, tol=spec.tol)
    csv_rows = [
        [r.t, r.y, s.d, r.cum_d, r.bound1, r.bound2, r.sup, r.pointwise_margin, s.residual]
        for r, s in zip(margins, monitor.samples)
    ]
    worst1 = min(r.margin1 / r.bound1 for r in margins)
    worst2 = min(r.margin2 / r.bound2 for r in margins)
    crits = [
        CriterionRow("gradient_bound", -worst1, spec.tol, spec.tol + worst1,
                     all(r.margin1 >= -spec.tol * r.bound1 for r in margins)),
        CriterionRow("dissipation_bound", -worst2, spec.tol, spec.tol + worst2,
                     all(r.margin2 >= -spec.tol * r.bound2 for r in margins)),
        CriterionRow("pointwise_vector_bound", 0.0, spec.tol, spec.tol,
                     all(r.passed for r in margins)),
    ]
    header = ["t", "y", "d", "cum_d", "bound1", "bound2", "sup_u", "eq1_margin", "identity_residual"]
    return header, csv_rows, crits


def _run_full_chain(spec: ExperimentSpec, domain):
    pairs = eigen.compute_eigenpairs(domain, spec.m, seed=spec.seed)
    x0 = _probe_point(spec, domain)
    res = quotient.maximize_over_span(pairs, x0)
    sol = green.solve_green(domain, x0, res.mu, rtol=1e-12)
    chain = quotient.step2_chain_check(pairs, x0, sol)
    csv_rows = [
        [spec.m, res.mu, chain.q_max, chain.eigen_sum_term, chain.green_term,
         chain.gap1, chain.gap2, chain.gap3]
    ]
    crits = [
        CriterionRow(f"chain_gap{i}", g, -1e-6, g + 1e-6, g >= -1e-6)
        for i, g in enumerate(chain.gaps, start=1)
    ]
    for mu in spec.mu:
        l2r = green.check_l2_bound(green.solve_green(domain, x0, mu), tol_disc=spec.tol)
        crits.append(
            CriterionRow(
                f"l2_mass_mu_{mu:g}", l2r.l2_sq, (1.0 + spec.tol) * l2r.bound,
                (1.0 + spec.tol) * l2r.bound - l2r.l2_sq, l2r.passed,
            )
        )
    header = ["m", "mu", "q_max", "eigen_sum_term", "green_term", "gap1", "gap2", "gap3"]
    return header, csv_rows, crits


_RUNNERS = {
    "eigen": _run_eigen,
    "quotient": _run_quotient,
    "green": _run_green,
    "extremal": _run_extremal,
    "burgers": _run_burgers,
    "full-chain": _run_full_chain,
}


def run(spec: ExperimentSpec) -> ReportBundle:
    """Execute one named experiment; writes CSV, JSON summary and metadata."""
    t_start = time.time()
    domain = spec.domain.build()
    header, csv_rows, crits = _RUNNERS[spec.kind](spec, domain)
    outdir = Path(spec.out)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{spec.name}.csv"
    _write_csv(csv_path, header, csv_rows)
    summary_path = outdir / f"{spec.name}.summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump([asdict(c) for c in crits], fh, indent=2)
        fh.write("\n")
    meta = {
        "name": spec.name,
        "kind": spec.kind,
        "seed": spec.seed,
        "wall_seconds": time.time() - t_start,
        "finished_unix": time.time(),
    }
    with open(outdir / f"{spec.name}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return ReportBundle(spec.name, crits, str(csv_path), str(summary_path))


def _spec_from_dict(entry: dict) -> ExperimentSpec:
    entry = dict(entry)
    dom = entry.pop("domain", {})
    if isinstance(dom.get("dims"), int):
        dom["dims"] = (dom["dims"],) * 3
    if "dims" in dom:
        dom["dims"] = tuple(dom["dims"])
    for key in ("mu", "R"):
        if key in entry:
            entry[key] = tuple(entry[key])
    if "x0" in entry and entry["x0"] is not None:
        entry["x0"] = tuple(entry["x0"])
    return ExperimentSpec(domain=DomainSpec(**dom), **entry)


def _spec_from_args(args) -> ExperimentSpec:
    dims = tuple(args.dims) if len(args.dims) == 3 else (args.dims[0],) * 3
    dom = DomainSpec(args.domain, dims, args.h, radius=args.radius, config=args.domain_config)
    return ExperimentSpec(
        name=args.name or args.kind,
        kind=args.kind,
        domain=dom,
        m=args.m,
        mu=tuple(args.mu),
        R=tuple(args.R),
        nu=args.nu,
        tend_frac=args.tend_frac,
        tol=args.tol,
        seed=args.seed,
        x0=tuple(args.x0) if args.x0 else None,
        out=args.out,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supbound",
        description="Named verification experiments for the sharp pointwise bound.",
    )
    parser.add_argument("--manifest", help="JSON manifest of experiments to run")
    sub = parser.add_subparsers(dest="kind")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--name", default=None, help="experiment name (default: kind)")
        p.add_argument("--domain", default="box", choices=[s.value for s in grid.Shape])
        p.add_argument("--dims", type=int, nargs="+", default=[17])
        p.add_argument("--h", type=float, default=1.0 / 16.0)
        p.add_argument("--radius", type=float, default=None)
        p.add_argument("--domain-config", default=None, help="line-oriented domain config file")
        p.add_argument("--m", type=int, default=10)
        p.add_argument("--mu", type=float, nargs="+", default=[1.0, 4.0, 10.0])
        p.add_argument("--R", type=float, nargs="+", default=[5.0, 10.0, 20.0])
        p.add_argument("--nu", type=float, default=0.5)
        p.add_argument("--tend-frac", type=float, default=0.5)
        p.add_argument("--tol", type=float, default=0.05)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--x0", type=int, nargs=3, default=None)
        p.add_argument("--out", default="out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.manifest:
        with open(args.manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        entries = manifest.get("experiments", [])
        if not entries:
            parser.error("manifest contains no experiments")
        names = [e.get("name") for e in entries]
        if len(set(names)) != len(names):
            parser.error("experiment names in a manifest must be unique")
        bundles = [run(_spec_from_dict(e)) for e in entries]
    elif args.kind is None:
        parser.error("choose a subcommand or pass --manifest")
    else:
        bundles = [run(_spec_from_args(args))]

    all_ok = True
    for b in bundles:
        for c in b.rows:
            status = "PASS" if c.passed else "FAIL"
            print(
                f"[{b.name}] {c.criterion}: value={c.value:.8g} bound={c.bound:.8g} "
                f"margin={c.margin:.3g} {status}"
            )
        all_ok &= b.passed
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
