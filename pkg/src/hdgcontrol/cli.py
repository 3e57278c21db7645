"""Command-line harness: single solves, refinement studies, and the
invariant check suite.

Studies emit a fixed-schema CSV (or a markdown table laid out like the
reference convergence tables) and are byte-reproducible for a given
configuration.  Exit codes: 0 success, 1 numerical failure, 2 bad
configuration.
"""

import argparse
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import VARIABLES, ConvergenceReport, all_errors, project_exact
from .assembly import condense, conservation_residuals, recover, solve_problem, \
    solve_traces
from .basis import TriBasis, edge_quadrature, tri_quadrature
from .errors import ConfigError, LocalSingularityError, SolverError, \
    StabilizationError
from .local import HDGAssembler, StabilizationConfig, project_face, project_volume
from .mesh import build_uniform
from .problems import BUILTIN_PROBLEMS, ProblemData

CSV_HEADER = "level,h,err_q,err_p,err_y,err_z,err_u,rate_q,rate_p,rate_y,rate_z,rate_u"


@dataclass(frozen=True)
class StudyConfig:
    """Validated description of a refinement study."""

    problem: str = "example1"
    k: int = 1
    levels: tuple[int, ...] = (8, 16, 32)
    gamma: float = 1.0
    tau2: float = 4.0
    output_format: str = "csv"
    output_path: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.problem not in BUILTIN_PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if not 0 <= self.k <= 4:
            raise ConfigError(f"degree k must be in 0..4, got {self.k}")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        levels = tuple(int(n) for n in self.levels)
        if not levels or any(n < 1 for n in levels):
            raise ConfigError("levels must be positive integers")
        if any(b != 2 * a for a, b in zip(levels, levels[1:])):
            raise ConfigError("levels must double at each refinement step")
        if self.output_format not in ("csv", "markdown"):
            raise ConfigError(f"unknown output format {self.output_format!r}")
        object.__setattr__(self, "levels", levels)

    def make_problem(self) -> ProblemData:
        return BUILTIN_PROBLEMS[self.problem](self.gamma)

    def make_stab(self) -> StabilizationConfig:
        return StabilizationConfig(tau2=self.tau2)


def load_config_file(path: str) -> dict[str, str]:
    """Flat key=value file; '#' starts a comment."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def config_from_sources(file_entries: dict[str, str], args) -> StudyConfig:
    cfg: dict = dict(file_entries)
    for key in ("problem", "k", "levels", "gamma", "tau2", "output_format",
                "output_path", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    try:
        if "levels" in cfg and isinstance(cfg["levels"], str):
            cfg["levels"] = tuple(int(t) for t in cfg["levels"].split(",") if t)
        if "k" in cfg:
            cfg["k"] = int(cfg["k"])
        for key in ("gamma", "tau2"):
            if key in cfg:
                cfg[key] = float(cfg[key])
        if "seed" in cfg:
            cfg["seed"] = int(cfg["seed"])
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    unknown = set(cfg) - set(StudyConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return StudyConfig(**cfg)


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Solve every level and collect errors and per-step orders."""
    problem = config.make_problem()
    stab = config.make_stab()
    errors = []
    h_values = []
    for n in config.levels:
        try:
            sol = solve_problem(problem, n, config.k, stab)
        except (StabilizationError, SolverError, LocalSingularityError) as exc:
            exc.args = (f"level n={n}, k={config.k}: {exc}",)
            raise
        h_values.append(sol.mesh.h)
        errors.append(all_errors(sol, problem))
    return ConvergenceReport(config.problem, config.k, config.gamma,
                             config.tau2, list(config.levels), h_values, errors)


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.5e}"


def render_csv(report: ConvergenceReport) -> str:
    lines = [CSV_HEADER]
    for i, n in enumerate(report.levels):
        row = [str(n), f"{report.h_values[i]:.5e}"]
        row += [_fmt(report.errors[i][v]) for v in VARIABLES]
        row += [_fmt(report.rates[i][v]) for v in VARIABLES]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def render_markdown(report: ConvergenceReport) -> str:
    """Table laid out like the reference results: one error row and one
    order row per variable, levels as columns."""
    head = ["h/sqrt(2)"] + [f"1/{n}" for n in report.levels]
    lines = [
        f"**{report.problem}**, k={report.k}, gamma={report.gamma:g}, "
        f"tau2={report.tau2:g}",
        "",
        "| " + " | ".join(head) + " |",
        "|" + "---|" * len(head),
    ]
    for v in VARIABLES:
        errs = [f"{report.errors[i][v]:.4e}" for i in range(len(report.levels))]
        lines.append(f"| err_{v} | " + " | ".join(errs) + " |")
        rates = [
            "-" if report.rates[i][v] is None else f"{report.rates[i][v]:.2f}"
            for i in range(len(report.levels))
        ]
        lines.append("| order | " + " | ".join(rates) + " |")
    return "\n".join(lines) + "\n"


def render_report(report: ConvergenceReport, output_format: str) -> str:
    if output_format == "csv":
        return render_csv(report)
    return render_markdown(report)


# -- invariant check suite -------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _random_fields(assembler: HDGAssembler, rng: np.random.Generator):
    ne = assembler.mesh.n_elements
    nif = assembler.mesh.n_interior_faces
    v = rng.uniform(-1.0, 1.0, (ne, 2 * assembler.m))
    w = rng.uniform(-1.0, 1.0, (ne, assembler.w))
    mu = rng.uniform(-1.0, 1.0, (nif, assembler.K1))
    return v, w, mu


def check_energy_identity(seed: int, trials: int = 20) -> CheckResult:
    """Lemma-style energy identity for both operators, two routes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for maker in ("example1", "example2"):
        problem = BUILTIN_PROBLEMS[maker]()
        for k in (0, 1):
            asm = HDGAssembler(build_uniform(4), problem, None, k)
            for _ in range(trials):
                v, w, mu = _random_fields(asm, rng)
                lhs1 = asm.b1(v, w, mu, v, w, mu)
                rhs1 = asm.b1_energy_rhs(v, w, mu)
                lhs2 = asm.b2(v, w, mu, v, w, mu)
                rhs2 = asm.b2_energy_rhs(v, w, mu)
                worst = max(
                    worst,
                    abs(lhs1 - rhs1) / max(1.0, abs(lhs1), abs(rhs1)),
                    abs(lhs2 - rhs2) / max(1.0, abs(lhs2), abs(rhs2)),
                )
    return CheckResult("energy-identity", worst <= 1e-10,
                       f"max relative mismatch {worst:.3e}")


def check_adjoint_identity(seed: int, trials: int = 20) -> CheckResult:
    """Operator sum cancels under the tau coupling and only then."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    broken_min = np.inf
    for maker in ("example1", "example2"):
        problem = BUILTIN_PROBLEMS[maker]()
        for k in (0, 1):
            asm = HDGAssembler(build_uniform(4), problem, None, k)
            bad = HDGAssembler(build_uniform(4), problem,
                               StabilizationConfig(tau2=1.0, tau1=1.0), k)
            for _ in range(trials):
                q, y, yh = _random_fields(asm, rng)
                p, z, zh = _random_fields(asm, rng)
                t1 = asm.b1(q, y, yh, p, -z, -zh)
                t2 = asm.b2(p, z, zh, -q, y, yh)
                worst = max(worst, abs(t1 + t2) / max(1.0, abs(t1), abs(t2)))
                s1 = bad.b1(q, y, yh, p, -z, -zh)
                s2 = bad.b2(p, z, zh, -q, y, yh)
                broken_min = min(broken_min, abs(s1 + s2))
    ok = worst <= 1e-10 and broken_min > 1e-4
    return CheckResult(
        "adjoint-identity", ok,
        f"max relative sum {worst:.3e}; min |sum| without coupling {broken_min:.3e}",
    )


def _zero_problem() -> ProblemData:
    base = BUILTIN_PROBLEMS["example1"]()
    zero = lambda x: np.zeros(x.shape[:-1])
    return replace(base, name="zero", f=zero, g=zero, y_d=zero, exact=None)


def check_uniqueness() -> CheckResult:
    """Zero data must produce the zero solution."""
    problem = _zero_problem()
    worst = 0.0
    for n in (2, 4):
        for k in (0, 1):
            sol = solve_problem(problem, n, k)
            worst = max(worst, *(float(np.abs(c).max()) for c in
                                 (sol.q, sol.y, sol.p, sol.z, sol.u,
                                  sol.yhat, sol.zhat)))
    return CheckResult("uniqueness", worst <= 1e-9,
                       f"max coefficient magnitude {worst:.3e}")


def check_flux_conservation() -> CheckResult:
    """Recovered solutions satisfy both conservation laws on every face."""
    worst = 0.0
    for k in (0, 1):
        problem = BUILTIN_PROBLEMS["example1"]()
        mesh = build_uniform(4)
        asm = HDGAssembler(mesh, problem, None, k)
        batch = asm.local_systems()
        traces = solve_traces(condense(batch, mesh, k))
        sol = recover(traces, batch, mesh, problem.gamma)
        worst = max(worst, *conservation_residuals(asm, sol))
    return CheckResult("flux-conservation", worst <= 1e-9,
                       f"max face residual {worst:.3e}")


def check_projection_orthogonality() -> CheckResult:
    """Projection residuals are orthogonal to their spaces.

    Orthogonality is tested with the same rule that defines the discrete
    projection, so failures indicate assembly bugs rather than quadrature
    error on the non-polynomial target.
    """
    from .basis import EdgeBasis
    from .local import _element_points

    mesh = build_uniform(4)
    fn = lambda x: np.sin(np.pi * x[..., 0]) * np.cos(x[..., 1])
    vec = lambda x: np.stack([fn(x), x[..., 0] * x[..., 1]], axis=-1)
    worst = 0.0
    for k in (0, 1):
        rule = tri_quadrature(2 * (k + 2) + 6)
        X, _ = _element_points(mesh, rule.points)

        state = TriBasis(k + 1).eval(rule.points)
        coef = project_volume(fn, k + 1, mesh, rule)
        disc = np.einsum("ej,qj->eq", coef, state)
        resid = np.einsum("q,eq,qi->ei", rule.weights, fn(X) - disc, state)
        worst = max(worst, float(np.abs(resid).max()))

        flux = TriBasis(k).eval(rule.points)
        m = TriBasis(k).dim
        vcoef = project_volume(vec, k, mesh, rule, vector=True)
        for c in range(2):
            disc = np.einsum("ej,qj->eq", vcoef[:, c * m:(c + 1) * m], flux)
            resid = np.einsum("q,eq,qi->ei", rule.weights, vec(X)[..., c] - disc, flux)
            worst = max(worst, float(np.abs(resid).max()))

        erule = edge_quadrature(2 * k + 6)
        E = EdgeBasis(k).eval(erule.points)
        va = mesh.vertices[mesh.faces[:, 0]]
        vb = mesh.vertices[mesh.faces[:, 1]]
        Xf = va[:, None, :] + erule.points[None, :, None] * (vb - va)[:, None, :]
        fcoef = project_face(fn, k, mesh, erule)
        disc = np.einsum("fa,qa->fq", fcoef, E)
        resid = np.einsum("q,fq,qa->fa", erule.weights, fn(Xf) - disc, E)
        worst = max(worst, float(np.abs(resid).max()))
    return CheckResult("projection-orthogonality", worst <= 1e-12,
                       f"max residual component {worst:.3e}")


def check_stabilization_validator() -> CheckResult:
    """tau2 = 1 passes for both convection fields; tau2 = -1 is rejected."""
    mesh = build_uniform(2)
    ok = True
    details = []
    for maker in ("example1", "example2"):
        asm = HDGAssembler(mesh, BUILTIN_PROBLEMS[maker](),
                           StabilizationConfig(tau2=1.0), 0)
        margin = asm.a2_margin()
        details.append(f"{maker}: margin {margin:.3f}")
        ok = ok and margin > 0
    bad = HDGAssembler(mesh, BUILTIN_PROBLEMS["example1"](),
                       StabilizationConfig(tau2=-1.0), 0)
    rejected = bad.a2_margin() <= 0
    ok = ok and rejected
    details.append(f"tau2=-1 rejected: {rejected}")
    return CheckResult("stabilization-validator", ok, "; ".join(details))


def run_checks(seed: int = 0) -> list[CheckResult]:
    """The full invariant suite; every entry must pass."""
    return [
        check_energy_identity(seed),
        check_adjoint_identity(seed + 1),
        check_uniqueness(),
        check_flux_conservation(),
        check_projection_orthogonality(),
        check_stabilization_validator(),
    ]


# -- entry point ------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdg-control",
        description="HDG solver for distributed control of convection-diffusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one level and print errors")
    solve.add_argument("--problem", choices=sorted(BUILTIN_PROBLEMS), required=True)
    solve.add_argument("--n", type=int, required=True, help="cells per side")
    solve.add_argument("--k", type=int, default=1)
    solve.add_argument("--gamma", type=float, default=1.0)
    solve.add_argument("--tau2", type=float, default=4.0)

    study = sub.add_parser("study", help="run a refinement study")
    study.add_argument("--config", help="flat key=value config file")
    study.add_argument("--problem", choices=sorted(BUILTIN_PROBLEMS))
    study.add_argument("--k", type=int)
    study.add_argument("--levels", help="comma-separated grid sizes, e.g. 8,16,32")
    study.add_argument("--gamma", type=float)
    study.add_argument("--tau2", type=float)
    study.add_argument("--format", dest="output_format", choices=("csv", "markdown"))
    study.add_argument("--output", dest="output_path")
    study.add_argument("--seed", type=int)

    check = sub.add_parser("check", help="run the invariant check suite")
    check.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_solve(args) -> int:
    cfg = StudyConfig(problem=args.problem, k=args.k, levels=(args.n,),
                      gamma=args.gamma, tau2=args.tau2)
    problem = cfg.make_problem()
    sol = solve_problem(problem, args.n, cfg.k, cfg.make_stab())
    print(f"problem={cfg.problem} n={args.n} k={cfg.k} h={sol.mesh.h:.5e}")
    if problem.exact is not None:
        for v, e in all_errors(sol, problem).items():
            print(f"err_{v}={e:.5e}")
    return 0


def _cmd_study(args) -> int:
    entries = load_config_file(args.config) if args.config else {}
    cfg = config_from_sources(entries, args)
    report = run_study(cfg)
    text = render_report(report, cfg.output_format)
    if cfg.output_path:
        Path(cfg.output_path).write_bytes(text.encode())
    else:
        sys.stdout.write(text)
    return 0


def _cmd_check(args) -> int:
    results = run_checks(args.seed)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "study":
            return _cmd_study(args)
        return _cmd_check(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StabilizationError, SolverError, LocalSingularityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
