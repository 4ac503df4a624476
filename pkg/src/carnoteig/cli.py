"""Config-driven experiment runner.

Config files are flat ``key = value`` lines; ``#`` starts a comment.

    group = heisenberg1        # heisenberg1, heisenberg2, abelian1..abelian3
    N = 8                      # cells per axis, >= 4
    s = 0.5                    # fractional order in (0, 1)
    q = 2.0                    # 1 < q < 2* = 2Q/(Q-2)
    theta_loc = 1.0
    theta_nonloc = 1.0
    tol = 1e-10
    max_iter = 500
    seed = 0
    checks = operators, positivity
    output_dir = out
    box_lo = -1.0              # optional; default -1 on H^n, 0 on R^d
    box_hi = 1.0               # optional; default 1

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 the
eigensolver did not converge, 3 an output file could not be written,
4 the configuration is invalid.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass, field, replace
import logging
import math
import os
import sys

import numpy as np

from .discretize import build_form, build_grid, check_exponent
from .eigensolve import inverse_iteration
from .errors import CarnotError, ConfigurationError, ConvergenceError, DomainError
from .groups import GroupSpec
from . import verify

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_NOCONV, EXIT_IO, EXIT_CONFIG = 0, 1, 2, 3, 4

GROUPS = {
    "heisenberg1": GroupSpec.heisenberg(1),
    "heisenberg2": GroupSpec.heisenberg(2),
    "abelian1": GroupSpec.abelian(1),
    "abelian2": GroupSpec.abelian(2),
    "abelian3": GroupSpec.abelian(3),
}
CHECKS = ("pohozaev", "commutator", "operators", "embedding", "positivity", "negative_lambda")
FLOAT_FORMAT = "{:.16e}"


@dataclass(frozen=True)
class ExperimentConfig:
    group: str = "heisenberg1"
    N: int = 8
    s: float = 0.5
    q: float = 2.0
    theta_loc: float = 1.0
    theta_nonloc: float = 1.0
    tol: float = 1e-10
    max_iter: int = 500
    seed: int = 0
    checks: tuple = ()
    output_dir: str = "out"
    box_lo: float | None = None
    box_hi: float | None = None

    @property
    def spec(self) -> GroupSpec:
        return GROUPS[self.group]

    @property
    def bounds(self) -> tuple:
        lo = self.box_lo if self.box_lo is not None else (-1.0 if self.spec.is_heisenberg else 0.0)
        hi = self.box_hi if self.box_hi is not None else 1.0
        return (lo, hi)


_CASTS = {
    "group": str, "N": int, "s": float, "q": float, "theta_loc": float,
    "theta_nonloc": float, "tol": float, "max_iter": int, "seed": int,
    "checks": str, "output_dir": str, "box_lo": float, "box_hi": float,
}


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CASTS:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _CASTS[key](value)
        except ValueError:
            raise ConfigurationError(
                f"line {lineno}: {key} expects {_CASTS[key].__name__}, got {value!r}") from None
    if "checks" in values:
        values["checks"] = tuple(c.strip() for c in values["checks"].split(",") if c.strip())
    return validate(ExperimentConfig(**values))


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.group not in GROUPS:
        raise ConfigurationError(f"group must be one of {', '.join(GROUPS)}, got {cfg.group!r}")
    if cfg.N < 4:
        raise ConfigurationError(f"N must be >= 4, got {cfg.N}")
    if not 0.0 < cfg.s < 1.0:
        raise ConfigurationError(f"s must lie in the open interval (0, 1), got {cfg.s}")
    spec = cfg.spec
    try:
        check_exponent(spec, cfg.q)
    except DomainError:
        top = spec.critical_exponent
        bound = "inf" if math.isinf(top) else f"{top:g}"
        raise ConfigurationError(
            f"q must satisfy 1 < q < 2* = 2Q/(Q-2) = {bound} for {cfg.group} (Q={spec.Q}), got {cfg.q}"
        ) from None
    if cfg.theta_loc < 0 or cfg.theta_nonloc < 0:
        raise ConfigurationError("theta_loc and theta_nonloc must be >= 0")
    if cfg.theta_loc == 0 and cfg.theta_nonloc == 0:
        raise ConfigurationError("theta_loc and theta_nonloc cannot both be 0")
    if not cfg.tol > 0:
        raise ConfigurationError(f"tol must be > 0, got {cfg.tol}")
    if cfg.max_iter < 1:
        raise ConfigurationError(f"max_iter must be >= 1, got {cfg.max_iter}")
    unknown = sorted(set(cfg.checks) - set(CHECKS))
    if unknown:
        raise ConfigurationError(f"unknown checks {unknown}; choose from {', '.join(CHECKS)}")
    lo, hi = cfg.bounds
    if not lo < hi:
        raise ConfigurationError(f"box_lo must be < box_hi, got {lo} >= {hi}")
    return cfg


# ------------------------------------------------------------------- output

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FORMAT.format(float(x))
    return str(x)


def emit_csv(path, header, rows) -> None:
    """Comma-separated UTF-8 with LF endings; floats as '{:.16e}' (17 significant digits)."""
    width = len(header)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != width:
            raise ValueError(f"row has {len(row)} fields, header has {width}")
        lines.append(",".join(_fmt(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _coord_names(spec: GroupSpec) -> list:
    if spec.is_heisenberg:
        n = spec.n
        return [f"a{i + 1}" for i in range(n)] + [f"b{i + 1}" for i in range(n)] + ["c"]
    return [f"x{i + 1}" for i in range(spec.dim)]


# ------------------------------------------------------------------- checks

def _check_pohozaev(cfg, A, eig, out):
    rep = verify.pohozaev_residual(eig, A)
    emit_csv(os.path.join(out, "pohozaev.csv"),
             ["term_G", "term_grad", "term_frac_A", "term_frac_B", "term_boundary",
              "residual_A", "residual_B"], [rep.as_row()])
    ok = rep.term_boundary >= 0 and all(math.isfinite(x) for x in rep.as_row())
    return ok, (f"residual_A={rep.residual_A:.6g} residual_B={rep.residual_B:.6g} "
                f"boundary={rep.term_boundary:.3g} dilation_residual={rep.dilation_residual:.6g}")


def _commutator_setup(spec, grid):
    """Bump and probes scaled to the box: dilation about the identity on H^n,
    plain scaling about the box midpoint on R^d."""
    lo = np.array([b[0] for b in grid.bounds])
    hi = np.array([b[1] for b in grid.bounds])
    if spec.is_heisenberg:
        if not np.allclose(lo + hi, 0.0):
            raise DomainError("commutator check on H^n needs a box centred at the identity")
        delta = float(np.min(hi[:-1]))
        delta = min(delta, math.sqrt(hi[-1]))
        width = 0.3 * delta ** spec.degrees
        return verify.Bump(tuple([0.0] * spec.dim), tuple(width)), \
            verify.default_probes(spec, radii=(0.6 * delta, 0.8 * delta))
    mid = 0.5 * (lo + hi)
    half = 0.5 * float(np.min(hi - lo))
    bump = verify.Bump(tuple(mid), tuple([0.3 * half] * spec.dim))
    return bump, mid + verify.default_probes(spec, radii=(0.6 * half, 0.8 * half))


def _check_commutator(cfg, A, eig, out):
    spec, grid = A.grid.spec, A.grid
    bump, probes = _commutator_setup(spec, grid)
    rep = verify.commutator_check(grid, A.mask, cfg.s, bump, probes)
    names = _coord_names(spec)
    rows = [[k, *p, l, r, e] for k, (p, l, r, e) in
            enumerate(zip(rep.probes, rep.lhs, rep.rhs, rep.residuals))]
    emit_csv(os.path.join(out, "commutator.csv"),
             ["probe_id", *names, "lhs", "rhs", "residual"], rows)
    return rep.max_residual < 0.05, f"max_residual={rep.max_residual:.4g}"


def _check_operators(cfg, A, eig, out):
    rep = verify.operator_property_suite(A, trials=100, seed=cfg.seed)
    emit_csv(os.path.join(out, "operators.csv"),
             ["trial", "coercivity_margin", "monotonicity_margin", "cs_margin"], rep.rows)
    return rep.passed, (f"coercivity={rep.worst_coercivity:.3g} monotonicity={rep.worst_monotonicity:.3g} "
                        f"cs={rep.worst_cs:.3g}")


def _check_embedding(cfg, A, eig, out):
    grid, mask = A.grid, A.mask
    ratios = [verify.embedding_ratio(grid, mask, b, 2.0, cfg.s)
              for b in verify.random_bumps(grid, 20, cfg.seed)]
    emit_csv(os.path.join(out, "embedding.csv"), ["function_id", "ratio"], list(enumerate(ratios)))
    ok = all(math.isfinite(r) and r > 0 for r in ratios)
    return ok, f"p=2 ratio in [{min(ratios):.4g}, {max(ratios):.4g}]"


def _check_positivity(cfg, A, eig, out):
    rep = verify.positivity_check(eig, A.grid, A.mask, 0.25)
    emit_csv(os.path.join(out, "positivity.csv"), ["margin", "min_interior", "linf"],
             [[rep.margin, rep.min_interior, rep.linf]])
    return rep.min_interior > 0 and math.isfinite(rep.linf), \
        f"min_interior={rep.min_interior:.4g} linf={rep.linf:.4g}"


def _check_negative_lambda(cfg, A, eig, out):
    rep = verify.negative_lambda_check(A, eig)
    emit_csv(os.path.join(out, "negative_lambda.csv"),
             ["lambda1", "lower_bound", "method", "remark_G", "remark_gu", "remark_combination"],
             [[rep.lambda1, rep.lower_bound, rep.method, rep.remark_G, rep.remark_gu,
               rep.remark_combination]])
    return rep.passed, f"lambda1={rep.lambda1:.10g} ({rep.method})"


_RUNNERS = {
    "pohozaev": _check_pohozaev,
    "commutator": _check_commutator,
    "operators": _check_operators,
    "embedding": _check_embedding,
    "positivity": _check_positivity,
    "negative_lambda": _check_negative_lambda,
}


# ---------------------------------------------------------------------- run

@dataclass
class RunResult:
    status: int
    summary: list = field(default_factory=list)
    mu: float = math.nan


def run_experiment(cfg: ExperimentConfig, stream=None) -> RunResult:
    """Assemble, solve, run the requested checks and write all CSVs."""
    stream = sys.stdout if stream is None else stream
    out = cfg.output_dir
    result = RunResult(EXIT_OK)

    def say(line):
        result.summary.append(line)
        print(line, file=stream)

    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        say(f"error: cannot create output directory {out!r}: {exc.strerror}")
        result.status = EXIT_IO
        return result

    spec = cfg.spec
    grid, mask = build_grid(spec, cfg.bounds, cfg.N)
    A = build_form(grid, mask, cfg.s, cfg.theta_loc, cfg.theta_nonloc)
    try:
        eig, trace = inverse_iteration(A, cfg.q, tol=cfg.tol, max_iter=cfg.max_iter)
    except ConvergenceError as exc:
        say(f"solve: linear solver failed ({exc}); residual={exc.residual:.3g}")
        result.status = EXIT_NOCONV
        return result
    result.mu = eig.mu

    try:
        rows = [[0, trace.mu_sequence[0], trace.residuals[0], math.nan]]
        rows += [[j + 1, m, r, g] for j, (m, r, g) in
                 enumerate(zip(trace.mu_sequence[1:], trace.residuals[1:], trace.lq_growth))]
        emit_csv(os.path.join(out, "convergence.csv"), ["iter", "mu", "residual", "lq_growth"], rows)
        nodes = grid.nodes[mask.interior_index]
        emit_csv(os.path.join(out, "eigenpair.csv"), ["node_index", *_coord_names(spec), "value"],
                 [[int(i), *x, w] for i, x, w in zip(mask.interior_index, nodes, eig.w)])
    except OSError as exc:
        say(f"error: cannot write to {out!r}: {exc.strerror}")
        result.status = EXIT_IO
        return result

    mus = trace.mu_sequence
    monotone = all(b <= a + 1e-12 * a for a, b in zip(mus, mus[1:]))
    say(f"solve: group={cfg.group} N={cfg.N} s={cfg.s:g} q={cfg.q:g} mu={eig.mu:.12g} "
        f"iterations={trace.iterations} residual={eig.residual:.3g} converged={eig.converged} "
        f"monotone={monotone}")
    if not eig.converged:
        result.status = EXIT_NOCONV
        return result
    failed = not monotone

    for name in cfg.checks:
        try:
            ok, detail = _RUNNERS[name](cfg, A, eig, out)
        except OSError as exc:
            say(f"{name}: ERROR cannot write output ({exc.strerror})")
            result.status = EXIT_IO
            return result
        except CarnotError as exc:
            ok, detail = False, f"not applicable: {exc}"
        failed |= not ok
        say(f"{name}: {'PASS' if ok else 'FAIL'} {detail}")
    if failed:
        result.status = EXIT_FAIL
    return result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carnoteig", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="run one experiment from a config file")
    solve.add_argument("--config", required=True, help="path to a key = value config file")
    solve.add_argument("--output", help="output directory (overrides output_dir)")
    solve.add_argument("--grid", type=int, help="cells per axis (overrides N)")
    solve.add_argument("--s", type=float, help="fractional order (overrides s)")
    solve.add_argument("--q", type=float, help="exponent (overrides q)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config {args.config!r}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
        overrides = {k: v for k, v in (("output_dir", args.output), ("N", args.grid),
                                       ("s", args.s), ("q", args.q)) if v is not None}
        cfg = validate(replace(cfg, **overrides))
    except ConfigurationError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(cfg).status


if __name__ == "__main__":
    sys.exit(main())
