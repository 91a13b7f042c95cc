"""Refinement studies: solve on a sequence of meshes, measure errors, write tables."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Literal

from .forms import make_discretisation
from .mms import BoundaryMethod, ManufacturedCase, exact_q, exact_u, initial_guess
from .newton import NewtonReport, newton_solve
from .norms import ErrorReport, LevelErrors, error_l2_h1, error_triple_norm
from .params import ModelParams

log = logging.getLogger(__name__)

StudyCase = Literal["decoupled_u", "decoupled_q", "coupled"]
OutputFormat = Literal["csv", "markdown"]

KIND = {"decoupled_u": "P1", "decoupled_q": "P2", "coupled": "coupled"}

COLUMNS = ["case", "deg_u", "deg_q", "N", "eq_l2", "eq_l2_rate", "eq_h1", "eq_h1_rate",
           "eu_l2", "eu_l2_rate", "eu_h1", "eu_h1_rate", "eu_triple", "eu_triple_rate",
           "newton_iters"]
ERROR_COLUMNS = ["eq_l2", "eq_h1", "eu_l2", "eu_h1", "eu_triple"]

EXIT_OK, EXIT_NEWTON, EXIT_CONFIG = 0, 2, 3


class StudyAborted(RuntimeError):
    """Newton failed on some level; ``report`` holds the levels finished before it."""

    def __init__(self, message: str, report: ErrorReport, newton: NewtonReport | None = None):
        super().__init__(message)
        self.report = report
        self.newton = newton


def case_defaults(case: StudyCase) -> dict:
    if case == "coupled":
        return dict(deg_u=3, deg_q=2, q=30.0, epsilon=5e4, form_variant="inconsistent")
    if case == "decoupled_u":
        return dict(deg_u=2, deg_q=None, q=0.0, epsilon=1.0, form_variant="consistent")
    if case == "decoupled_q":
        return dict(deg_u=None, deg_q=1, q=0.0, epsilon=1.0, form_variant="consistent")
    raise ValueError(f"unknown case {case!r}")


@dataclass
class StudyConfig:
    case: StudyCase = "decoupled_q"
    deg_u: int | None = None
    deg_q: int | None = None
    n_list: list[int] = field(default_factory=lambda: [6, 12, 24, 48])
    params: ModelParams = field(default_factory=ModelParams)
    output_path: Path | None = None
    output_format: OutputFormat = "csv"
    tol_abs: float = 1e-12
    tol_rel: float = 1e-12
    max_iter: int = 30
    u_bc: BoundaryMethod | None = None
    q_bc: BoundaryMethod = "projection"
    # coupled only: reach the q > 0 solution from the q = 0 one
    warm_start: bool = True
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    @property
    def kind(self) -> str:
        return KIND[self.case]

    @property
    def has_u(self) -> bool:
        return self.case in ("decoupled_u", "coupled")

    @property
    def has_q(self) -> bool:
        return self.case in ("decoupled_q", "coupled")

    def validate(self) -> None:
        if self.case not in KIND:
            raise ValueError(f"unknown case {self.case!r}")
        if self.has_u and (self.deg_u is None or self.deg_u < 2):
            raise ValueError("deg_u must be at least 2")
        if self.has_q and (self.deg_q is None or self.deg_q < 1):
            raise ValueError("deg_q must be at least 1")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValueError("n_list must hold positive mesh sizes")
        if any(b != 2 * a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError(f"n_list must double at each level, got {self.n_list}")
        if self.case != "coupled" and self.params.q != 0:
            raise ValueError("decoupled studies require q = 0")
        if self.output_format not in ("csv", "markdown"):
            raise ValueError(f"unknown output format {self.output_format!r}")
        if self.max_iter < 1 or self.tol_abs <= 0 or self.tol_rel <= 0 or self.jobs < 1:
            raise ValueError("tolerances must be positive, max_iter and jobs at least 1")
        for bc in (self.u_bc, self.q_bc):
            if bc not in (None, "interpolation", "projection"):
                raise ValueError(f"unknown boundary method {bc!r}")

    @classmethod
    def for_case(cls, case: StudyCase, **overrides) -> "StudyConfig":
        """Config with the per-case defaults; ``overrides`` may hold ModelParams fields."""
        d = case_defaults(case)
        pnames = {f.name for f in fields(ModelParams)}
        pkw = {k: d.pop(k) for k in list(d) if k in pnames}
        pkw.update({k: overrides.pop(k) for k in list(overrides) if k in pnames})
        d.update(overrides)
        return cls(case=case, params=ModelParams(**pkw), **d)


# ---------------------------------------------------------------------------
# running


def _exact_u_h1(x, y):
    U = exact_u(x, y)
    return U["u"], U["x"], U["y"]


def _exact_u_hessian(x, y):
    U = exact_u(x, y)
    return U["xx"], U["xy"], U["yy"]


def _exact_q_h1(comp):
    def f(x, y):
        Q = exact_q(x, y)
        return Q[comp], Q[comp + "_x"], Q[comp + "_y"]
    return f


def _newton(config: StudyConfig, disc, state):
    return newton_solve(disc, state, tol_abs=config.tol_abs, tol_rel=config.tol_rel,
                        max_iter=config.max_iter)


def solve_level(config: StudyConfig, n: int) -> tuple[LevelErrors, NewtonReport]:
    """Solve one refinement level from the manufactured initial guess and measure errors."""
    case = ManufacturedCase(config.kind)
    disc = make_discretisation(config.kind, n, config.params, deg_u=config.deg_u,
                               deg_q=config.deg_q, case=case)
    state = initial_guess(case, disc.u_map, disc.q_map, u_bc=config.u_bc, q_bc=config.q_bc)
    iters = 0
    if config.case == "coupled" and config.warm_start and config.params.q != 0:
        # at q = 0 the system splits into the u and Q problems; solve them apart
        flat = config.params.with_(q=0.0)
        for kind in ("P1", "P2"):
            sub = make_discretisation(kind, n, flat, deg_u=config.deg_u, deg_q=config.deg_q,
                                      case=ManufacturedCase(kind), mesh=disc.mesh)
            part, pre = _newton(config, sub, state)
            iters += pre.iterations
            if not pre.converged:
                return LevelErrors(n, newton_iters=iters), pre
            if kind == "P1":
                state.u = part.u
            else:
                state.q11, state.q12 = part.q11, part.q12
    state, rep = _newton(config, disc, state)
    iters += rep.iterations
    lv = LevelErrors(n, newton_iters=iters)
    if not rep.converged:
        return lv, rep
    if config.has_u:
        lv.eu_l2, lv.eu_h1 = error_l2_h1(disc.u_map, state.u, _exact_u_h1)
        lv.eu_triple = error_triple_norm(disc.u_map, state.u, _exact_u_hessian)
    if config.has_q:
        lv.eq_l2, lv.eq_h1 = error_l2_h1(disc.q_map, [state.q11, state.q12],
                                         [_exact_q_h1("q11"), _exact_q_h1("q12")])
    return lv, rep


def _solve_level_star(args):
    return solve_level(*args)


def run_study(config: StudyConfig) -> ErrorReport:
    """Sweep ``config.n_list``; write the table if an output path is set.

    Raises StudyAborted (carrying the partial report) when Newton fails.
    """
    config.validate()
    report = ErrorReport(config.case, config.deg_u if config.has_u else None,
                         config.deg_q if config.has_q else None)
    if config.jobs > 1:
        pool = ProcessPoolExecutor(max_workers=config.jobs)
        results = pool.map(_solve_level_star, [(config, n) for n in config.n_list])
    else:
        pool = None
        results = (solve_level(config, n) for n in config.n_list)
    try:
        for n, (lv, newton) in zip(config.n_list, results):
            if not newton.converged:
                if config.output_path is not None:
                    write_table(report, config.output_path, config.output_format)
                raise StudyAborted(f"Newton did not converge at N={n} ({newton.stop_reason})",
                                   report, newton)
            log.info("N=%d done in %d Newton steps", n, lv.newton_iters)
            report.levels.append(lv)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    if config.output_path is not None:
        write_table(report, config.output_path, config.output_format)
    return report


# ---------------------------------------------------------------------------
# tables


def _rows(report: ErrorReport, fmt_err, fmt_rate) -> list[list[str]]:
    rows = []
    for i, lv in enumerate(report.levels):
        row = {"case": report.case,
               "deg_u": "" if report.deg_u is None else str(report.deg_u),
               "deg_q": "" if report.deg_q is None else str(report.deg_q),
               "N": str(lv.n_per_side), "newton_iters": str(lv.newton_iters)}
        for name in ERROR_COLUMNS:
            v = getattr(lv, name)
            row[name] = "" if v is None else fmt_err(v)
            prev = getattr(report.levels[i - 1], name) if i else None
            ok = i and v is not None and prev is not None and v > 0 and prev > 0
            row[name + "_rate"] = fmt_rate(convergence_rate(prev, v)) if ok else ""
        rows.append([row[c] for c in COLUMNS])
    return rows


def convergence_rate(coarse: float, fine: float) -> float:
    return math.log2(coarse / fine)


def emit_table(report: ErrorReport, format: OutputFormat = "csv", full_precision: bool = False) -> str:
    """Render the report; errors get 3 significant digits unless ``full_precision``."""
    if full_precision:
        rows = _rows(report, repr, repr)
    else:
        rows = _rows(report, lambda v: f"{v:.2e}", lambda r: f"{r:.2f}")
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(rows)
        return buf.getvalue()
    if format == "markdown":
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}")


def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".full.csv")


def write_table(report: ErrorReport, path, format: OutputFormat = "csv") -> Path:
    """Write the rounded table to ``path`` and the full-precision CSV beside it."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(emit_table(report, format))
        sidecar_path(path).write_text(emit_table(report, "csv", full_precision=True))
    except OSError as exc:
        raise OSError(f"cannot write table to {path}: {exc}") from exc
    return path


def parse_table(text: str) -> ErrorReport:
    """Inverse of ``emit_table(..., "csv")``; exact for full-precision output."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and list(rows[0].keys()) != COLUMNS:
        raise ValueError("unexpected table columns")

    def opt(s, conv):
        return conv(s) if s != "" else None

    if not rows:
        return ErrorReport("", None, None)
    first = rows[0]
    report = ErrorReport(first["case"], opt(first["deg_u"], int), opt(first["deg_q"], int))
    for r in rows:
        lv = LevelErrors(int(r["N"]), newton_iters=int(r["newton_iters"]))
        for name in ERROR_COLUMNS:
            setattr(lv, name, opt(r[name], float))
        report.levels.append(lv)
    return report


def read_table(path) -> ErrorReport:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read table {path}: {exc}") from exc
    return parse_table(text)


# ---------------------------------------------------------------------------
# command line


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="smectic-c0ip", description=__doc__)
    p.add_argument("--config", type=Path, help="key=value file; command-line flags take precedence")
    p.add_argument("--case", choices=list(KIND))
    p.add_argument("--deg-u", type=int)
    p.add_argument("--deg-q", type=int)
    p.add_argument("--n-list", type=_int_list)
    for name in ("q", "epsilon", "a1", "a2", "a3", "B", "K", "l"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--form", choices=["consistent", "inconsistent"])
    p.add_argument("--tol-abs", type=float)
    p.add_argument("--tol-rel", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--u-bc", choices=["interpolation", "projection"])
    p.add_argument("--q-bc", choices=["interpolation", "projection"])
    p.add_argument("--warm-start", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--jobs", type=int, help="refinement levels solved in parallel")
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=["csv", "markdown"])
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def read_config_file(path: Path) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment. Keys use flag names."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_").lstrip("_")] = value
    return out


def config_from_args(argv=None) -> tuple[StudyConfig, bool]:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        known = {a.dest for a in parser._actions} - {"help", "config"}
        fileopts = read_config_file(args.config)
        unknown = set(fileopts) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        # re-parse so the file goes through the same type conversion as flags
        flat = []
        for k, v in fileopts.items():
            flag = "--" + k.replace("_", "-")
            if k == "warm_start":
                flat.append(flag if v.lower() in ("1", "true", "yes", "on") else "--no-warm-start")
            elif k == "verbose":
                if v.lower() in ("1", "true", "yes", "on"):
                    flat.append(flag)
            else:
                flat += [flag, v]
        base = vars(parser.parse_args(flat))
        for k, v in vars(args).items():
            if v is not None and v is not False:
                base[k] = v
        args = argparse.Namespace(**base)

    case = args.case or "decoupled_q"
    overrides = {"deg_u": args.deg_u, "deg_q": args.deg_q, "n_list": args.n_list,
                 "tol_abs": args.tol_abs, "tol_rel": args.tol_rel, "max_iter": args.max_iter,
                 "u_bc": args.u_bc, "q_bc": args.q_bc, "warm_start": args.warm_start,
                 "jobs": args.jobs, "output_path": args.out, "output_format": args.format}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    for name in ("q", "epsilon", "a1", "a2", "a3", "B", "K", "l"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.form is not None:
        overrides["form_variant"] = args.form
    return StudyConfig.for_case(case, **overrides), bool(args.verbose)


def main(argv=None) -> int:
    try:
        config, verbose = config_from_args(argv)
    except (ValueError, TypeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse: --help or a bad flag
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    t0 = time.perf_counter()
    try:
        report = run_study(config)
    except StudyAborted as exc:
        print(f"study aborted: {exc}", file=sys.stderr)
        sys.stdout.write(emit_table(exc.report, config.output_format))
        return EXIT_NEWTON
    log.info("study finished in %.1f s", time.perf_counter() - t0)
    if config.output_path is None:
        sys.stdout.write(emit_table(report, config.output_format))
    else:
        print(f"wrote {config.output_path} and {sidecar_path(config.output_path)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
