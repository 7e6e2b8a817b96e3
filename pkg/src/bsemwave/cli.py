"""Command-line driver.

    bsemwave converge --case plane-wave --h 0.2 --p 2..12 --method sem
    bsemwave run --case circular-shoal --p 5 --ref-p 15
    bsemwave run --case elliptic-shoal --p 6
    bsemwave dump-mesh --case circular-shoal --p 4
    bsemwave kernel-check --profile constant

Options may also come from a ``key = value`` file given with ``--config``;
keys are the long option names (dashes or underscores), command-line
flags take precedence.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

FIELD_COLUMNS = ("x", "y", "re_phi_hat", "im_phi_hat", "re_phi", "im_phi", "H", "H_norm")
CONVERGENCE_COLUMNS = ("p", "n", "dof", "linf_error", "relative_error", "runtime_s")
PROFILE_COLUMNS = ("s", "re_phi_hat", "im_phi_hat", "H_norm")
KERNEL_COLUMNS = ("x", "y", "xp", "yp", "kr", "re_variable", "im_variable", "re_constant", "im_constant", "rel_diff")

CASE_NAMES = {"plane-wave": "plane_wave", "circular-shoal": "circular_shoal", "elliptic-shoal": "elliptic_shoal"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _order_list(text: str) -> list[int]:
    """'2..12', '3,5,8' or '6' -> list of orders."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out or any(p < 1 for p in out):
        raise argparse.ArgumentTypeError(f"invalid order list {text!r}")
    return out


def _orders(text):
    try:
        return _order_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid order list {text!r}") from exc


def _size(text: str) -> float:
    """Element size, also accepting fractions such as 1/5."""
    try:
        if "/" in text:
            a, b = text.split("/", 1)
            return float(a) / float(b)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"invalid size {text!r}") from exc


def _section(text: str):
    try:
        axis, value = text.split("=", 1)
        axis = axis.strip()
        if axis not in ("x", "y"):
            raise ValueError
        return axis, float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"section must look like 'y=1.2', got {text!r}") from exc


def _positive_int(text):
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from exc
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bsemwave", description="Coupled boundary/spectral element mild-slope solver")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, with_case=True):
        sp.add_argument("--config", type=Path, help="key = value file with defaults for any option")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--threads", type=_positive_int, default=None, help="cap on BLAS/LAPACK threads")
        if with_case:
            sp.add_argument("--case", choices=sorted(CASE_NAMES), default=None, required=False)

    def wave(sp):
        sp.add_argument("--nx", type=_positive_int)
        sp.add_argument("--ny", type=_positive_int)
        sp.add_argument("--period", type=float, help="wave period [s]")
        sp.add_argument("--theta", type=float, help="incidence angle [degrees] from the x axis")
        sp.add_argument("--height", type=float, help="incident wave height [m] (elliptic shoal)")
        sp.add_argument("--section", type=_section, action="append", help="profile line, e.g. y=1.2 (repeatable)")
        sp.add_argument("--samples", type=_positive_int, default=None, help="points per profile")
        sp.add_argument("--kernel-tol", type=float, default=None, help="tail tolerance of the variable-depth kernel")
        sp.add_argument("--cache", type=Path, default=None, help="directory for reference fields")

    conv = sub.add_parser("converge", help="error against order p")
    common(conv)
    wave(conv)
    conv.add_argument("--p", type=_orders, default=None, help="orders, e.g. 2..12")
    conv.add_argument("--h", type=_size, default=None, help="element size (plane wave)")
    conv.add_argument("--method", choices=("sem", "bsem"), default=None)
    conv.add_argument("--ref-p", type=_positive_int, default=None)
    conv.add_argument("--no-timing", action="store_true", default=None,
                      help="write runtime_s as 0 so repeated runs are byte-identical")

    run = sub.add_parser("run", help="single coupled run with field and profile output")
    common(run)
    wave(run)
    run.add_argument("--p", type=_positive_int, default=None)
    run.add_argument("--ref-p", type=int, default=None, help="reference order (circular shoal); 0 disables")
    run.add_argument("--no-timing", action="store_true", default=None)

    dm = sub.add_parser("dump-mesh", help="write the mesh of a case as text")
    common(dm)
    dm.add_argument("--p", type=_positive_int, default=None)
    dm.add_argument("--nx", type=_positive_int)
    dm.add_argument("--ny", type=_positive_int)
    dm.add_argument("--h", type=_size, default=None)

    kc = sub.add_parser("kernel-check", help="variable-depth kernel against the constant-depth kernel")
    common(kc, with_case=False)
    kc.add_argument("--profile", choices=("constant", "slope"), default=None)
    kc.add_argument("--pairs", type=_positive_int, default=None)
    kc.add_argument("--seed", type=int, default=None)
    kc.add_argument("--period", type=float, default=None)
    kc.add_argument("--depth", type=float, default=None, help="depth of the constant profile [m]")
    kc.add_argument("--kernel-tol", type=float, default=None)
    kc.add_argument("--tolerance", type=float, default=None,
                    help="largest accepted relative difference for the constant profile")
    return parser


DEFAULTS = {
    "converge": dict(p=list(range(2, 13)), h=1 / 5, method="sem", ref_p=15, no_timing=False, samples=241),
    "run": dict(p=5, ref_p=15, no_timing=False, samples=241),
    "dump-mesh": dict(p=4, h=1 / 5),
    "kernel-check": dict(profile="constant", pairs=100, seed=2021, period=1.0, depth=0.45, tolerance=1e-6),
}
_CONVERTERS = {"p": None, "h": _size, "section": _section, "nx": _positive_int, "ny": _positive_int,
               "threads": _positive_int, "pairs": _positive_int, "samples": _positive_int,
               "ref_p": int, "seed": int, "out": Path, "cache": Path}


def read_config(path: Path, allowed) -> dict:
    """Parse a UTF-8 ``key = value`` file (``#`` comments); unknown keys
    are rejected."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _convert(key, value, command):
    if key == "section":
        return [_section(v) for v in value.split(";")]
    if key == "p":
        orders = _order_list(value)
        return orders if command == "converge" else orders[0]
    if key == "no_timing":
        return value.lower() in ("1", "true", "yes", "on")
    if key in _CONVERTERS and _CONVERTERS[key] is not None:
        return _CONVERTERS[key](value)
    if key in ("case", "method", "profile"):
        return value
    return float(value)


def parse_args(argv=None) -> argparse.Namespace:
    """Validated configuration; raises UsageError on bad input."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg = dict(DEFAULTS[ns.command])
    allowed = set(vars(ns)) - {"command", "config"}
    if ns.config is not None:
        try:
            file_cfg = {k: _convert(k, v, ns.command) for k, v in read_config(ns.config, allowed).items()}
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{ns.config}: {exc}") from exc
        cfg.update(file_cfg)
    for key, value in vars(ns).items():
        if value is not None:
            cfg[key] = value
    for key in allowed:
        cfg.setdefault(key, None)
    cfg["command"] = ns.command
    if ns.command != "kernel-check":
        if cfg.get("case") is None:
            raise UsageError(f"bsemwave {ns.command}: a case is required (--case {'|'.join(sorted(CASE_NAMES))})")
        if cfg["case"] not in CASE_NAMES:
            raise UsageError(f"unknown case {cfg['case']!r}")
        if cfg.get("cache") is None and "cache" in allowed:
            cfg["cache"] = Path(cfg["out"]) / "reference"
    if ns.command == "run" and cfg["case"] == "plane-wave":
        raise UsageError("the plane-wave case is a convergence study; use 'converge'")
    return argparse.Namespace(**cfg)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return format(float(v), ".17g")


def _write_rows(path, header, rows):
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_field_csv(solution, mesh, path) -> None:
    """One row per mesh node, columns as in ``FIELD_COLUMNS``."""
    if solution is None:
        _write_rows(path, FIELD_COLUMNS, [])
        return
    X = mesh.nodes
    rows = zip(X[:, 0], X[:, 1], solution.phi_hat.real, solution.phi_hat.imag, solution.phi.real,
               solution.phi.imag, solution.height, solution.height_norm)
    _write_rows(path, FIELD_COLUMNS, rows)


def write_profile_csv(profile, path) -> None:
    rows = zip(profile.coord, profile.phi_hat.real, profile.phi_hat.imag, profile.height_norm)
    _write_rows(path, PROFILE_COLUMNS, rows)


def write_convergence_csv(reports, path, timing: bool = True) -> None:
    rows = ((r.p, r.n, r.dof, r.linf_error, r.relative_error, r.runtime_s if timing else 0.0) for r in reports)
    _write_rows(path, CONVERGENCE_COLUMNS, rows)


def read_csv(path):
    """Header and float rows of a CSV written by this module."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [[float(v) for v in row] for row in r]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _case_kw(cfg) -> dict:
    kw = {}
    for key in ("nx", "ny", "period", "height"):
        if getattr(cfg, key, None) is not None:
            kw[key] = getattr(cfg, key)
    if getattr(cfg, "theta", None) is not None:
        kw["theta"] = math.radians(cfg.theta)
    return kw


def _section_name(line) -> str:
    axis, value = line
    return f"profile_{axis}{format(value, 'g').replace('-', 'm')}.csv"


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def cmd_converge(cfg) -> int:
    from . import bench

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    case = CASE_NAMES[cfg.case]
    if case == "plane_wave":
        reports = bench.run_plane_wave(cfg.h, cfg.p, cfg.method)
        name = f"convergence_plane_wave_{cfg.method}_h{cfg.h:.6g}.csv"
    elif case == "circular_shoal":
        kw = _case_kw(cfg)
        kw.pop("height", None)
        reports = []
        for p in cfg.p:
            res = bench.run_circular_shoal(p, p_ref=cfg.ref_p, cache_dir=cfg.cache, sections=(), **kw)
            reports.append(res.report)
            _log(f"p={p} relative error {res.report.relative_error:.3e}")
        name = "convergence_circular_shoal.csv"
    else:
        kw = _case_kw(cfg)
        runs = [bench.run_elliptic_shoal(p, sections=(), **kw) for p in cfg.p]
        finest = runs[-1]
        reports = []
        for r in runs:
            rel = bench.self_convergence(r, finest) if r is not finest else 0.0
            reports.append(bench.ErrorReport(r.report.p, r.report.n, r.report.dof, relative_error=rel,
                                             runtime_s=r.report.runtime_s))
        name = "convergence_elliptic_shoal.csv"
    write_convergence_csv(reports, out / name, timing=not cfg.no_timing)
    for r in reports:
        _log(f"p={r.p} dof={r.dof} linf={r.linf_error:.3e} rel={r.relative_error:.3e}")
    _log(f"wrote {out / name}")
    return EXIT_OK


def cmd_run(cfg) -> int:
    from . import bench

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    case = CASE_NAMES[cfg.case]
    kw = _case_kw(cfg)
    samples = cfg.samples
    if case == "circular_shoal":
        kw.pop("height", None)
        sections = tuple(cfg.section) if cfg.section else bench.CIRCULAR_SECTIONS
        res = bench.run_circular_shoal(cfg.p, p_ref=cfg.ref_p or None, cache_dir=cfg.cache, sections=sections,
                                       samples=samples, **kw)
    else:
        sections = tuple(cfg.section) if cfg.section else bench.ELLIPTIC_SECTIONS
        res = bench.run_elliptic_shoal(cfg.p, sections=(), **kw)
        for line in sections:
            res.profiles[line] = bench.height_profile(res, line, samples,
                                                      span=bench.ELLIPTIC_SECTION_RANGE[line[0]])
    stem = f"{case}_p{cfg.p}"
    write_field_csv(res.solution, res.mesh, out / f"{stem}_field.csv")
    for line, prof in res.profiles.items():
        write_profile_csv(prof, out / f"{stem}_{_section_name(line)}")
    write_convergence_csv([res.report], out / f"{stem}_summary.csv", timing=not cfg.no_timing)
    _log(f"{case} p={cfg.p}: residual {res.solution.residual:.2e}, "
         f"H/H0 in [{res.solution.height_norm.min():.3f}, {res.solution.height_norm.max():.3f}]")
    if not math.isnan(res.report.relative_error):
        _log(f"relative error against p={cfg.ref_p}: {res.report.relative_error:.3e}")
    for w in res.warnings:
        _log(f"warning: {w}")
    if res.solution.residual > 1e-8:
        _log("solver residual too large")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_dump_mesh(cfg) -> int:
    from . import bench
    from .mesh import dump_mesh

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    case = CASE_NAMES[cfg.case]
    if case == "plane_wave":
        mesh = bench.plane_wave_mesh(cfg.h, cfg.p)
    elif case == "circular_shoal":
        mesh, _, _ = bench.circular_shoal_setup(cfg.p, **{k: v for k, v in _case_kw(cfg).items() if k != "height"})
    else:
        mesh, _, _ = bench.elliptic_shoal_setup(cfg.p, **_case_kw(cfg))
    path = out / f"mesh_{case}_p{cfg.p}.txt"
    dump_mesh(mesh, path)
    _log(f"wrote {path}: {mesh.n_nodes} nodes, {len(mesh.elements)} elements, "
         f"{len(mesh.boundary_elements)} boundary elements")
    return EXIT_OK


def cmd_kernel_check(cfg) -> int:
    import numpy as np

    from .greens import TransformedProfile, greens_constant, greens_variable
    from .waves import slope_profile, solve_dispersion

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    omega = 2 * math.pi / cfg.period
    rng = np.random.default_rng(cfg.seed)
    if cfg.profile == "constant":
        k = float(solve_dispersion(omega, cfg.depth))
        profile = TransformedProfile.constant(k)
        r = rng.uniform(0.1, 20.0, cfg.pairs) / k
        ang = rng.uniform(0, 2 * math.pi, cfg.pairs)
        xp = rng.uniform(-1, 1, (cfg.pairs, 2))
    else:
        profile = TransformedProfile.from_bathymetry(omega, slope_profile())
        xp = np.column_stack([rng.uniform(-10, 12, cfg.pairs), rng.uniform(-10, 10, cfg.pairs)])
        r = rng.uniform(0.05, 3.0, cfg.pairs)
        ang = rng.uniform(0, 2 * math.pi, cfg.pairs)
    x = xp + np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    kw = {} if cfg.kernel_tol is None else {"tol": cfg.kernel_tol}
    var = greens_variable(profile, x, xp, **kw).psi
    k0 = profile.k(xp[:, 0])
    const = greens_constant(x, xp, k0).psi
    rel = np.abs(var - const) / np.abs(const)
    rows = zip(x[:, 0], x[:, 1], xp[:, 0], xp[:, 1], k0 * r, var.real, var.imag, const.real, const.imag, rel)
    path = out / f"kernel_check_{cfg.profile}.csv"
    _write_rows(path, KERNEL_COLUMNS, rows)
    _log(f"wrote {path}: max relative difference {rel.max():.3e}")
    if cfg.profile == "constant" and rel.max() > cfg.tolerance:
        return EXIT_FAILURE
    return EXIT_OK


COMMANDS = {"converge": cmd_converge, "run": cmd_run, "dump-mesh": cmd_dump_mesh, "kernel-check": cmd_kernel_check}


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        if cfg.threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=cfg.threads):
                return COMMANDS[cfg.command](cfg)
        return COMMANDS[cfg.command](cfg)
    except (OSError, ValueError, ArithmeticError, RuntimeError, MemoryError) as exc:
        print(f"bsemwave: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
