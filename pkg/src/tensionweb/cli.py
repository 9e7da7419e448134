"""Command-line front end.

Exit codes: 0 success or a positive answer, 1 a negative answer (inadmissible
loading, failed verification, stuck loading), 2 bad usage or bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .admissibility import (InadmissibleError, NotBalancedError, check, is_admissible, stuck_classify)
from .core import (ConfigError, TerminalConfig, Tolerances, convex_hull, equilibrium_residual, michell_cost)
from .io import DocumentError, ProblemDocument, WebDocument, dumps, read_problem, read_web
from .junctions import JunctionError, reduce_all
from .render import render_svg
from .uniloadable import (NotInteriorError, PipelineError, cone_synthesis, make_uniloadable,
                          verify_uniloadable)
from .webbuild import PlanarityError, find_stress, minimal_loops, pairwise_web, simplify_loops, loop_bound

OK, NEGATIVE, BAD_INPUT = 0, 1, 2


class UsageError(Exception):
    pass


def _tolerances(doc: ProblemDocument | None, flag: float | None) -> Tolerances:
    """Document settings, then TENSIONWEB_TOL, then --tol, each overriding the previous."""
    tol = doc.tol() if doc is not None else Tolerances()
    tol = Tolerances.from_env(tol)
    if flag is not None:
        tol = replace(tol, tol_feas=flag, tol_eq=flag)
    return tol


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _finite(x):
    return None if x is None or not np.isfinite(x) else float(x)


def _write_doc(doc, out: str | None) -> None:
    text = dumps(doc)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _web_tensions(wdoc: WebDocument, cfg: TerminalConfig, tol: Tolerances):
    web = wdoc.web()
    web.check_matches(cfg)
    t = wdoc.tension_array()
    if t is None:
        t = find_stress(web, cfg, tol)
    return web, t


# ----------------------------------------------------------------- commands

def _check_one(path: str, tol_flag: float | None, stuck: bool) -> tuple[int, dict]:
    doc = read_problem(path)
    cfg = doc.config()
    tol = _tolerances(doc, tol_flag)
    try:
        rep = check(cfg, tol)
    except NotBalancedError as exc:
        return NEGATIVE, {"file": path, "admissible": False, "reason": str(exc)}
    admissible, exact = is_admissible(cfg, tol)
    out = {"file": path, "admissible": bool(admissible), "exact_arithmetic": bool(exact),
           "dual_margin": _finite(rep.dual_margin)}
    if rep.farkas_coefficients is not None:
        out["farkas"] = [{"i": i, "j": j, "lambda": v} for (i, j), v in sorted(rep.farkas_coefficients.items())
                         if v > tol.tol_feas]
    if rep.violating_displacement is not None:
        out["witness_displacement"] = np.asarray(rep.violating_displacement).reshape(cfg.n, cfg.dim).tolist()
    if stuck and admissible:
        out["stuck"] = stuck_classify(cfg, tol=tol).label
    return (OK if admissible else NEGATIVE), out


def _stuck_one(path: str, tol_flag: float | None) -> tuple[int, dict]:
    doc = read_problem(path)
    cfg = doc.config()
    tol = _tolerances(doc, tol_flag)
    try:
        rep = stuck_classify(cfg, tol=tol)
    except (InadmissibleError, NotBalancedError) as exc:
        return NEGATIVE, {"file": path, "classification": None, "reason": str(exc)}
    out = {"file": path, "classification": rep.label, "t_grid": list(rep.t_grid),
           "admissible_all_shifted": [bool(rep.shifted_all[t]) for t in rep.t_grid],
           "exact_arithmetic": bool(rep.exact_used)}
    if rep.terminal is not None:
        out["terminal"] = int(rep.terminal)
    return (OK if rep.label.endswith("unstuck") else NEGATIVE), out


def _batch(fn, paths, jobs: int, *args) -> int:
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_guarded, [fn] * len(paths), paths, *[[a] * len(paths) for a in args]))
    else:
        results = [_guarded(fn, p, *args) for p in paths]
    code = max(c for c, _ in results)
    if len(results) == 1:
        _emit(results[0][1])
    else:
        _emit([r for _, r in results])
    return code


def _guarded(fn, path, *args):
    try:
        return fn(path, *args)
    except (DocumentError, ConfigError, OSError) as exc:
        return BAD_INPUT, {"file": path, "error": str(exc)}


def cmd_check(a) -> int:
    return _batch(_check_one, a.problems, a.jobs, a.tol, a.stuck)


def cmd_stuck(a) -> int:
    return _batch(_stuck_one, a.problems, a.jobs, a.tol)


def cmd_build(a) -> int:
    doc = read_problem(a.problem)
    cfg = doc.config()
    tol = _tolerances(doc, a.tol)
    try:
        if a.mode == "pairwise":
            web, t = pairwise_web(cfg, tol=tol)
        else:
            web, t = make_uniloadable(cfg, tol, seed=a.seed)
    except (InadmissibleError, NotBalancedError, NotInteriorError) as exc:
        _emit({"built": False, "reason": str(exc)}, None)
        return NEGATIVE
    except ConfigError as exc:
        if "not admissible" in str(exc):
            _emit({"built": False, "reason": str(exc)}, None)
            return NEGATIVE
        raise
    _write_doc(WebDocument.from_web(web, t), a.out)
    return OK


def verify_report(web, t, cfg: TerminalConfig, tol: Tolerances) -> dict:
    checks = {}
    scale = 1.0 + float(np.abs(cfg.forces).max())
    if t is None:
        checks["supported"] = {"passed": False, "detail": "no nonnegative tensions balance the loading"}
        return checks
    res = equilibrium_residual(web, t, cfg)
    checks["residual"] = {"passed": bool(res <= 1e-8 * scale), "value": res}
    tmin = float(t.min()) if len(t) else 0.0
    checks["nonnegative"] = {"passed": bool(tmin >= -tol.tol_feas), "value": tmin}
    hull = convex_hull(cfg.positions, tol.tol_geom)
    outside = max((hull.distance_outside(p) for p in web.nodes), default=0.0)
    checks["hull"] = {"passed": bool(outside <= 1e-9 * max(1.0, float(np.abs(cfg.positions).max()))),
                      "value": float(outside)}
    cost, gap = michell_cost(web, t, cfg)
    checks["michell"] = {"passed": bool(gap <= 1e-8 * (1 + cost)), "cost": cost, "gap": gap}
    return checks


def cmd_verify(a) -> int:
    doc = read_problem(a.problem)
    cfg = doc.config()
    tol = _tolerances(doc, a.tol)
    wdoc = read_web(a.web)
    web, t = _web_tensions(wdoc, cfg, tol)
    checks = verify_report(web, t, cfg, tol)
    if a.uniloadable and t is not None:
        try:
            checks["uniloadable"] = {"passed": verify_uniloadable(web, tol)}
        except ConfigError as exc:
            checks["uniloadable"] = {"passed": False, "detail": str(exc)}
    passed = all(c["passed"] for c in checks.values())
    _emit({"passed": passed, "checks": checks, "failed": sorted(k for k, c in checks.items() if not c["passed"])})
    return OK if passed else NEGATIVE


def cmd_simplify(a) -> int:
    doc = read_problem(a.problem)
    cfg = doc.config()
    tol = _tolerances(doc, a.tol)
    web, t = _web_tensions(read_web(a.web), cfg, tol)
    if t is None:
        _emit({"simplified": False, "reason": "web does not support the loading"})
        return NEGATIVE
    if getattr(a, "pass") == "loops":
        if cfg.dim != 2:
            raise UsageError("loop simplification is planar")
        web, t = simplify_loops(web, t, cfg, tol)
        sys.stderr.write(f"minimal loops: {len(minimal_loops(web, t, tol))} (bound {loop_bound(cfg, tol)})\n")
    else:
        web, t = reduce_all(web, t, cfg, tol)
    _write_doc(WebDocument.from_web(web, t), a.out)
    return OK


def cmd_michell(a) -> int:
    doc = read_problem(a.problem)
    cfg = doc.config()
    tol = _tolerances(doc, a.tol)
    web, t = _web_tensions(read_web(a.web), cfg, tol)
    if t is None:
        _emit({"supported": False})
        return NEGATIVE
    cost, gap = michell_cost(web, t, cfg)
    work = float(np.einsum("ij,ij->", cfg.forces, cfg.positions))
    ok = gap <= 1e-8 * (1 + cost)
    _emit({"supported": True, "cost": cost, "work": work, "gap": gap, "identity_holds": bool(ok)})
    return OK if ok else NEGATIVE


def cmd_cone_synth(a) -> int:
    docs = [read_problem(p) for p in a.problems]
    X = np.array(docs[0].positions, dtype=float)
    for d in docs[1:]:
        if np.array(d.positions, dtype=float).shape != X.shape or not np.array_equal(np.array(d.positions), X):
            raise DocumentError("all ray documents must share the same terminal positions")
    tol = _tolerances(docs[0], a.tol)
    try:
        cw = cone_synthesis(X, [np.array(d.forces, dtype=float) for d in docs], tol, seed=a.seed)
    except (NotInteriorError, NotBalancedError, InadmissibleError) as exc:
        _emit({"built": False, "reason": str(exc)})
        return NEGATIVE
    _write_doc(WebDocument.from_web(cw.web, cw.tensions), a.out)
    return OK


def cmd_render(a) -> int:
    wdoc = read_web(a.web)
    web = wdoc.web()
    cfg = read_problem(a.problem).config() if a.problem else None
    if web.dim == 3 and a.project is None:
        raise UsageError("3-d webs need --project xy|xz|yz")
    svg = render_svg(web, wdoc.tension_array(), cfg, a.project)
    if a.out:
        with open(a.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    else:
        sys.stdout.write(svg)
    return OK


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tensionweb", description="Tension-only wire webs: check, build, verify.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=False):
        sp.add_argument("--tol", type=float, default=None, help="feasibility and equilibrium tolerance")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = common(sub.add_parser("check", help="decide admissibility of loadings"))
    sp.add_argument("problems", nargs="+")
    sp.add_argument("--stuck", action="store_true", help="also classify stuck loadings")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_check)

    sp = common(sub.add_parser("stuck", help="classify admissible loadings as stuck or unstuck"))
    sp.add_argument("problems", nargs="+")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_stuck)

    sp = common(sub.add_parser("build", help="construct a web supporting the loading"), seed=True)
    sp.add_argument("problem")
    sp.add_argument("--mode", choices=("pairwise", "uniloadable"), default="pairwise")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_build)

    sp = common(sub.add_parser("verify", help="check a web against a loading"))
    sp.add_argument("web")
    sp.add_argument("problem")
    sp.add_argument("--uniloadable", action="store_true", help="also require a single supported ray")
    sp.set_defaults(func=cmd_verify)

    sp = common(sub.add_parser("simplify", help="remove loops or reduce junction degrees"))
    sp.add_argument("web")
    sp.add_argument("problem")
    sp.add_argument("--pass", choices=("loops", "junctions"), default="loops")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simplify)

    sp = common(sub.add_parser("michell", help="report the cost identity of a web"))
    sp.add_argument("web")
    sp.add_argument("problem")
    sp.set_defaults(func=cmd_michell)

    sp = common(sub.add_parser("cone-synth", help="superpose uniloadable webs, one per ray"), seed=True)
    sp.add_argument("problems", nargs="+", help="one problem document per ray, same positions")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_cone_synth)

    sp = sub.add_parser("render", help="draw a web as SVG")
    sp.add_argument("web")
    sp.add_argument("--problem", help="problem document, for force arrows")
    sp.add_argument("--project", choices=("xy", "xz", "yz"))
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_render)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return BAD_INPUT if exc.code else OK
    if getattr(args, "tol", None) is not None and not (args.tol > 0 and np.isfinite(args.tol)):
        sys.stderr.write("tensionweb: --tol must be a positive number\n")
        return BAD_INPUT
    try:
        return args.func(args)
    except (PipelineError, JunctionError, PlanarityError) as exc:
        sys.stderr.write(f"tensionweb: {exc}\n")
        return NEGATIVE
    except (UsageError, DocumentError, ConfigError, OSError, ValueError) as exc:
        sys.stderr.write(f"tensionweb: {exc}\n")
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
