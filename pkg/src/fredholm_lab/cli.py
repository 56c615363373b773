"""Command-line frontend.

Reads an operator file, runs the requested pipeline, and prints a report
in text, JSON, or CSV.  Query blocks in the file supply defaults; flags
on the command line override them.  Exit codes: 0 on success, 2 for
parse or validation failures, 3 when --strict is set and any verdict
came back Indeterminate, 4 when the oracle certifiably disagrees with
the engine.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from types import SimpleNamespace

from .calculus import CalculusError
from .expr import LimitError, ParseError
from .geometry import GeometryError, is_fredholm_groupoid
from .limits import LimitsError, all_limit_operators
from .opfile import OpFileError, load_operator_file
from .oracle import (OracleError, OracleSpectrum, compare_intervals,
                     conditioning_trend, cross_validate)
from .report import (Report, render_figures, to_csv, to_json, to_text)
from .spectral import (APPROXIMATE, CERTIFIED, EXACT, Resolution,
                       SpectralError, essential_spectrum, fredholm_verdict)


class CliError(ValueError):
    pass


# ---------------------------------------------------------------------------
# flag parsing helpers
# ---------------------------------------------------------------------------

def parse_lambda(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    t = str(text).strip().replace(" ", "")
    try:
        return complex(t.replace("i", "j").replace("I", "j"))
    except ValueError:
        raise CliError(f"cannot parse lambda value {text!r}")


def parse_grid(text) -> list:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise CliError(f"lambda grid {text!r} is not start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise CliError(f"lambda grid {text!r} has a non-numeric part")
    if step <= 0:
        raise CliError("lambda grid step must be positive")
    if stop < start:
        raise CliError("lambda grid stop is below start")
    n = int(round((stop - start) / step))
    if n > 10000:
        raise CliError("lambda grid has more than 10000 points")
    vals = [start + k * step for k in range(n + 1)]
    if vals[-1] > stop + 1e-9 * max(1.0, abs(step)):
        vals.pop()
    return vals


def parse_window(text) -> tuple:
    parts = str(text).split(":")
    if len(parts) != 2:
        raise CliError(f"window {text!r} is not lo:hi")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError:
        raise CliError(f"window {text!r} has a non-numeric part")
    if hi <= lo:
        raise CliError("window upper end must exceed the lower end")
    return (lo, hi)


def thread_cap() -> int:
    raw = os.environ.get("FREDHOLM_LAB_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    cap = thread_cap()
    if cap > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=cap) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# option merging (file query block < command-line flags)
# ---------------------------------------------------------------------------

def merge_options(args, queries) -> SimpleNamespace:
    q = next((q for q in queries if q.kind == args.command), None)
    raw = dict(q.params) if q is not None else {}

    def pick(name, key):
        v = getattr(args, name, None)
        return v if v is not None else raw.get(key)

    cli_lam = getattr(args, "lam", None)
    cli_grid = getattr(args, "lambda_grid", None)
    if cli_lam is not None and cli_grid is not None:
        raise CliError("give either --lambda or --lambda-grid, not both")
    lam_raw = pick("lam", "lambda")
    grid_raw = pick("lambda_grid", "lambda_grid")
    if cli_lam is not None:
        grid_raw = None     # an explicit single lambda beats a file grid
    if cli_grid is not None:
        lam_raw = None
    window_raw = pick("window", "window")
    res_raw = pick("resolution", "resolution")
    seed_raw = pick("seed", "seed")

    opt = SimpleNamespace()
    opt.lam = parse_lambda(lam_raw) if lam_raw is not None else None
    opt.grid = parse_grid(grid_raw) if grid_raw is not None else None
    opt.window = parse_window(window_raw) if window_raw is not None else None
    try:
        opt.level = int(res_raw) if res_raw is not None else 1
    except (TypeError, ValueError):
        raise CliError(f"resolution must be an integer, got {res_raw!r}")
    if opt.level < 1:
        raise CliError("resolution must be at least 1")
    opt.res = Resolution.from_int(opt.level)
    opt.seed = int(seed_raw) if seed_raw is not None else None
    opt.strict = bool(getattr(args, "strict", False)) \
        or bool(raw.get("strict", False))
    opt.self_test = bool(getattr(args, "self_test", False))
    return opt


def option_flags(opt) -> list:
    out = []
    if opt.lam is not None:
        z = opt.lam
        out.append(f"lambda={z.real:g}" if z.imag == 0
                   else f"lambda={z.real:g}{z.imag:+g}i")
    if opt.grid is not None:
        out.append(f"lambda-grid={opt.grid[0]:g}..{opt.grid[-1]:g} "
                   f"({len(opt.grid)} points)")
    if opt.window is not None:
        out.append(f"window={opt.window[0]:g}:{opt.window[1]:g}")
    if opt.level != 1:
        out.append(f"resolution={opt.level}")
    if opt.strict:
        out.append("strict")
    if opt.seed is not None:
        out.append(f"seed={opt.seed}")
    if opt.self_test:
        out.append("self-test")
    return out


# ---------------------------------------------------------------------------
# echo blocks
# ---------------------------------------------------------------------------

def geometry_echo(space) -> dict:
    return {
        "class": space.geometry_class,
        "dim": space.ambient_dim,
        "label": space.label,
        "strata": [
            {"id": s.id, "dim": s.dim, "depth": s.depth,
             "isotropy": {"label": s.isotropy.describe(),
                          "kind": s.isotropy.kind,
                          "amenable": s.isotropy.amenable}}
            for s in space.strata],
    }


def operator_echo(opspec) -> list:
    if opspec is None:
        return None
    head = f"order {opspec.order}, shape {opspec.shape}"
    if opspec.sobolev:
        head += f", weight {opspec.sobolev:g}"
    if opspec.lower_order:
        head += ", lower order allowed"
    return [head] + opspec.op.describe().splitlines()


def _need_operator(parsed):
    if parsed.operator is None:
        raise CliError("this command needs an operator block in the file")
    return parsed.operator.op


# ---------------------------------------------------------------------------
# command payloads
# ---------------------------------------------------------------------------

def run_geom(parsed, opt):
    pred = is_fredholm_groupoid(parsed.space)
    payload = {"predicate": {"holds": bool(pred),
                             "failing_strata": sorted(pred.failing_strata),
                             "detail": pred.detail}}
    return payload, 0


def run_limits(parsed, opt):
    p = _need_operator(parsed)
    rows = []
    for L in all_limit_operators(p):
        rows.append({
            "stratum": L.stratum_id,
            "carrier": L.carrier,
            "isotropy": L.isotropy.describe(),
            "ghosts": [{"name": g.name, "weight": g.weight}
                       for g in L.ghosts],
            "surviving": [g.name for g in L.op.frame.gens if not g.ghost],
            "family": L.is_family(),
            "terms": L.op.describe().splitlines(),
        })
    rows.sort(key=lambda r: r["stratum"])
    return {"limit_operators": rows}, 0


def run_check(parsed, opt):
    p = _need_operator(parsed)
    if opt.grid is not None:
        lams = [complex(v) for v in opt.grid]
    elif opt.lam is not None:
        lams = [opt.lam]
    else:
        lams = [0j]
    lams.sort(key=lambda z: (z.real, z.imag))

    def one(lam):
        v = fredholm_verdict(p, lam, res=opt.res)
        d = v.to_dict()
        d["lambda"] = lam
        return d

    rows = _map_ordered(one, lams)
    payload = {"verdicts": rows}
    code = 0
    if opt.strict and any(r["decision"] == "Indeterminate" for r in rows):
        code = 3
    return payload, code


def run_essspec(parsed, opt):
    p = _need_operator(parsed)
    win = opt.window or Resolution().window
    sr = essential_spectrum(p, res=opt.res, window=win)
    per = []
    for row in sr.per_stratum:
        per.append({"stratum": row["stratum"],
                    "intervals": sorted((float(a), float(b))
                                        for a, b in (row["intervals"] or [])),
                    "status": row["status"],
                    "family": row.get("family", False),
                    "notes": list(row.get("notes", []))})
    per.sort(key=lambda r: r["stratum"])
    payload = {
        "kind": sr.kind,
        "status": sr.status,
        "window": [float(win[0]), float(win[1])],
        "intervals": sorted((float(a), float(b)) for a, b in sr.intervals),
        "samples": [complex(z) for z in (sr.samples or [])],
        "per_stratum": per,
        "notes": list(sr.notes),
    }
    return payload, 0


def _clip_intervals(intervals, lo, hi):
    out = []
    for a, b in intervals:
        a2, b2 = max(float(a), lo), min(float(b), hi)
        if a2 <= b2:
            out.append((a2, b2))
    return sorted(out)


def _grid_agreement(decision, status, trend):
    certified = status in (EXACT, CERTIFIED) and decision != "Indeterminate"
    if not certified or trend not in ("BoundedBelow", "Decaying"):
        return "not comparable"
    ok = (decision == "Fredholm" and trend == "BoundedBelow") or \
         (decision == "NotFredholm" and trend == "Decaying")
    return "agree" if ok else "disagree"


def run_validate(parsed, opt):
    p = _need_operator(parsed)
    win = opt.window or Resolution().window
    val = cross_validate(p, window=win, res=opt.res)

    def grid_row(lam):
        v = fredholm_verdict(p, lam, res=opt.res)
        try:
            trend = conditioning_trend(p, lam=lam).trend
        except OracleError as e:
            trend = f"not applicable ({e})"
        return {"lambda": lam, "engine": v.decision,
                "engine_status": v.status, "oracle": trend,
                "agreement": _grid_agreement(v.decision, v.status, trend)}

    lams = [complex(v) for v in (opt.grid or [])]
    lams.sort(key=lambda z: (z.real, z.imag))
    grid = _map_ordered(grid_row, lams)

    injected = []
    if opt.self_test:
        row = next((r for r in grid
                    if r["agreement"] in ("agree", "disagree")), None)
        if row is not None:
            flipped = ("Decaying" if row["oracle"] == "BoundedBelow"
                       else "BoundedBelow")
            row["oracle"] = flipped
            row["agreement"] = _grid_agreement(
                row["engine"], row["engine_status"], flipped)
            injected.append(f"inverted the oracle trend at lambda = "
                            f"{row['lambda'].real:g}")
        elif val.comparison in ("agree", "disagree"):
            delta = 1.0 + 10 * (5e-2 + 1.5 * val.oracle.resolution)
            shifted = OracleSpectrum(
                [(a + delta, b + delta) for a, b in val.oracle.intervals],
                val.oracle.status, val.oracle.window, val.oracle.runs,
                list(val.oracle.notes), val.oracle.resolution)
            val = compare_intervals(val.spectral, shifted, win)
            injected.append(f"shifted all oracle clusters by {delta:g}")
        else:
            raise CliError(
                "self-test needs at least one comparable item; this "
                "input yields none (try a certified operator or a "
                "lambda grid)")

    spec = val.spectral
    payload = {
        "comparison": val.comparison,
        "detail": val.detail,
        "window": [float(win[0]), float(win[1])],
        "engine_kind": spec.kind,
        "engine_status": spec.status,
        "engine_intervals": (_clip_intervals(spec.intervals, *win)
                             if spec.kind == "real" else None),
        "oracle_intervals": sorted((float(a), float(b))
                                   for a, b in val.oracle.intervals),
        "oracle_notes": list(val.oracle.notes),
        "mismatches": [[tag, float(x)] for tag, x in val.mismatches],
        "grid": grid,
        "self_test": injected,
    }
    n_disagree = int(val.comparison == "disagree") \
        + sum(r["agreement"] == "disagree" for r in grid)
    payload["disagreements"] = n_disagree
    if opt.self_test and n_disagree == 0:
        raise CliError("self-test failed: the injected fault was not "
                       "detected as a disagreement")
    code = 0
    if opt.strict and any(r["engine"] == "Indeterminate" for r in grid):
        code = 3
    if n_disagree:
        code = 4
    return payload, code


_HANDLERS = {"geom": run_geom, "limits": run_limits, "check": run_check,
             "essspec": run_essspec, "validate": run_validate}


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fredholm-lab",
        description="Fredholm verdicts and essential spectra for "
                    "geometric operators on stratified compactifications.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, needs_lambda=False, needs_window=False):
        sp.add_argument("file", help="operator file (.op)")
        if needs_lambda:
            sp.add_argument("--lambda", dest="lam", metavar="A+BI",
                            help="spectral parameter (complex accepted)")
            sp.add_argument("--lambda-grid", metavar="START:STOP:STEP",
                            help="evaluate on an inclusive real grid")
        if needs_window:
            sp.add_argument("--window", metavar="LO:HI",
                            help="real spectral window")
        sp.add_argument("--resolution", metavar="N",
                        help="resolution level (integer, default 1)")
        sp.add_argument("--strict", action="store_true",
                        help="exit 3 if any verdict is Indeterminate")
        sp.add_argument("--seed", metavar="N",
                        help="seed echoed into the report (sampling in "
                             "the pipelines is deterministic)")
        sp.add_argument("--format", dest="fmt", default="text",
                        choices=("text", "json", "csv"))
        sp.add_argument("--figures", metavar="DIR",
                        help="also render figures into DIR")

    common(sub.add_parser("geom", help="stratification, isotropy, "
                          "limit-criterion predicate"))
    common(sub.add_parser("limits", help="list the limit operators"))
    common(sub.add_parser("check", help="Fredholm verdicts"),
           needs_lambda=True)
    common(sub.add_parser("essspec", help="essential spectrum"),
           needs_window=True)
    vp = sub.add_parser("validate",
                        help="engine vs finite-difference oracle")
    common(vp, needs_lambda=True, needs_window=True)
    vp.add_argument("--self-test", dest="self_test", action="store_true",
                    help="inject a fault into the oracle data and require "
                         "the harness to flag it (expected exit: 4)")
    return ap


_VALUE_FLAGS = {"--window", "--lambda", "--lambda-grid", "--resolution",
                "--seed", "--format", "--figures"}


def _glue_values(argv):
    """Join value flags with their argument so negative values such as
    ``--window -2:6`` survive argparse's option detection."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        args = ap.parse_args(_glue_values(argv))
    except SystemExit as e:
        code = e.code if isinstance(e.code, int) else 2
        return code
    t0 = time.perf_counter()
    try:
        parsed = load_operator_file(args.file)
        opt = merge_options(args, parsed.queries)
        payload, code = _HANDLERS[args.command](parsed, opt)
    except (OpFileError, CliError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ParseError, LimitError, GeometryError, CalculusError,
            LimitsError, SpectralError, OracleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    report = Report(
        command=args.command,
        source=args.file,
        geometry=geometry_echo(parsed.space),
        operator=operator_echo(parsed.operator),
        payload=payload,
        flags=option_flags(opt),
        timing_s=time.perf_counter() - t0,
    )
    if args.figures:
        written = render_figures(report, args.figures)
        report.payload["figures"] = written
    renderer = {"text": to_text, "json": to_json, "csv": to_csv}[args.fmt]
    sys.stdout.write(renderer(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
