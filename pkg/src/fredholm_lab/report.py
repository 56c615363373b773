"""Report containers and renderers for the command-line frontend.

A Report is a plain bundle of JSON-friendly data.  Rendering to text is
for terminals, JSON for machines (byte-identical across identical runs:
the timing field is kept out of it on purpose), CSV for spreadsheets and
plotting scripts.  Figures are opt-in and land next to nothing else —
the caller names a directory and gets the written paths back.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__

SCHEMA = "fredholm-lab-report/1"


@dataclass
class Report:
    command: str
    source: str
    geometry: dict
    operator: Optional[list]      # normalized term lines, None for geom-only
    payload: dict
    flags: list = field(default_factory=list)
    version: str = __version__
    timing_s: float = 0.0


def jsonable(obj):
    """Recursively coerce numpy scalars, complex numbers, infinities and
    tuples into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Fraction):
        return int(obj) if obj.denominator == 1 else float(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, (np.complexfloating, complex)):
        z = complex(obj)
        if z.imag == 0:
            return jsonable(z.real)
        return {"re": jsonable(z.real), "im": jsonable(z.imag)}
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(r: Report) -> str:
    doc = {
        "schema": SCHEMA,
        "version": r.version,
        "command": r.command,
        "source": r.source,
        "geometry": jsonable(r.geometry),
        "operator": r.operator,
        "payload": jsonable(r.payload),
        "flags": list(r.flags),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def fmt_num(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, complex):
        if x.imag == 0:
            return fmt_num(x.real)
        return f"{x.real:g}{x.imag:+g}i"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:g}"
    return str(x)


def fmt_interval(iv) -> str:
    lo, hi = iv
    return f"[{fmt_num(float(lo))}, {fmt_num(float(hi))}]"


def to_text(r: Report) -> str:
    out = [f"# {r.command}  ({r.source})"]
    g = r.geometry
    out.append(f"geometry: class {g['class']}, {len(g['strata'])} strata")
    for s in g["strata"]:
        iso = s["isotropy"]
        tag = "" if iso["amenable"] else "  [NOT amenable]"
        out.append(f"  {s['id']}: depth {s['depth']}, isotropy "
                   f"{iso['label']}{tag}")
    if r.operator:
        out.append("operator:")
        out.extend(f"  {line}" for line in r.operator)
    body = _TEXT_BODIES.get(r.command)
    if body:
        out.extend(body(r.payload))
    for path in r.payload.get("figures", []):
        out.append(f"figure: {path}")
    if r.flags:
        out.append("flags: " + ", ".join(r.flags))
    out.append(f"({r.timing_s:.2f} s, v{r.version})")
    return "\n".join(out) + "\n"


def _text_geom(p: dict):
    pred = p["predicate"]
    yield ("predicate: holds" if pred["holds"] else
           f"predicate: FAILS at {', '.join(pred['failing_strata'])} "
           f"({pred['detail']})")


def _text_limits(p: dict):
    for row in p["limit_operators"]:
        yield f"stratum {row['stratum']}: carrier {row['carrier']}"
        if row["ghosts"]:
            gh = ", ".join(f"{g['name']} (weight {g['weight']})"
                           for g in row["ghosts"])
            yield f"  ghost generators: {gh}"
        if row["surviving"]:
            yield f"  surviving generators: {', '.join(row['surviving'])}"
        for line in row["terms"]:
            yield f"  {line}"


def _text_check(p: dict):
    for row in p["verdicts"]:
        lam = fmt_num(row["lambda"])
        yield f"lambda = {lam}: {row['decision']}  [{row['status']}]"
        for reason in row["reasons"]:
            yield f"  {reason}"
        for srow in row.get("strata", []):
            if "invertible" not in srow:
                # order-0 rows carry the symbol image instead
                if srow.get("intervals"):
                    vals = " U ".join(fmt_interval(iv)
                                      for iv in srow["intervals"])
                else:
                    vals = "(complex samples)"
                yield (f"  {srow['stratum']}: symbol values {vals}  "
                       f"[{srow['status']}]")
                continue
            if srow["invertible"] is None:
                mark = "unresolved"
            elif srow["invertible"]:
                mark = "ok"
            else:
                mark = "SINGULAR"
            margin = "n/a" if srow["margin"] is None else \
                fmt_num(srow["margin"])
            yield (f"  {srow['stratum']}: {mark}, margin {margin} "
                   f"({srow['method']}, {srow['status']})")


def _text_essspec(p: dict):
    yield f"window: {fmt_interval(p['window'])}"
    if p["kind"] == "real":
        ivs = " U ".join(fmt_interval(iv) for iv in p["intervals"]) or "(empty)"
        yield f"essential spectrum: {ivs}  [{p['status']}]"
    else:
        yield f"essential spectrum: {len(p['samples'])} complex samples " \
              f"[{p['status']}]"
    for row in p.get("per_stratum", []):
        if row["intervals"]:
            ivs = " U ".join(fmt_interval(iv) for iv in row["intervals"])
        else:
            ivs = "(complex samples)" if p["kind"] != "real" else "(empty)"
        yield f"  {row['stratum']}: {ivs}  [{row['status']}]"
    for n in p.get("notes", []):
        yield f"note: {n}"


def _text_validate(p: dict):
    yield f"comparison: {p['comparison']}"
    yield p["detail"]
    if p.get("engine_intervals") is not None:
        ivs = " U ".join(fmt_interval(iv) for iv in p["engine_intervals"])
        yield f"engine:  {ivs or '(empty)'}  [{p['engine_status']}]"
    if p.get("oracle_intervals") is not None:
        ivs = " U ".join(fmt_interval(iv) for iv in p["oracle_intervals"])
        yield f"oracle:  {ivs or '(empty)'}  [Approximate]"
    for row in p.get("grid", []):
        yield (f"  lambda = {fmt_num(row['lambda'])}: engine "
               f"{row['engine']} [{row['engine_status']}], oracle trend "
               f"{row['oracle']} -> {row['agreement']}")
    for note in p.get("self_test", []):
        yield f"self-test: {note}"
    yield (f"certified disagreements: {p['disagreements']}")


_TEXT_BODIES = {
    "geom": _text_geom,
    "limits": _text_limits,
    "check": _text_check,
    "essspec": _text_essspec,
    "validate": _text_validate,
}


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def to_csv(r: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if r.command == "geom":
        w.writerow(["stratum", "depth", "dim", "isotropy", "amenable",
                    "predicate_holds"])
        holds = r.payload["predicate"]["holds"]
        for s in r.geometry["strata"]:
            w.writerow([s["id"], s["depth"], s["dim"],
                        s["isotropy"]["label"], s["isotropy"]["amenable"],
                        holds])
    elif r.command == "limits":
        w.writerow(["stratum", "carrier", "ghosts", "surviving", "terms"])
        for row in r.payload["limit_operators"]:
            w.writerow([row["stratum"], row["carrier"],
                        " ".join(g["name"] for g in row["ghosts"]),
                        " ".join(row["surviving"]),
                        " | ".join(row["terms"])])
    elif r.command == "check":
        w.writerow(["lambda", "decision", "status", "reason"])
        for row in r.payload["verdicts"]:
            w.writerow([fmt_num(row["lambda"]), row["decision"],
                        row["status"], "; ".join(row["reasons"])])
    elif r.command == "essspec":
        w.writerow(["lo", "hi", "status"])
        if r.payload["kind"] == "real":
            for lo, hi in r.payload["intervals"]:
                w.writerow([fmt_num(float(lo)), fmt_num(float(hi)),
                            r.payload["status"]])
        else:
            for z in r.payload["samples"]:
                w.writerow([fmt_num(complex(z)), "", r.payload["status"]])
    elif r.command == "validate":
        w.writerow(["item", "engine", "oracle", "agreement"])
        w.writerow(["spectrum", r.payload.get("engine_status", ""),
                    "Approximate", r.payload["comparison"]])
        for row in r.payload.get("grid", []):
            w.writerow([f"lambda={fmt_num(row['lambda'])}", row["engine"],
                        row["oracle"], row["agreement"]])
    else:
        raise ValueError(f"no CSV layout for command {r.command!r}")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

_VERDICT_COLORS = {"Fredholm": "#2a7e43", "NotFredholm": "#b33636",
                   "Indeterminate": "#b38f36"}


def render_figures(r: Report, outdir: str) -> list:
    """Write the figures this command supports into outdir; returns the
    written paths (possibly empty — geom and limits have no figures)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(outdir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(r.source))[0]
    paths = []

    if r.command == "essspec" and r.payload["kind"] == "real":
        lo, hi = (float(v) for v in r.payload["window"])
        fig, ax = plt.subplots(figsize=(7.0, 2.4))
        rows = [("union", r.payload["intervals"])]
        rows += [(row["stratum"], row["intervals"])
                 for row in r.payload.get("per_stratum", [])]
        for k, (label, ivs) in enumerate(rows):
            y = len(rows) - 1 - k
            for a, b in ivs:
                a = max(float(a), lo - 0.05 * (hi - lo))
                b = min(float(b), hi + 0.05 * (hi - lo))
                ax.plot([a, b], [y, y], lw=6,
                        color="#446688" if k else "#222222",
                        solid_capstyle="butt")
        ax.set_yticks(range(len(rows)))
        ax.set_yticklabels([label for label, _ in reversed(rows)])
        ax.set_xlim(lo, hi)
        ax.set_xlabel("lambda")
        ax.set_title(f"essential spectrum ({r.payload['status']})")
        fig.tight_layout()
        path = os.path.join(outdir, f"{stem}_essspec.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

    elif r.command == "check" and len(r.payload["verdicts"]) > 1:
        rows = [row for row in r.payload["verdicts"]
                if not isinstance(row["lambda"], str)
                and complex(row["lambda"]).imag == 0]
        if rows:
            fig, ax = plt.subplots(figsize=(7.0, 1.8))
            for row in rows:
                lam = complex(row["lambda"]).real
                ax.scatter([lam], [0],
                           color=_VERDICT_COLORS.get(row["decision"], "#666"),
                           s=60, marker="s")
            ax.set_yticks([])
            ax.set_xlabel("lambda")
            handles = [plt.Line2D([], [], marker="s", ls="", color=c,
                                  label=d)
                       for d, c in _VERDICT_COLORS.items()]
            ax.legend(handles=handles, loc="upper center", ncol=3,
                      bbox_to_anchor=(0.5, 1.5), frameon=False)
            fig.tight_layout()
            path = os.path.join(outdir, f"{stem}_verdicts.png")
            fig.savefig(path, dpi=150)
            plt.close(fig)
            paths.append(path)

    elif r.command == "validate" and \
            r.payload.get("engine_intervals") is not None:
        fig, ax = plt.subplots(figsize=(7.0, 2.0))
        for y, (label, ivs) in enumerate(
                [("oracle", r.payload.get("oracle_intervals") or []),
                 ("engine", r.payload.get("engine_intervals") or [])]):
            for a, b in ivs:
                a, b = float(a), float(b)
                if math.isinf(b):
                    b = max(float(v) for v in r.payload["window"])
                ax.plot([a, b], [y, y], lw=6, solid_capstyle="butt",
                        color="#446688" if y else "#886644")
        ax.set_yticks([0, 1])
        ax.set_yticklabels(["oracle", "engine"])
        ax.set_xlabel("lambda")
        ax.set_title(f"cross-validation: {r.payload['comparison']}")
        fig.tight_layout()
        path = os.path.join(outdir, f"{stem}_validate.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

    return paths
