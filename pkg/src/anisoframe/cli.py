"""Command-line front end.

``anisoframe <cover|pou|norm|analyze|synthesize|roundtrip|certify> --config FILE
[--out DIR] [--threads N] [--input FILE]``

Each command writes ``<command>_report.json`` (sorted keys, the resolved
configuration embedded) plus plain CSV tables into the output directory.
Exit codes: 0 on success or PASS, 1 on a FAIL verdict, 2 on errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import certify as cert
from .config import RunConfig, load_config
from .cover import (
    BaseCell, admissibility_report, build_homogeneous, build_inhomogeneous, covering_check, neighbor_gap,
    probe_points,
)
from .dilation import validate_expansive
from .errors import AnisoframeError, ConfigInvalid
from .partition import WeightSequence, build_partition
from .prototypes import Prototype
from .signals import (
    coefficient_norm, decomposition_norm, read_coefficients, read_signal, write_coefficients, write_signal,
)
from .system import (
    analysis, empirical_frame_bounds, make_system, random_band_signal, roundtrip_error, synthesis,
)

COMMANDS = ("cover", "pou", "norm", "analyze", "synthesize", "roundtrip", "certify")
POU_TOL = 1e-10
ROUNDTRIP_SLACK = 1.05


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_matrix(cfg: RunConfig):
    try:
        return validate_expansive(cfg.matrix, cfg.lambda_minus, cfg.lambda_plus, cfg.spectral_margin)
    except AnisoframeError as exc:
        field = "matrix"
        text = str(exc)
        if "lambda_minus" in text:
            field = "lambda_minus"
        elif "lambda_plus" in text:
            field = "lambda_plus"
        elif "margin" in text:
            field = "spectral_margin"
        raise ConfigInvalid(field, text) from exc


def build_prototype(cfg: RunConfig, which: str, dim: int) -> Prototype:
    p = getattr(cfg, which)
    try:
        return Prototype(p.family, dim, p.order, p.width, p.role, tuple(p.radii), tuple(p.profile))
    except ValueError as exc:
        raise ConfigInvalid(which, str(exc)) from exc


def build_cell(cfg: RunConfig, which: str):
    data = getattr(cfg, which)
    if data is None:
        return None
    try:
        return BaseCell(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(which, str(exc)) from exc


def build_cover(cfg: RunConfig, m):
    rng = tuple(cfg.index_range)
    base, low = build_cell(cfg, "base_cell"), build_cell(cfg, "low_cell")
    try:
        if cfg.kind == "homogeneous":
            return build_homogeneous(m, base, rng)
        return build_inhomogeneous(m, low, base, rng)
    except (AnisoframeError, ValueError) as exc:
        raise ConfigInvalid("base_cell", str(exc)) from exc


def build_system(cfg: RunConfig, m, delta: float | None = None, parseval: bool | None = None):
    ann = build_prototype(cfg, "annular", m.dim)
    low = build_prototype(cfg, "lowpass", m.dim) if cfg.kind == "inhomogeneous" else None
    return make_system(cfg.kind, m, ann, cfg.delta if delta is None else delta, tuple(cfg.index_range), low,
                       cfg.parseval if parseval is None else parseval)


def _probe_grid(cfg: RunConfig, dim: int) -> int:
    if cfg.probe_grid is not None:
        return cfg.probe_grid
    return 10000 if dim == 1 else 100


# ---------------------------------------------------------------------------
# commands; each returns (result dict, ok flag, tables {name: rows})
# ---------------------------------------------------------------------------

def cmd_cover(cfg: RunConfig, **_):
    m = build_matrix(cfg)
    c = build_cover(cfg, m)
    check = covering_check(c, _probe_grid(cfg, m.dim))
    result = {"matrix": m.describe(), "cover": c.describe(), "covering": check,
              "admissibility": admissibility_report(c), "neighbor_gap": neighbor_gap(c)}
    return result, check["covered"], {}


def cmd_pou(cfg: RunConfig, **_):
    m = build_matrix(cfg)
    c = build_cover(cfg, m)
    grid = _probe_grid(cfg, m.dim)
    p = build_partition(c, grid)
    pts = probe_points(m.dim, covering_check(c, grid)["region"], grid)
    phis = p.all(pts)
    err = float(np.max(np.abs(phis.sum(axis=0) - 1.0))) if len(pts) else 0.0
    result = {"partition": p.describe(), "probe_count": int(len(pts)), "max_sum_error": err,
              "min_value": float(phis.min()) if len(pts) else 0.0,
              "max_value": float(phis.max()) if len(pts) else 0.0}
    ok = err < POU_TOL and result["min_value"] >= 0.0 and result["max_value"] <= 1.0
    return result, ok, {}


def _input(cfg: RunConfig, override):
    path = override or cfg.input
    if path is None:
        raise ConfigInvalid("input", "this command needs an input file")
    return path


def cmd_norm(cfg: RunConfig, input_path=None, **_):
    g = read_signal(_input(cfg, input_path))
    m = build_matrix(cfg)
    if g.dim != m.dim:
        raise ConfigInvalid("input", f"signal dimension {g.dim} differs from the matrix dimension {m.dim}")
    p = build_partition(build_cover(cfg, m), _probe_grid(cfg, m.dim))
    w = WeightSequence(cfg.kind, cfg.s, m.abs_det)
    details = {}
    value = decomposition_norm(g, p, w, cfg.p, cfg.q, details)
    result = {"norm": value, "indices": details["indices"], "excluded_mass": details["excluded_mass"],
              "bands": details["bands"]}
    return result, True, {"bands": details["bands"]}


def cmd_analyze(cfg: RunConfig, input_path=None, out_dir=None, **_):
    g = read_signal(_input(cfg, input_path))
    m = build_matrix(cfg)
    if g.dim != m.dim:
        raise ConfigInvalid("input", f"signal dimension {g.dim} differs from the matrix dimension {m.dim}")
    system = build_system(cfg, m)
    c = analysis(system, g)
    w = WeightSequence(cfg.kind, cfg.s, m.abs_det)
    write_coefficients(c, Path(out_dir) / "coefficients.csv")
    counts = [{"scale": i, "count": int(len(c.scales[i][1])),
               "max_abs": float(np.abs(c.scales[i][1]).max()) if len(c.scales[i][1]) else 0.0}
              for i in c.indices()]
    result = {"system": system.describe(), "coefficient_norm": coefficient_norm(c, m, w, cfg.p, cfg.q),
              "scales": counts, "coefficient_file": "coefficients.csv"}
    return result, True, {"scales": counts}


def cmd_synthesize(cfg: RunConfig, input_path=None, out_dir=None, **_):
    c = read_coefficients(_input(cfg, input_path))
    m = build_matrix(cfg)
    if c.dim != m.dim or c.kind != cfg.kind:
        raise ConfigInvalid("input", "coefficient file does not match the configured system")
    system = build_system(cfg, m)
    g = synthesis(system, c, cfg.grid_size, cfg.period)
    write_signal(g, Path(out_dir) / "signal.bin")
    result = {"system": system.describe(), "l2_norm": g.l2_norm(), "signal_file": "signal.bin"}
    return result, True, {}


def cmd_roundtrip(cfg: RunConfig, **_):
    if cfg.kind != "homogeneous":
        raise ConfigInvalid("kind", "the round-trip sweep needs a homogeneous system")
    m = build_matrix(cfg)
    rt = cfg.roundtrip
    rows = []
    for delta in rt.deltas:
        system = build_system(cfg, m, delta=delta, parseval=True)
        rng = np.random.default_rng(rt.seed)
        f = random_band_signal(system, cfg.grid_size, cfg.period, rng)
        lo, hi = empirical_frame_bounds(system, rt.trials, cfg.grid_size, cfg.period, rt.seed + 1)
        rows.append({"delta": delta, "rescaled_error": roundtrip_error(system, f),
                     "lower_bound": lo, "upper_bound": hi, "bound_ratio": hi / lo if rt.trials else None})
    rows.sort(key=lambda r: -r["delta"])
    errs = [r["rescaled_error"] for r in rows]
    ok = all(b <= a * ROUNDTRIP_SLACK for a, b in zip(errs, errs[1:]))
    return {"rows": rows, "error_non_increasing": ok}, ok, {"roundtrip": rows}


def cmd_certify(cfg: RunConfig, threads: int = 1, **_):
    m = build_matrix(cfg)
    tp = cert.theorem_params(cfg.p, cfg.q, cfg.p0, cfg.q0, cfg.eps, m.dim)
    ann = build_prototype(cfg, "annular", m.dim)
    low = build_prototype(cfg, "lowpass", m.dim) if cfg.kind == "inhomogeneous" else None
    c = cfg.certify
    prefix = "homo" if cfg.kind == "homogeneous" else "inhomo"
    reports, threshold_rows, sum_rows = [], [], []
    for role in c.roles:
        setup = cert.CertSetup(f"{prefix}-{role}", m, cfg.s, tp, ann, low, build_cell(cfg, "base_cell"),
                               build_cell(cfg, "low_cell"), c.convention, c.grid, c.margin, c.vanishing_cap)
        pairs = None if c.pairs is None else [tuple(x) for x in c.pairs]
        rep = cert.certify(setup, c.truncation, c.master_constant, pairs, threads)
        reports.append(rep)
        for row in rep.thresholds:
            threshold_rows.append({"case": rep.case, **{k: row[k] for k in ("name", "required", "provided", "ok")}})
        sum_rows.append({"case": rep.case, "T": rep.sums["T"], "rows": rep.sums["rows"],
                         "columns": rep.sums["columns"], "bound_rows": rep.bounds.get("rows"),
                         "bound_columns": rep.bounds.get("columns"), "status": rep.sums["status"],
                         "delta0": rep.delta0.get("value")})
    ok = all(r.verdict == "PASS" for r in reports)
    result = {"params": tp.to_dict(), "reports": [r.to_dict() for r in reports],
              "verdict": "PASS" if ok else "FAIL"}
    text = "".join(r.to_text() for r in reports)
    return result, ok, {"thresholds": threshold_rows, "sums": sum_rows, "_text": text}


HANDLERS = {
    "cover": cmd_cover, "pou": cmd_pou, "norm": cmd_norm, "analyze": cmd_analyze,
    "synthesize": cmd_synthesize, "roundtrip": cmd_roundtrip, "certify": cmd_certify,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def dumps(obj) -> str:
    return json.dumps(cert.json_ready(obj), sort_keys=True, indent=2) + "\n"


def csv_text(rows: list) -> str:
    rows = cert.json_ready(rows)
    if not rows:
        return ""
    cols = sorted({k for r in rows for k in r if not isinstance(r[k], (dict, list))})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k) for k in cols})
    return buf.getvalue()


def run(command: str, cfg: RunConfig, out_dir, threads: int = 1, input_path=None) -> tuple[dict, bool]:
    """Execute ``command`` and write its report and tables into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result, ok, tables = HANDLERS[command](cfg, input_path=input_path, out_dir=out, threads=threads)
    report = {"command": command, "config": cfg.to_dict(), "result": result, "success": bool(ok)}
    (out / f"{command}_report.json").write_text(dumps(report))
    text = tables.pop("_text", None)
    if text is not None:
        (out / f"{command}_report.txt").write_text(text)
    for name, rows in tables.items():
        (out / f"{command}_{name}.csv").write_text(csv_text(rows))
    return report, ok


def resolve_threads(flag) -> int:
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get("ANISOFRAME_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigInvalid("ANISOFRAME_THREADS", f"not an integer: {env!r}") from exc
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="anisoframe", description="Anisotropic wavelet systems and certification.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", default="anisoframe-out", help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="worker cap (default: ANISOFRAME_THREADS or 1)")
    parser.add_argument("--input", default=None, help="signal or coefficient file (overrides the config)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        _, ok = run(args.command, cfg, args.out, resolve_threads(args.threads), args.input)
    except ConfigInvalid as exc:
        print(f"error: invalid configuration field '{exc.field}': {exc.reason}", file=sys.stderr)
        return 2
    except (AnisoframeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"{args.command}: {'ok' if ok else 'FAIL'} (report in {args.out})")
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
