"""Command-line entry point: run, analyze, gen-config, replay.

Exit codes: 0 ok, 1 usage, 2 invalid config, 3 a detector flagged,
4 I/O (missing config, unreadable trace), 5 config syntax, 6 replay mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import defaultdict
from dataclasses import asdict, replace
from pathlib import Path

from . import analysis
from . import trace as tr
from .config import ConfigError, default_config, dump_config, from_dict, load_config
from .engine import run

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_FLAGGED, EXIT_IO = 0, 1, 2, 3, 4
EXIT_REPLAY_MISMATCH = 6

DETECTORS = ("bubble", "fluctuation", "transitivity", "regime")



class UsageError(Exception):
    pass


# -- analyze ---------------------------------------------------------------

def _companion(trace_path: Path, name: str, columns):
    path = trace_path.parent / name
    if not path.exists():
        return None
    return tr.read_table(path, columns)


def _bubble(trace, cfg, trace_path):
    rows = _companion(trace_path, "fundamentals.csv", tr.FUNDAMENTAL_COLUMNS)
    if not trace.records or rows is None:
        return None
    series = analysis.FundamentalSeries((int(t), o, float(v)) for t, o, v in rows)
    rep = analysis.detect_bubble(trace.records, series, cfg.bubble_window, cfg.gain_floor,
                                 cfg.bubble_fold)
    d = asdict(rep)
    del d["flagged"]
    return rep.flagged, d


def _transitivity(trace, cfg, trace_path):
    prefs = analysis.preferences_from_records(trace.records)
    if not prefs:
        return None
    cycles = analysis.detect_transitivity_violations(prefs)
    return bool(cycles), {"n_preferences": len(prefs), "cycles": [list(c) for c in cycles]}


def _fluctuation(trace, cfg, trace_path):
    rounds = _companion(trace_path, "rounds.csv", tr.ROUND_COLUMNS) or []
    last_offer = {}
    for row in rounds:
        last_offer[row[1]] = float(row[3])
    paid = defaultdict(list)
    for r in trace.records:
        if r.kind == "complete":
            paid[(r.market, r.object_ref)].append(r.price)
    prefs = analysis.preferences_from_records(trace.records)
    cycles = analysis.detect_transitivity_violations(prefs) if prefs else []
    reports = []
    for ens in cfg.ensembles:
        fills = paid.get(("compositional", ens.id))
        full = sum(fills) / len(fills) if fills else last_offer.get(ens.id)
        singles = {(m,): sum(p) / len(p) for m in ens.members
                   if (p := paid.get(("minimal", m)))}
        if not full or not singles:
            continue
        mine = [c for c in cycles if set(c) <= set(ens.members)]
        rep = analysis.detect_fluctuation(full, singles, cfg.fold_threshold,
                                          ensemble_id=ens.id, cycles=mine)
        d = asdict(rep)
        d["subset_values"] = {"-".join(k): v for k, v in rep.subset_values.items()}
        d["transitivity_cycles"] = [list(c) for c in rep.transitivity_cycles]
        reports.append(d)
    if not reports:
        return None
    return any(d["flagged"] for d in reports), {"ensembles": reports}


def _regime(trace, cfg, trace_path):
    rows = _companion(trace_path, "valuations.csv", tr.VALUATION_COLUMNS)
    if not rows or len(rows) < 10:
        return None
    points = [analysis.ValuationPoint(float(r[3]), float(r[4])) for r in rows]
    rep = analysis.regime_stats(points, cfg.rho, cfg.outlier_k)
    d = asdict(rep)
    d["label"] = rep.label.value
    d["variance_ratio"] = rep.variance_ratio if rep.variance_ratio != float("inf") else None
    return False, d


_RUNNERS = {"bubble": _bubble, "fluctuation": _fluctuation,
            "transitivity": _transitivity, "regime": _regime}


def analyze(trace_path, which=DETECTORS) -> list[dict]:
    """Run the chosen detectors on a trace; one report document per detector.

    ``result`` is null when the trace holds nothing the detector can use.
    """
    unknown = [w for w in which if w not in _RUNNERS]
    if unknown:
        raise UsageError(f"unknown detector {unknown[0]!r}; choose from {', '.join(DETECTORS)}")
    trace_path = Path(trace_path)
    trace = tr.read_trace(trace_path)
    try:
        cfg = from_dict(json.loads(trace.header["config"]))
    except (ValueError, ConfigError) as exc:
        raise tr.TraceError(f"embedded config unusable: {exc}") from None
    reports = []
    for name in which:
        out = _RUNNERS[name](trace, cfg, trace_path)
        flagged, result = out if out is not None else (False, None)
        reports.append({"detector": name, "flagged": flagged, "result": result})
    return reports


def _kv_line(report: dict) -> str:
    parts = [f"detector={report['detector']}", f"flagged={int(report['flagged'])}"]
    res = report["result"]
    if res is None:
        parts.append("result=null")
    else:
        for k, v in res.items():
            if isinstance(v, (list, dict)):
                v = json.dumps(v, separators=(",", ":"), sort_keys=True)
            parts.append(f"{k}={v}")
    return " ".join(parts)


# -- commands --------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.ticks is not None:
        overrides["ticks"] = args.ticks
    if args.out is not None:
        overrides["out_dir"] = args.out
    if overrides:
        data = replace(cfg, **overrides).to_dict()
        cfg = from_dict(data)
    result = run(cfg)
    out = result.write(cfg.out_dir)
    n_complete = sum(r.kind == "complete" for r in result.records)
    print(f"ticks={cfg.ticks} seed={cfg.seed} records={len(result.records)} "
          f"complete={n_complete} trace={out / 'trace.csv'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    which = tuple(w.strip() for w in args.detectors.split(",") if w.strip())
    reports = analyze(args.trace, which)
    out = Path(args.out) if args.out else Path(args.trace).parent / "reports.jsonl"
    try:
        with open(out, "w", encoding="utf-8") as fh:
            for rep in reports:
                fh.write(json.dumps(rep, sort_keys=True, allow_nan=False, default=str) + "\n")
    except OSError as exc:
        raise tr.TraceError(f"cannot write {out}: {exc}") from None
    for rep in reports:
        print(_kv_line(rep))
    return EXIT_FLAGGED if any(r["flagged"] for r in reports) else EXIT_OK


def cmd_gen_config(args) -> int:
    text = dump_config(default_config())
    try:
        Path(args.out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise tr.TraceError(f"cannot write {args.out}: {exc}") from None
    print(f"wrote {args.out}")
    return EXIT_OK


def replay(trace_path) -> list[str]:
    """Re-run the embedded config; names of output files that differ."""
    trace_path = Path(trace_path)
    trace = tr.read_trace(trace_path)
    try:
        cfg = from_dict(json.loads(trace.header["config"]))
    except (ValueError, ConfigError) as exc:
        raise tr.TraceError(f"embedded config unusable: {exc}") from None
    fresh = run(cfg).files()
    original_text = trace_path.read_text(encoding="utf-8")
    mismatched = [] if fresh["trace.csv"] == original_text else [trace_path.name]
    for name, text in fresh.items():
        sibling = trace_path.parent / name
        if name != "trace.csv" and sibling.exists():
            if sibling.read_text(encoding="utf-8") != text:
                mismatched.append(name)
    return mismatched


def cmd_replay(args) -> int:
    bad = replay(args.trace)
    if bad:
        print("replay mismatch: " + ", ".join(bad))
        return EXIT_REPLAY_MISMATCH
    print("replay identical")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cgsmarket", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a simulation from a TOML config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--ticks", type=int)
    r.add_argument("--out", help="output directory (overrides [output] out_dir)")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="run detectors over a trace")
    a.add_argument("--trace", required=True)
    a.add_argument("--detectors", default=",".join(DETECTORS),
                   help=f"comma-separated subset of {','.join(DETECTORS)}")
    a.add_argument("--out", help="report file (default: reports.jsonl next to the trace)")
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("gen-config", help="write a default config scaffold")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_config)

    rp = sub.add_parser("replay", help="re-run a trace's config and diff the outputs")
    rp.add_argument("--trace", required=True)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except tr.TraceError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
