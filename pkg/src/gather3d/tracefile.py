"""Versioned line-delimited trace serialization.

A trace file is JSON lines: one header record carrying the format version
and the full experiment config echo, one record per recorded instant, and
one summary record.  Floats are serialized as shortest round-trip decimals
(Python's repr), so positions survive the round trip bit for bit.
"""

from __future__ import annotations

import json
import os
from typing import Any

import numpy as np

from . import analysis, swarm

TRACE_FORMAT = "gather3d-trace-v1"


def _entry_record(entry: analysis.TraceEntry, ses_radius: float, ell: dict | None):
    rec: dict[str, Any] = {
        "type": "step",
        "time": entry.time,
        "positions": [float(x) for x in entry.config.positions.ravel()],
        "multiplicities": [int(m) for m in entry.config.multiplicities],
        "merges": entry.merges,
        "ses_radius": ses_radius,
    }
    if entry.remap is not None:
        rec["remap"] = [int(i) for i in entry.remap]
    if entry.moves is not None:
        rec["moves"] = [float(x) for x in entry.moves.ravel()]
    if ell is not None:
        rec["ell"] = ell
    return rec


def write_trace(
    path: str,
    trace: analysis.Trace,
    config_echo: dict | None = None,
    ell_directions: np.ndarray | None = None,
    reports: list[analysis.CheckReport] | None = None,
) -> None:
    """Write header, per-step records, and a summary record atomically."""
    header = {
        "type": "header",
        "format": TRACE_FORMAT,
        "strategy": trace.strategy,
        "kind": trace.kind,
        "dt": trace.dt,
        "gather_tol": trace.gather_tol,
        "config": config_echo or {},
    }
    if ell_directions is not None and len(ell_directions):
        header["ell_directions"] = [float(x) for x in np.asarray(ell_directions).ravel()]
    lines = [json.dumps(header)]
    for entry in trace.entries:
        radius = analysis.global_ses_radius(entry.config)
        ell = None
        if ell_directions is not None and len(ell_directions):
            ell = [analysis.projected_length(entry.config, d) for d in ell_directions]
        lines.append(json.dumps(_entry_record(entry, radius, ell)))
    summary: dict[str, Any] = {
        "type": "summary",
        "gathered": trace.gathered,
        "elapsed": trace.elapsed,
        "initial_diameter": trace.initial_diameter,
        "n": trace.entries[0].config.total_robots,
        "final_live_points": trace.final_config.n_live,
        "checks": {
            r.name: {"passed": r.passed, "worst_margin": r.worst_margin}
            for r in (reports or [])
        },
    }
    lines.append(json.dumps(summary))
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_trace(path: str) -> tuple[analysis.Trace, dict, dict]:
    """Parse a trace file back into (Trace, header record, summary record)."""
    with open(path) as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty trace file")
    records = []
    for lineno, line in enumerate(lines, start=1):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
    header = records[0]
    if header.get("type") != "header" or header.get("format") != TRACE_FORMAT:
        raise ValueError(f"{path}:1: missing {TRACE_FORMAT} header")
    if records[-1].get("type") != "summary":
        raise ValueError(f"{path}:{len(records)}: missing summary record")
    summary = records[-1]
    entries = []
    initial_diameter = 0.0
    for k, rec in enumerate(records[1:-1], start=2):
        if rec.get("type") != "step":
            raise ValueError(f"{path}:{k}: expected a step record")
        positions = np.array(rec["positions"], dtype=float).reshape(-1, 3)
        mult = np.array(rec["multiplicities"], dtype=np.int64)
        config = swarm.Configuration(positions, mult, float(rec["time"]))
        moves = rec.get("moves")
        if moves is not None:
            moves = np.array(moves, dtype=float).reshape(-1, 3)
        remap = rec.get("remap")
        if remap is not None:
            remap = np.array(remap, dtype=np.int64)
        entries.append(
            analysis.TraceEntry(
                time=float(rec["time"]),
                config=config,
                moves=moves,
                merges=int(rec.get("merges", 0)),
                remap=remap,
            )
        )
        if k == 2:
            initial_diameter = swarm.diameter(config)
    if not entries:
        raise ValueError(f"{path}: trace has no step records")
    trace = analysis.Trace(
        strategy=str(header.get("strategy", "")),
        kind=str(header.get("kind", "")),
        dt=float(header.get("dt", 1.0)),
        gather_tol=float(header.get("gather_tol", 0.0)),
        initial_diameter=initial_diameter,
        gathered=bool(summary.get("gathered", False)),
        entries=entries,
    )
    trace.validate()
    return trace, header, summary
