"""
CSV export of traces

Floats are written with repr so that reruns can be compared byte for byte.
"""

import csv
from pathlib import Path
from typing import List, Union

from .engine import METRIC_COLUMNS, Trace

TRIAL_HEADER: List[str] = [
    "trial", "k", "algorithm", "gamma", "eta", "alpha0",
    "grad_norm_sq", "consensus_err", "objective", "lyapunov", "bytes_cum", "max_transmitted",
    "termination",
]

AGGREGATE_HEADER: List[str] = [
    "k", "algorithm", "gamma", "eta", "alpha0", "trials",
    "mean_grad_norm_sq", "mean_consensus_err", "mean_objective", "mean_lyapunov",
    "mean_bytes_cum", "mean_max_transmitted", "truncated",
]


def _fmt(value) -> str:
    if isinstance(value, (bool,)):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _run_fields(trace: Trace) -> List[str]:
    cfg = trace.config
    return [cfg.name, _fmt(cfg.gamma), _fmt(cfg.eta), _fmt(cfg.alpha0)]


def emit_csv(trace: Trace, path: Union[str, Path]) -> Path:
    """One row per (trial, round)"""
    path = Path(path)
    fields = _run_fields(trace)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_HEADER)
        for tt in trace.trials:
            termination = str(tt.termination)
            ks = tt.columns["k"]
            for r in range(len(tt)):
                row = [str(tt.trial), str(int(ks[r]))] + fields
                for c in METRIC_COLUMNS:
                    v = tt.columns[c][r]
                    row.append(str(int(v)) if c == "bytes_cum" else _fmt(v))
                row.append(termination)
                writer.writerow(row)
    return path


def emit_aggregate_csv(trace: Trace, path: Union[str, Path]) -> Path:
    """One row per round with the across-trial means"""
    path = Path(path)
    fields = _run_fields(trace)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_HEADER)
        for r in range(trace.length):
            row = [str(int(trace.aggregate["k"][r]))] + fields + [str(len(trace.trials))]
            row += [_fmt(trace.aggregate[c][r]) for c in METRIC_COLUMNS]
            row.append(_fmt(trace.truncated))
            writer.writerow(row)
    return path
