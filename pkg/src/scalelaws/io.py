"""File formats: JSONL run logs, CSV inputs, fit/report JSON documents.

Run logs round-trip byte-identically through read -> write for canonical
field ordering.  All numeric emission uses full round-trip precision
(json/repr); display rounding happens only in the human-readable report.
"""

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone
from typing import Any, Optional, Union

import numpy as np

from . import __version__
from .errors import IngestError
from .lawcore import LossUnit, PurePowerLaw, RunRecord, ScalingLaw, SeriesPoint, Split, Variable
from .powerfit import FitReport

# ---------------------------------------------------------------------------
# Run logs (JSONL, one run per line)
# ---------------------------------------------------------------------------


def parse_run_line(obj: dict, line_no: int) -> RunRecord:
    try:
        run_id = obj["run_id"]
        n_params = int(obj["n_params"])
        batch_tokens = obj.get("batch_tokens")
        series = []
        for entry in obj["series"]:
            step, tokens, test_loss = entry[0], entry[1], entry[2]
            series.append(SeriesPoint(int(step), float(tokens), float(test_loss), Split.TEST))
            if len(entry) > 3 and entry[3] is not None:
                series.append(SeriesPoint(int(step), float(tokens), float(entry[3]), Split.TRAIN))
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise IngestError(f"line {line_no}: malformed run record ({exc})", line=line_no) from exc
    try:
        return RunRecord(run_id=run_id, n_params=n_params, series=tuple(series),
                         batch_tokens=int(batch_tokens) if batch_tokens is not None else None)
    except Exception as exc:
        raise IngestError(f"line {line_no}: run {run_id!r}: {exc}", line=line_no, run_id=run_id) from exc


def read_runs(path: str) -> list[RunRecord]:
    """Parse a JSONL run log; violations are reported with line numbers."""
    runs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"line {line_no}: invalid JSON ({exc})", line=line_no) from exc
            runs.append(parse_run_line(obj, line_no))
    return runs


def _num(x: float) -> Union[int, float]:
    return int(x) if float(x).is_integer() and abs(x) < 2 ** 53 else float(x)


def run_to_jsonl(run: RunRecord) -> str:
    """Serialize one run in canonical field order (lossless round trip)."""
    test = {p.step: p for p in run.series if p.split is Split.TEST}
    train = {p.step: p for p in run.series if p.split is Split.TRAIN}
    series = []
    for step in sorted(test):
        p = test[step]
        entry: list = [p.step, _num(p.tokens), p.loss]
        if step in train:
            entry.append(train[step].loss)
        series.append(entry)
    obj: dict[str, Any] = {"run_id": run.run_id, "n_params": run.n_params}
    if run.batch_tokens is not None:
        obj["batch_tokens"] = run.batch_tokens
    obj["series"] = series
    return json.dumps(obj, separators=(", ", ": "))


def write_runs(path_or_file, runs: list[RunRecord]) -> None:
    if hasattr(path_or_file, "write"):
        for run in runs:
            path_or_file.write(run_to_jsonl(run) + "\n")
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            for run in runs:
                fh.write(run_to_jsonl(run) + "\n")


# ---------------------------------------------------------------------------
# Law / fit serialization
# ---------------------------------------------------------------------------


def law_to_dict(law: Union[ScalingLaw, PurePowerLaw]) -> dict:
    if isinstance(law, ScalingLaw):
        return {
            "kind": "power_plus_const",
            "irreducible": law.irreducible,
            "scale": law.scale,
            "exponent": law.exponent,
            "variable": law.variable.value,
            "loss_unit": law.loss_unit.value,
            "tokens_per_example": law.tokens_per_example,
        }
    return {
        "kind": "pure_power",
        "coefficient": law.coefficient,
        "exponent": law.exponent,
        "input_units": law.input_units,
        "output_units": law.output_units,
    }


def law_from_dict(obj: dict) -> Union[ScalingLaw, PurePowerLaw]:
    if obj["kind"] == "power_plus_const":
        return ScalingLaw(
            irreducible=obj["irreducible"],
            scale=obj["scale"],
            exponent=obj["exponent"],
            variable=Variable(obj.get("variable", "compute")),
            loss_unit=LossUnit(obj.get("loss_unit", "nats-per-token")),
            tokens_per_example=obj.get("tokens_per_example"),
        )
    if obj["kind"] == "pure_power":
        return PurePowerLaw(
            coefficient=obj["coefficient"],
            exponent=obj["exponent"],
            input_units=obj.get("input_units", ""),
            output_units=obj.get("output_units", ""),
        )
    raise IngestError(f"unknown law kind {obj.get('kind')!r}")


def fit_to_dict(report: FitReport) -> dict:
    return {
        "law": law_to_dict(report.law),
        "residual_rms": report.residual_rms,
        "n_points": report.n_points,
        "converged": report.converged,
        "multistart_best_index": report.multistart_best_index,
        "ci": {k: list(v) for k, v in report.ci.items()} if report.ci else None,
        "notes": list(report.notes),
    }


def fit_from_dict(obj: dict) -> FitReport:
    return FitReport(
        law=law_from_dict(obj["law"]),
        residual_rms=obj["residual_rms"],
        n_points=obj["n_points"],
        converged=obj["converged"],
        multistart_best_index=obj.get("multistart_best_index", 0),
        ci={k: tuple(v) for k, v in obj["ci"].items()} if obj.get("ci") else None,
        notes=tuple(obj.get("notes", ())),
    )


def read_fit(path: str) -> FitReport:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    # Accept either a bare fit document or a full report embedding one.
    if "law" in obj:
        return fit_from_dict(obj)
    if "results" in obj and "fit" in obj["results"]:
        return fit_from_dict(obj["results"]["fit"])
    raise IngestError(f"{path}: no fit found in document")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def build_report(
    command: str,
    inputs: dict[str, str],
    settings: dict[str, Any],
    results: dict[str, Any],
    seed: Optional[int] = None,
) -> dict:
    """Assemble a report document; everything except created_at is
    deterministic for identical inputs, settings, and seed.

    ``inputs`` maps a label to a file path; each entry is recorded as a
    content digest so tampered inputs are detectable.
    """
    digests = {
        label: file_digest(path) if os.path.exists(path) else "missing"
        for label, path in inputs.items()
    }
    return {
        "tool": "scalelaws",
        "version": __version__,
        "command": command,
        "inputs": digests,
        "seed": seed,
        "settings": settings,
        "results": results,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }


def report_body(report: dict) -> str:
    """The deterministic portion of a report (timestamp excluded)."""
    body = {k: v for k, v in report.items() if k != "created_at"}
    return json.dumps(body, indent=2)


def write_report(path: str, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def render_report_text(report: dict) -> str:
    """Human-readable rendering with display rounding."""

    def fmt(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)

    lines = [
        f"scalelaws {report.get('version', '')} report",
        f"command: {report.get('command', '')}",
    ]
    inputs = report.get("inputs") or {}
    if inputs:
        lines.append("inputs:")
        for name, digest in inputs.items():
            lines.append(f"  {name}: {digest}")
    if report.get("seed") is not None:
        lines.append(f"seed: {report['seed']}")
    settings = report.get("settings") or {}
    if settings:
        lines.append("settings:")
        for k, v in settings.items():
            lines.append(f"  {k} = {fmt(v)}")
    lines.append("results:")
    lines.extend(_render_value(report.get("results", {}), indent=2))
    return "\n".join(lines) + "\n"


def _render_value(value, indent: int) -> list[str]:
    pad = " " * indent
    out = []
    if isinstance(value, dict):
        for k, v in value.items():
            if isinstance(v, (dict, list)):
                out.append(f"{pad}{k}:")
                out.extend(_render_value(v, indent + 2))
            else:
                out.append(f"{pad}{k} = {v:.6g}" if isinstance(v, float) else f"{pad}{k} = {v}")
    elif isinstance(value, list):
        for v in value:
            if isinstance(v, (dict, list)):
                out.extend(_render_value(v, indent + 2))
            else:
                out.append(f"{pad}- {v}")
    else:
        out.append(f"{pad}{value}")
    return out


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool) else str(v) for v in row) + "\n")


def read_xy_csv(path: str, expected_header: Optional[list[str]] = None) -> np.ndarray:
    """Two-column numeric CSV with a header row."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if expected_header and [h.strip() for h in header] != expected_header:
            raise IngestError(f"{path}: expected header {expected_header}, got {header}")
        rows = []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise IngestError(f"{path}:{line_no}: {exc}", line=line_no) from exc
    return np.asarray(rows, dtype=float)


def read_matrix_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-example loss matrix CSV: header n_params,example_0,...  Returns (sizes, matrix)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "n_params":
            raise IngestError(f"{path}: first column must be n_params")
        width = len(header)
        sizes, rows = [], []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            vals = line.split(",")
            if len(vals) != width:
                raise IngestError(f"{path}:{line_no}: ragged row", line=line_no)
            try:
                nums = [float(v) for v in vals]
            except ValueError as exc:
                raise IngestError(f"{path}:{line_no}: {exc}", line=line_no) from exc
            sizes.append(nums[0])
            rows.append(nums[1:])
    return np.asarray(sizes), np.asarray(rows)


def read_mi_csv(path: str) -> np.ndarray:
    return _read_n_col(path, ["n_params", "loss_unconditioned", "loss_conditioned", "loss_text"])


def _read_n_col(path: str, expected_header: list[str]) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().strip().split(",")]
        if header != expected_header:
            raise IngestError(f"{path}: expected header {expected_header}, got {header}")
        rows = []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise IngestError(f"{path}:{line_no}: {exc}", line=line_no) from exc
    return np.asarray(rows, dtype=float)


# ---------------------------------------------------------------------------
# Config (key = value) and environment
# ---------------------------------------------------------------------------

SEED_ENV_VAR = "SCALELAWS_SEED"


def read_config(path: str) -> dict[str, str]:
    """Key-value config file: `key = value` lines, `#` comments."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise IngestError(f"{path}:{line_no}: expected key = value", line=line_no)
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
