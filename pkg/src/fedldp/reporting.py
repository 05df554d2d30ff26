"""Stable, locale-independent serialization of sweep/simulation artifacts.

CSV and JSON floats are written with 17 significant digits ('.17g') so every
double round-trips exactly; booleans are lowercase true/false; JSON keys are
sorted.  Nothing here embeds timestamps, so equal inputs produce byte-equal
files, which the run manifests pin down with content digests.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, Iterable, Sequence

from .accountants import Method
from .errors import DomainError
from .fedsgd_sim import SimResult
from .privacy_core import ValidityReport
from .tradeoff import TradeoffPoint

__all__ = [
    "SWEEP_COLUMNS",
    "TRAJECTORY_COLUMNS",
    "fmt",
    "render_json",
    "write_sweep_csv",
    "read_sweep_csv",
    "write_trajectory_csv",
    "sha256_file",
    "build_manifest",
]

SWEEP_COLUMNS = (
    "method",
    "T",
    "epsilon",
    "sigma_k_sq",
    "sigma_agg_sq",
    "utility_lb",
    "rate_ub_bits",
    "q_ok",
    "sigma_ok",
    "epsilon_ok",
    "error",
)

TRAJECTORY_COLUMNS = (
    "round",
    "mean_loss_gap",
    "stderr_loss_gap",
    "mean_mse",
    "stderr_mse",
)


def fmt(value: Any) -> str:
    """Render one CSV cell: 17-significant-digit floats, lowercase booleans."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def render_json(value: Any, indent: int = 0) -> str:
    """Deterministic JSON text: sorted keys, '.17g' floats, no whitespace drift."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        parts = [
            f'{inner}"{key}": {render_json(value[key], indent + 1)}'
            for key in sorted(value)
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        parts = [f"{inner}{render_json(item, indent + 1)}" for item in value]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, Method):
        return f'"{value.value}"'
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{escaped}"'
    raise DomainError(f"cannot serialize {type(value).__name__} to JSON")


def write_sweep_csv(rows: Sequence[TradeoffPoint], path: Path | str) -> Path:
    path = Path(path)
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        v = row.validity
        cells = (
            row.method.value,
            row.rounds,
            row.epsilon,
            row.sigma_k_sq,
            row.sigma_agg_sq,
            row.utility_lb,
            row.rate_ub_bits,
            None if v is None else v.q_ok,
            None if v is None else v.sigma_ok,
            None if v is None else v.epsilon_ok,
            row.error,
        )
        lines.append(",".join(fmt(c) for c in cells))
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    return path


def _parse_optional_float(cell: str) -> float | None:
    return None if cell == "" else float(cell)


def read_sweep_csv(path: Path | str) -> list[TradeoffPoint]:
    """Parse a sweep CSV back into rows (used by re-plotting)."""
    text = Path(path).read_text(encoding="ascii")
    lines = [line for line in text.split("\n") if line]
    if not lines or tuple(lines[0].split(",")) != SWEEP_COLUMNS:
        raise DomainError(f"{path} does not carry the sweep CSV schema")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(SWEEP_COLUMNS):
            raise DomainError(f"malformed sweep CSV row: {line!r}")
        flags = cells[7:10]
        validity = (
            None
            if "" in flags
            else ValidityReport(*(flag == "true" for flag in flags))
        )
        rows.append(
            TradeoffPoint(
                method=Method(cells[0]),
                rounds=int(cells[1]),
                epsilon=float(cells[2]),
                sigma_k_sq=_parse_optional_float(cells[3]),
                sigma_agg_sq=_parse_optional_float(cells[4]),
                utility_lb=_parse_optional_float(cells[5]),
                rate_ub_bits=_parse_optional_float(cells[6]),
                validity=validity,
                error=cells[10],
            )
        )
    return rows


def write_trajectory_csv(result: SimResult, path: Path | str) -> Path:
    path = Path(path)
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for i, rnd in enumerate(result.round_index):
        cells = (
            int(rnd),
            float(result.mean_loss_gap[i]),
            float(result.stderr_loss_gap[i]),
            float(result.mean_mse[i]),
            float(result.stderr_mse[i]),
        )
        lines.append(",".join(fmt(c) for c in cells))
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    return path


def sha256_file(path: Path | str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_manifest(
    command: str,
    parameters: dict,
    seed: int | None,
    artifacts: Iterable[Path | str],
    extra: dict | None = None,
) -> dict:
    """Reproducibility record: resolved inputs plus digests of every output."""
    from . import __version__

    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "parameters": parameters,
        "artifacts": [
            {"path": Path(p).name, "sha256": sha256_file(p)} for p in artifacts
        ],
    }
    if extra:
        manifest.update(extra)
    return manifest
