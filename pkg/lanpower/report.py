"""CSV, SVG and config-file input/output for the command-line front end."""

import logging
import tempfile
import typing
from pathlib import Path
from typing import Iterable, List, Union
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd
from pydantic import ValidationError

from exceptions import ConfigError
from inference import BiasSource
from models import SeriesSample
from schemas import DiagnosticRow, ExperimentConfig, PowerRow, SeriesSummary, Variant

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
POWER_COLUMNS = [
    "family",
    "n",
    "a",
    "variant",
    "m",
    "rejection_rate",
    "mc_stderr",
    "asymptotic_power",
    "seed",
    "limiting_power",
    "failures",
    "b_source",
]

PathLike = Union[str, Path]


def ensure_writable_dir(directory: PathLike) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with tempfile.TemporaryFile(dir=directory):
            pass
    except OSError as exc:
        raise ConfigError(f"output directory {directory} is not writable: {exc}") from exc
    return directory


def ensure_writable_file(path: PathLike) -> Path:
    path = Path(path)
    if path.is_dir():
        raise ConfigError(f"output {path} is a directory")
    ensure_writable_dir(path.parent)
    return path


def _read_records(path: PathLike) -> List[dict]:
    """CSV rows as dicts with empty cells mapped to None."""
    frame = pd.read_csv(path)
    return frame.astype(object).where(frame.notna(), None).to_dict(orient="records")


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    logger.info(f"wrote {path}")
    return path


def summarize_series(sample: SeriesSample) -> SeriesSummary:
    values = sample.values
    centered = values - values.mean()
    denom = float(np.sum(centered * centered))
    lag1 = float(np.sum(centered[1:] * centered[:-1]) / denom) if denom > 0 else 0.0
    return SeriesSummary(n=sample.n, mean=float(values.mean()), variance=float(values.var(ddof=1)) if values.size > 1 else 0.0, lag1_autocorrelation=lag1)


def write_series_csv(sample: SeriesSample, path: PathLike) -> Path:
    frame = pd.DataFrame({"index": np.arange(sample.values.size), "value": sample.values})
    return _write_frame(frame, path)


def read_series_csv(path: PathLike) -> SeriesSample:
    frame = pd.read_csv(path)
    return SeriesSample(values=frame["value"].to_numpy(dtype=float))


def write_power_csv(rows: Iterable[PowerRow], path: PathLike) -> Path:
    frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=POWER_COLUMNS)
    return _write_frame(frame, path)


def read_power_csv(path: PathLike) -> List[PowerRow]:
    return [PowerRow(**record) for record in _read_records(path)]


def write_diagnostics_csv(rows: Iterable[DiagnosticRow], path: PathLike) -> Path:
    frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=list(DiagnosticRow.model_fields))
    return _write_frame(frame, path)


def read_diagnostics_csv(path: PathLike) -> List[DiagnosticRow]:
    return [DiagnosticRow(**record) for record in _read_records(path)]


def _is_list_field(name: str) -> bool:
    return typing.get_origin(ExperimentConfig.model_fields[name].annotation) in (list, List)


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment and list values are comma-separated."""
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ExperimentConfig.model_fields:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        if _is_list_field(key):
            values[key] = [item.strip() for item in value.split(",") if item.strip()]
        else:
            values[key] = value
    return values


def read_config_file(path: PathLike) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def build_config(*layers: dict) -> ExperimentConfig:
    """Merge layers left to right (later layers win) and validate."""
    merged = {}
    for layer in layers:
        merged.update({key: value for key, value in layer.items() if value is not None})
    try:
        return ExperimentConfig(**merged)
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment configuration: {exc}") from exc


def write_config_file(config: ExperimentConfig, path: PathLike) -> Path:
    lines = []
    for key, value in config.model_dump(mode="json").items():
        if value is None:
            continue
        if isinstance(value, list):
            value = ",".join(str(item) for item in value)
        elif isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key}={value}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


_BOOTSTRAP_ME = f"{Variant.ME.value} (bootstrap b)"
_SVG_COLORS = {
    Variant.TRUE_PARAM.value: "#1f77b4",
    Variant.LSE.value: "#d62728",
    Variant.ME.value: "#2ca02c",
    _BOOTSTRAP_ME: "#9467bd",
    "asymptotic": "#555555",
}
_WIDTH, _HEIGHT, _MARGIN = 480, 360, 50


def _curve_label(row: PowerRow) -> str:
    if row.variant is Variant.ME and row.b_source is BiasSource.BOOTSTRAP:
        return _BOOTSTRAP_ME
    return row.variant.value


def _polyline(points: list[tuple[float, float]], color: str, dashed: bool = False) -> str:
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    dash = ' stroke-dasharray="6,4"' if dashed else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{coords}"/>'


def render_power_svg(rows: List[PowerRow], n: int, reference: str = "limiting_power") -> str:
    """One panel: empirical rejection rates per curve against a, plus the asymptotic reference."""
    rows = sorted((row for row in rows if row.n == n), key=lambda row: row.a)
    if not rows:
        raise ValueError(f"no rows for n={n}")
    grid = sorted({row.a for row in rows})
    lo, hi = grid[0], grid[-1]
    span = (hi - lo) or 1.0
    plot_w, plot_h = _WIDTH - 2 * _MARGIN, _HEIGHT - 2 * _MARGIN

    def project(a: float, p: float) -> tuple[float, float]:
        return _MARGIN + plot_w * (a - lo) / span, _HEIGHT - _MARGIN - plot_h * p

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(f"{rows[0].family.value} n = {n}")}</text>',
        f'<line x1="{_MARGIN}" y1="{_HEIGHT - _MARGIN}" x2="{_WIDTH - _MARGIN}" y2="{_HEIGHT - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" y2="{_HEIGHT - _MARGIN}" stroke="black"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        _, y = project(lo, tick)
        parts.append(f'<text x="{_MARGIN - 6}" y="{y + 4:.2f}" text-anchor="end" font-size="10">{tick:g}</text>')
    for a in (lo, (lo + hi) / 2, hi):
        x, _ = project(a, 0.0)
        parts.append(f'<text x="{x:.2f}" y="{_HEIGHT - _MARGIN + 16}" text-anchor="middle" font-size="10">{a:g}</text>')
    parts.append(f'<text x="{_WIDTH / 2:.0f}" y="{_HEIGHT - 10}" text-anchor="middle" font-size="12">a</text>')

    labels = list(dict.fromkeys(_curve_label(row) for row in rows))
    reference_points = {}
    for label in labels:
        points = []
        for row in rows:
            if _curve_label(row) == label:
                points.append(project(row.a, row.rejection_rate))
                reference_points[row.a] = project(row.a, getattr(row, reference))
        parts.append(_polyline(points, _SVG_COLORS[label]))
    parts.append(_polyline([reference_points[a] for a in grid], _SVG_COLORS["asymptotic"], dashed=True))

    legend = [(label, _SVG_COLORS[label]) for label in labels]
    legend.append((reference.replace("_", " "), _SVG_COLORS["asymptotic"]))
    for index, (label, color) in enumerate(legend):
        y = _MARGIN + 14 * index
        x = _WIDTH - _MARGIN - 110
        parts.append(f'<line x1="{x}" y1="{y}" x2="{x + 18}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x + 24}" y="{y + 4}" font-size="10">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_power_svgs(rows: List[PowerRow], directory: PathLike) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for n in sorted({row.n for row in rows}):
        path = directory / f"power_n{n}.svg"
        path.write_text(render_power_svg(rows, n), encoding="utf-8", newline="\n")
        written.append(path)
    return written
