"""Output files: atomic writes, learning-curve CSVs and JSON records."""
from pathlib import Path
from typing import Any, Iterable, Optional, Union
import csv
import io
import json
import os
import tempfile

from pydantic import BaseModel

from kernel_scaling_laws.exceptions import MatrixFormatError
from kernel_scaling_laws.schema import CurveMeta, CurvePoint, LearningCurve

CURVE_COLUMNS = ["n", "value", "method", "alpha", "r", "ell", "sigma"]
RECORD_COLUMNS = CURVE_COLUMNS + ["seed", "stderr"]

PathLike = Union[str, Path]


def atomic_write(path: PathLike, data: Union[str, bytes]) -> Path:
    """Write data next to path under a temporary name, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def format_float(value: Optional[float]) -> str:
    """Shortest round-tripping decimal; empty for missing values."""
    if value is None:
        return ""
    return repr(float(value))


def _rows(curve: LearningCurve, per_seed: bool) -> Iterable[list[str]]:
    meta = curve.meta
    common = [curve.label, format_float(meta.alpha), format_float(meta.r), format_float(meta.ell), format_float(meta.sigma)]
    if per_seed:
        for record in curve.records:
            yield [str(record.n), format_float(record.value), *common, str(record.seed), ""]
        return
    extended = any(point.stderr is not None for point in curve.points)
    for point in curve.points:
        row = [str(point.n), format_float(point.value), *common]
        if extended:
            row += ["", format_float(point.stderr)]
        yield row


def curve_to_csv(curve: LearningCurve, per_seed: bool = False) -> str:
    """Render a curve (or its per-seed records) in the shared CSV schema."""
    extended = per_seed or any(point.stderr is not None for point in curve.points)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS if extended else CURVE_COLUMNS)
    writer.writerows(_rows(curve, per_seed))
    return buffer.getvalue()


def write_curve(path: PathLike, curve: LearningCurve, per_seed: bool = False) -> Path:
    return atomic_write(path, curve_to_csv(curve, per_seed))


def validate_curve_csv(text: str) -> list[dict[str, str]]:
    """Parse a curve CSV, rejecting any departure from the shared schema."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MatrixFormatError("empty curve file")
    if header not in (CURVE_COLUMNS, RECORD_COLUMNS):
        raise MatrixFormatError(f"unexpected curve header {header}")
    rows = []
    for line_number, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise MatrixFormatError(f"line {line_number}: expected {len(header)} fields, got {len(row)}")
        record = dict(zip(header, row))
        try:
            if int(record["n"]) < 1:
                raise ValueError("n must be positive")
            float(record["value"])
            for key in ("alpha", "r", "ell", "sigma", "stderr"):
                if record.get(key):
                    float(record[key])
            if record.get("seed"):
                int(record["seed"])
        except ValueError as exc:
            raise MatrixFormatError(f"line {line_number}: {exc}") from exc
        rows.append(record)
    return rows


def read_curve(path: PathLike) -> LearningCurve:
    """Load a curve CSV written by write_curve (aggregate rows only)."""
    rows = validate_curve_csv(Path(path).read_text(encoding="utf-8"))
    if not rows:
        raise MatrixFormatError(f"{path} holds no curve points")
    first = rows[0]

    def optional(value: str) -> Optional[float]:
        return float(value) if value else None

    points = [
        CurvePoint(n=int(row["n"]), value=float(row["value"]), stderr=optional(row.get("stderr", "")))
        for row in rows
    ]
    meta = CurveMeta(
        alpha=optional(first["alpha"]),
        r=optional(first["r"]),
        ell=optional(first["ell"]),
        sigma=float(first["sigma"] or 0.0),
    )
    return LearningCurve(points=points, label=first["method"], meta=meta)


def to_json(record: Union[BaseModel, dict[str, Any], list[Any]]) -> str:
    if isinstance(record, BaseModel):
        return record.model_dump_json(indent=2)
    return json.dumps(record, indent=2, sort_keys=True, default=_json_default)


def _json_default(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(path: PathLike, record: Union[BaseModel, dict[str, Any], list[Any]]) -> Path:
    return atomic_write(path, to_json(record) + "\n")
