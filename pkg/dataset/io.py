# dataset/io.py
"""
Feature table codecs.

Two on-disk formats are supported:

  - csv:    `# classes=C [domain=source|target]` directive line, then the
            header `patch_id,wsi_id,label,f0,...,f{D-1}`; empty label means
            unlabeled. UTF-8, LF line endings.
  - binary: a JSON manifest
            {"n", "d", "classes", "dtype": "f64le", "payload", "ids"[, "domain"]}
            pointing at a row-major little-endian float64 payload and an ids
            CSV with `patch_id,wsi_id,label`.

Row numbers in ingestion errors are 1-based line numbers of the CSV file
being read.
"""

import csv
import json
import math
import os
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np

from dataset.table import UNLABELED, Domain, FeatureTable
from errors import IngestionError, InputNotFoundError

Format = Literal["csv", "binary"]

ID_COLUMNS = ("patch_id", "wsi_id", "label")
_DIRECTIVE = re.compile(r"^#\s*(.*)$")
_PAYLOAD_DTYPE = np.dtype("<f8")


def infer_format(path: str | os.PathLike) -> Format:
    return "binary" if Path(path).suffix.lower() == ".json" else "csv"


def load_table(
    path: str | os.PathLike,
    fmt: Optional[Format] = None,
    num_classes: Optional[int] = None,
    domain: Optional[Domain] = None,
) -> FeatureTable:
    """
    Read and validate a feature table.

    Args:
        path: CSV file or binary manifest.
        fmt: "csv" or "binary"; inferred from the suffix when omitted.
        num_classes: overrides the class count declared in the file.
        domain: overrides the domain declared in the file (default target).

    Raises:
        InputNotFoundError: the file (or a file it references) is missing.
        IngestionError: malformed row, dimension mismatch, duplicate id,
            non-finite value, or undeclared class count.
        LabelingError: a source table has an unlabeled record.
    """
    path = Path(path)
    if not path.is_file():
        raise InputNotFoundError(str(path))
    fmt = fmt or infer_format(path)
    if fmt == "csv":
        return _load_csv(path, num_classes, domain)
    if fmt == "binary":
        return _load_binary(path, num_classes, domain)
    raise IngestionError(f"unknown table format {fmt!r}")


def write_table(table: FeatureTable, path: str | os.PathLike, fmt: Optional[Format] = None) -> Path:
    """
    Serialize a table so that load_table reads it back unchanged.

    CSV floats use the shortest round-trip representation, so both formats
    reproduce every value bit-exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = fmt or infer_format(path)
    if fmt == "csv":
        _write_csv(table, path)
    elif fmt == "binary":
        _write_binary(table, path)
    else:
        raise IngestionError(f"unknown table format {fmt!r}")
    return path


# ---------------- CSV ----------------


def _parse_directive(line: str) -> Dict[str, str]:
    match = _DIRECTIVE.match(line.strip())
    if not match:
        return {}
    pairs = {}
    for token in match.group(1).split():
        key, _, value = token.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def _parse_label(raw: str, num_classes: int, row: int) -> int:
    raw = raw.strip()
    if raw == "":
        return UNLABELED
    try:
        label = int(raw)
    except ValueError:
        raise IngestionError(f"label {raw!r} is not an integer", row=row, field="label") from None
    if not 0 <= label < num_classes:
        raise IngestionError(
            f"label {label} outside 0..{num_classes - 1}", row=row, field="label"
        )
    return label


def _parse_id_row(
    values: List[str], row: int, num_classes: int, seen: Dict[str, int]
) -> Tuple[str, str, int]:
    patch_id, wsi_id, raw_label = values[0], values[1], values[2]
    if patch_id == "":
        raise IngestionError("empty patch_id", row=row, field="patch_id")
    if wsi_id == "":
        raise IngestionError("empty wsi_id", row=row, field="wsi_id")
    if patch_id in seen:
        raise IngestionError(
            f"duplicate patch_id {patch_id!r} (first at row {seen[patch_id]})",
            row=row,
            field="patch_id",
        )
    seen[patch_id] = row
    return patch_id, wsi_id, _parse_label(raw_label, num_classes, row)


def _resolve_meta(
    declared: Dict[str, str], num_classes: Optional[int], domain: Optional[Domain]
) -> Tuple[int, Domain]:
    if num_classes is None:
        raw = declared.get("classes")
        if raw is None:
            raise IngestionError(
                "class count not declared; add a '# classes=C' line or pass num_classes",
                row=1,
            )
        try:
            num_classes = int(raw)
        except ValueError:
            raise IngestionError(f"classes={raw!r} is not an integer", row=1) from None
    if num_classes < 1:
        raise IngestionError(f"class count must be positive, got {num_classes}", row=1)
    domain = domain or declared.get("domain", "target")  # type: ignore[assignment]
    if domain not in ("source", "target"):
        raise IngestionError(f"unknown domain {domain!r}", row=1)
    return num_classes, domain


def _read_text(path: Path) -> str:
    """Decode a UTF-8 file; a bad byte is reported with its 1-based line."""
    raw = path.read_bytes()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        row = raw[: exc.start].count(b"\n") + 1
        raise IngestionError(f"invalid UTF-8 byte 0x{raw[exc.start]:02x}", row=row) from None


def _load_csv(path: Path, num_classes: Optional[int], domain: Optional[Domain]) -> FeatureTable:
    lines = _read_text(path).split("\n")

    declared: Dict[str, str] = {}
    line_no = 0
    while line_no < len(lines) and lines[line_no].startswith("#"):
        declared.update(_parse_directive(lines[line_no]))
        line_no += 1
    num_classes, domain = _resolve_meta(declared, num_classes, domain)

    reader = csv.reader(lines[line_no:])
    try:
        header = next(reader)
    except StopIteration:
        raise IngestionError("missing header", row=line_no + 1) from None
    header_row = line_no + 1
    if tuple(h.strip() for h in header[:3]) != ID_COLUMNS:
        raise IngestionError(
            f"header must start with {','.join(ID_COLUMNS)}", row=header_row, field="header"
        )
    feature_names = [h.strip() for h in header[3:]]
    dim = len(feature_names)
    if dim == 0:
        raise IngestionError("header declares no feature columns", row=header_row, field="header")
    for i, name in enumerate(feature_names):
        if name != f"f{i}":
            raise IngestionError(f"expected column f{i}, got {name!r}", row=header_row, field=name)

    patch_ids: List[str] = []
    group_ids: List[str] = []
    labels: List[int] = []
    rows: List[List[float]] = []
    seen: Dict[str, int] = {}

    for offset, values in enumerate(reader):
        row = header_row + 1 + offset
        if not values:
            continue
        if len(values) != dim + 3:
            raise IngestionError(
                f"expected {dim} features, got {len(values) - 3}", row=row, field="features"
            )
        patch_id, wsi_id, label = _parse_id_row(values, row, num_classes, seen)
        vector = []
        for i, raw in enumerate(values[3:]):
            try:
                value = float(raw)
            except ValueError:
                raise IngestionError(f"{raw!r} is not a real number", row=row, field=f"f{i}") from None
            if not math.isfinite(value):
                raise IngestionError("non-finite feature value", row=row, field=f"f{i}")
            vector.append(value)
        patch_ids.append(patch_id)
        group_ids.append(wsi_id)
        labels.append(label)
        rows.append(vector)

    return FeatureTable(
        patch_ids=tuple(patch_ids),
        group_ids=tuple(group_ids),
        labels=np.array(labels, dtype=np.int64),
        features=np.array(rows, dtype=np.float64).reshape(len(rows), dim),
        num_classes=num_classes,
        domain=domain,
    )


def _label_text(label: int) -> str:
    return "" if label == UNLABELED else str(int(label))


def _write_csv(table: FeatureTable, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# classes={table.num_classes} domain={table.domain}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(ID_COLUMNS) + [f"f{i}" for i in range(table.dim)])
        for i in range(len(table)):
            writer.writerow(
                [table.patch_ids[i], table.group_ids[i], _label_text(table.labels[i])]
                + [repr(float(v)) for v in table.features[i]]
            )


# ---------------- BINARY ----------------


def _manifest_int(manifest: dict, key: str) -> int:
    value = manifest.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise IngestionError(f"manifest field {key!r} must be a non-negative integer", field=key)
    return value


def _load_binary(path: Path, num_classes: Optional[int], domain: Optional[Domain]) -> FeatureTable:
    try:
        manifest = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise IngestionError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise IngestionError("manifest must be a JSON object")

    n = _manifest_int(manifest, "n")
    d = _manifest_int(manifest, "d")
    if d < 1:
        raise IngestionError("manifest d must be positive", field="d")
    if manifest.get("dtype", "f64le") != "f64le":
        raise IngestionError(f"unsupported dtype {manifest.get('dtype')!r}", field="dtype")
    declared = {}
    if "classes" in manifest:
        declared["classes"] = str(manifest["classes"])
    if "domain" in manifest:
        declared["domain"] = str(manifest["domain"])
    num_classes, domain = _resolve_meta(declared, num_classes, domain)

    for key in ("payload", "ids"):
        if not isinstance(manifest.get(key), str):
            raise IngestionError(f"manifest field {key!r} must be a relative path", field=key)
    payload_path = path.parent / manifest["payload"]
    ids_path = path.parent / manifest["ids"]
    for referenced in (payload_path, ids_path):
        if not referenced.is_file():
            raise InputNotFoundError(str(referenced))

    expected_bytes = n * d * _PAYLOAD_DTYPE.itemsize
    actual_bytes = payload_path.stat().st_size
    if actual_bytes != expected_bytes:
        raise IngestionError(
            f"payload has {actual_bytes} bytes, expected n*d*8 = {expected_bytes}", field="payload"
        )
    features = np.fromfile(payload_path, dtype=_PAYLOAD_DTYPE).astype(np.float64).reshape(n, d)

    patch_ids: List[str] = []
    group_ids: List[str] = []
    labels: List[int] = []
    seen: Dict[str, int] = {}
    reader = csv.reader(_read_text(ids_path).splitlines())
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != ID_COLUMNS:
        raise IngestionError(f"ids header must be {','.join(ID_COLUMNS)}", row=1, field="header")
    for offset, values in enumerate(reader):
        row = offset + 2
        if not values:
            continue
        if len(values) != len(ID_COLUMNS):
            raise IngestionError(f"expected 3 fields, got {len(values)}", row=row)
        patch_id, wsi_id, label = _parse_id_row(values, row, num_classes, seen)
        patch_ids.append(patch_id)
        group_ids.append(wsi_id)
        labels.append(label)
    if len(patch_ids) != n:
        raise IngestionError(f"ids file lists {len(patch_ids)} records, manifest says n={n}", field="n")

    finite = np.isfinite(features)
    if not finite.all():
        bad_row, bad_col = (int(v[0]) for v in np.nonzero(~finite))
        raise IngestionError("non-finite feature value", row=bad_row + 2, field=f"f{bad_col}")

    return FeatureTable(
        patch_ids=tuple(patch_ids),
        group_ids=tuple(group_ids),
        labels=np.array(labels, dtype=np.int64),
        features=features,
        num_classes=num_classes,
        domain=domain,
    )


def _write_binary(table: FeatureTable, path: Path) -> None:
    stem = path.stem
    payload_name = f"{stem}.f64"
    ids_name = f"{stem}.ids.csv"
    np.ascontiguousarray(table.features, dtype=_PAYLOAD_DTYPE).tofile(path.parent / payload_name)
    with open(path.parent / ids_name, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(ID_COLUMNS)
        for i in range(len(table)):
            writer.writerow([table.patch_ids[i], table.group_ids[i], _label_text(table.labels[i])])
    manifest = {
        "n": len(table),
        "d": table.dim,
        "classes": table.num_classes,
        "dtype": "f64le",
        "payload": payload_name,
        "ids": ids_name,
        "domain": table.domain,
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
