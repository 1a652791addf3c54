import csv
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from openpyxl import Workbook
from openpyxl.styles import Font
from openpyxl.utils import get_column_letter

from .exceptions import OutputError

logger = logging.getLogger(__name__)

FORMATS = ('csv', 'json', 'xlsx')


def format_float(value: float) -> str:
    """Round-trip exact, locale free"""
    return format(float(value), '.17g')


def to_jsonable(value: Any) -> Any:
    """numpy scalars/arrays to plain Python; non-finite floats become None"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(data: Any) -> str:
    return json.dumps(to_jsonable(data), sort_keys=True, indent=2, allow_nan=False) + '\n'


def _cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


class ResultWriter:
    """Writes tables (csv/json/xlsx) and JSON reports under one output directory"""

    def __init__(self, output_dir, output_format: str = 'csv', metadata: Optional[Dict[str, Any]] = None):
        if output_format not in FORMATS:
            raise OutputError(f"Unknown output format '{output_format}'. Expected one of: {', '.join(FORMATS)}")
        self.output_dir = Path(output_dir)
        self.output_format = output_format
        self.metadata = dict(metadata or {})
        try:
            os.makedirs(self.output_dir, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"Cannot create output directory {self.output_dir}: {exc}") from exc

    def metadata_lines(self) -> List[str]:
        lines = []
        for key in ('command', 'config', 'version', 'quadrature'):
            if key not in self.metadata:
                continue
            value = self.metadata[key]
            if not isinstance(value, str):
                value = json.dumps(to_jsonable(value), sort_keys=True)
            lines.append(f"# {key}: {value}")
        return lines

    def write_table(self, name: str, headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        writer = {
            'csv': self._write_csv,
            'json': self._write_json_table,
            'xlsx': self._write_xlsx,
        }[self.output_format]
        path = self.output_dir / f"{name}.{self.output_format}"
        try:
            writer(path, list(headers), rows)
        except OSError as exc:
            raise OutputError(f"Failed to write {path}: {exc}") from exc
        logger.info(f"wrote {len(rows)} rows to {path}")
        return path

    def write_report(self, name: str, data: Dict[str, Any]) -> Path:
        path = self.output_dir / f"{name}.json"
        record = dict(data)
        record['metadata'] = self.metadata
        try:
            path.write_text(dumps(record), encoding='utf-8')
        except OSError as exc:
            raise OutputError(f"Failed to write {path}: {exc}") from exc
        logger.info(f"wrote report {path}")
        return path

    def _write_csv(self, path: Path, headers: List[str], rows):
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            for line in self.metadata_lines():
                handle.write(line + '\n')
            out = csv.writer(handle, lineterminator='\n')
            out.writerow(headers)
            for row in rows:
                out.writerow([_cell(v) for v in row])

    def _write_json_table(self, path: Path, headers: List[str], rows):
        record = {'metadata': self.metadata, 'columns': headers, 'rows': [list(row) for row in rows]}
        path.write_text(dumps(record), encoding='utf-8')

    def _write_xlsx(self, path: Path, headers: List[str], rows):
        wb = Workbook()
        ws = wb.active
        ws.title = path.stem[:31]
        ws.append(headers)
        for i in range(1, len(headers) + 1):
            ws.cell(row=1, column=i).font = Font(bold=True)
        ws.freeze_panes = 'A2'
        for row in rows:
            ws.append([to_jsonable(v) for v in row])
        autosize(ws)

        meta = wb.create_sheet('metadata')
        meta.append(['Field', 'Value'])
        meta.cell(row=1, column=1).font = Font(bold=True)
        meta.cell(row=1, column=2).font = Font(bold=True)
        for line in self.metadata_lines():
            key, _, value = line[2:].partition(': ')
            meta.append([key, value])
        autosize(meta)
        wb.save(path)


def autosize(ws):
    for col_idx in range(1, ws.max_column + 1):
        letter = get_column_letter(col_idx)
        max_len = 0
        for cell in ws.iter_rows(min_col=col_idx, max_col=col_idx, values_only=True):
            val = cell[0]
            if val is None:
                continue
            max_len = max(max_len, len(str(val)))
        ws.column_dimensions[letter].width = min(max(10, max_len + 2), 60)
