"""
Report Export Service - Metric Workbooks
========================================
Collects JSON reports (metrics, losses, alignment) into one styled Excel
workbook: a Summary sheet, one sheet per report kind, and the per-length
odometry breakdown.
"""
import io
import json
import logging
import os
from datetime import datetime

import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from ..exceptions import FormatError
from .formats import atomic_write_bytes, read_json

logger = logging.getLogger(__name__)

HEADER_COLOR = "1F3A52"
MAX_COLUMN_WIDTH = 50
# document properties are pinned so repeated exports carry the same metadata
WORKBOOK_TIMESTAMP = datetime(2000, 1, 1)

SHEET_TITLES = {
    'flow': 'Flow',
    'depth': 'Depth',
    'odometry': 'Odometry',
    'segmentation': 'Segmentation',
    'loss': 'Loss',
    'alignment': 'Alignment',
    'other': 'Other',
}


def report_kind(payload: dict):
    """Sheet key for a report dict."""
    if payload.get('task') in SHEET_TITLES:
        return payload['task']
    if 'total' in payload and 'stage' in payload:
        return 'loss'
    if 'rms_before' in payload:
        return 'alignment'
    return 'other'


def _cell_value(value):
    if isinstance(value, (list, tuple)):
        return json.dumps(value)
    return value


def flatten_report(payload: dict, prefix=''):
    """One flat row; nested dicts become dotted columns, per_length is left out."""
    row = {}
    for key in sorted(payload):
        if key == 'per_length' and not prefix:
            continue
        value = payload[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            row.update(flatten_report(value, prefix=f"{name}."))
        else:
            row[name] = _cell_value(value)
    return row


def reports_frame(reports, kind):
    """
    DataFrame of every report of one kind.

    Args:
        reports: list of (name, payload dict) pairs
        kind: key from SHEET_TITLES
    """
    rows = [{'report': name, **flatten_report(payload)}
            for name, payload in reports if report_kind(payload) == kind]
    frame = pd.DataFrame(rows)
    if not frame.empty:
        columns = ['report'] + sorted(c for c in frame.columns if c != 'report')
        frame = frame[columns]
    return frame


def per_length_frame(reports):
    rows = []
    for name, payload in reports:
        for length, errors in sorted(payload.get('per_length', {}).items(), key=lambda item: int(item[0])):
            rows.append({
                'report': name,
                'length_m': int(length),
                't_err_percent': errors.get('t_err_percent'),
                'r_err_deg_per_100m': errors.get('r_err_deg_per_100m'),
            })
    return pd.DataFrame(rows, columns=['report', 'length_m', 't_err_percent', 'r_err_deg_per_100m'])


def _column_widths(frame):
    """Widest rendered cell per column, header included, capped at MAX_COLUMN_WIDTH."""
    widths = []
    for column in frame.columns:
        cells = frame[column].dropna().map(lambda v: len(str(v)))
        widest = max(len(str(column)), int(cells.max()) if len(cells) else 0)
        widths.append(min(widest + 2, MAX_COLUMN_WIDTH))
    return widths


def _append_frame(wb, title, frame):
    """One report sheet: styled metric-name header, a row per report, frozen header."""
    ws = wb.create_sheet(title)
    header_fill = PatternFill(start_color=HEADER_COLOR, end_color=HEADER_COLOR, fill_type="solid")
    edge = Side(style='thin')
    for col, (name, width) in enumerate(zip(frame.columns, _column_widths(frame)), start=1):
        cell = ws.cell(row=1, column=col, value=name)
        cell.fill = header_fill
        cell.font = Font(bold=True, color="FFFFFF", size=11)
        cell.alignment = Alignment(horizontal="center", vertical="center")
        cell.border = Border(left=edge, right=edge, top=edge, bottom=edge)
        ws.column_dimensions[get_column_letter(col)].width = width
    for record in frame.itertuples(index=False):
        ws.append([None if pd.isna(v) else v for v in record])
    ws.freeze_panes = 'A2'
    return ws


def export_summary(wb, counts, title="rigidflow metric reports"):
    """Create summary sheet"""
    ws = wb.create_sheet("Summary", 0)

    ws.merge_cells('A1:B1')
    ws['A1'] = title
    ws['A1'].font = Font(size=16, bold=True, color=HEADER_COLOR)
    ws['A1'].alignment = Alignment(horizontal="center")

    ws['A3'] = "Sheet"
    ws['B3'] = "Reports"
    ws['A3'].font = Font(bold=True)
    ws['B3'].font = Font(bold=True)

    row = 4
    for sheet, count in counts.items():
        ws[f'A{row}'] = sheet
        ws[f'B{row}'] = count
        row += 1

    ws.column_dimensions['A'].width = 30
    ws.column_dimensions['B'].width = 15


def build_workbook(reports) -> Workbook:
    """
    Args:
        reports: list of (name, payload dict) pairs, in sheet-row order
    """
    wb = Workbook()
    wb.remove(wb.active)
    wb.properties.created = WORKBOOK_TIMESTAMP
    wb.properties.modified = WORKBOOK_TIMESTAMP
    wb.properties.creator = 'rigidflow'

    counts = {}
    for kind, title in SHEET_TITLES.items():
        frame = reports_frame(reports, kind)
        if frame.empty:
            continue
        _append_frame(wb, title, frame)
        counts[title] = int(len(frame))

    lengths = per_length_frame(reports)
    if not lengths.empty:
        _append_frame(wb, 'Odometry per length', lengths)
        counts['Odometry per length'] = int(len(lengths))

    export_summary(wb, counts)
    return wb


def export_workbook(path, reports):
    """Write the workbook atomically; returns the per-sheet row counts."""
    wb = build_workbook(reports)
    buffer = io.BytesIO()
    wb.save(buffer)
    atomic_write_bytes(path, buffer.getvalue())
    counts = {ws.title: ws.max_row - 1 for ws in wb.worksheets if ws.title != 'Summary'}
    logger.info(f"✅ workbook {os.fspath(path)} written ({sum(counts.values())} rows)")
    return counts


def load_reports(paths):
    """(name, payload) pairs for a list of JSON report files, named by file stem."""
    reports = []
    for path in paths:
        payload = read_json(path)
        if not isinstance(payload, dict):
            raise FormatError("report must be a JSON object", source=os.fspath(path))
        name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
        reports.append((name, payload))
    return reports
