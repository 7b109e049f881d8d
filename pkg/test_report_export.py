"""
Tests for the metric workbook writer.
"""
from openpyxl import load_workbook

from rigidflow.services.report_export import (HEADER_COLOR, MAX_COLUMN_WIDTH, build_workbook, export_workbook,
                                              report_kind)

FLOW = {'task': 'flow', 'epe_all': 1.25, 'epe_noc': None, 'undefined': ['epe_noc']}
ODOM = {'task': 'odometry', 'ate_mean': 0.01,
        'per_length': {'200': {'t_err_percent': 1.5, 'r_err_deg_per_100m': 0.2},
                       '100': {'t_err_percent': 1.0, 'r_err_deg_per_100m': 0.1}}}


def test_report_kind():
    assert report_kind(FLOW) == 'flow'
    assert report_kind({'stage': 'pose', 'total': 1.0}) == 'loss'
    assert report_kind({'rms_before': 0.3}) == 'alignment'
    assert report_kind({'anything': 1}) == 'other'


def test_sheet_header_is_styled_and_frozen():
    ws = build_workbook([('run_a', FLOW)])['Flow']
    header = [cell.value for cell in ws[1]]
    assert header == ['report', 'epe_all', 'epe_noc', 'task', 'undefined']
    assert all(cell.font.bold for cell in ws[1])
    assert ws['A1'].fill.start_color.rgb.endswith(HEADER_COLOR)
    assert ws.freeze_panes == 'A2'
    assert [cell.value for cell in ws[2]] == ['run_a', 1.25, None, 'flow', '["epe_noc"]']


def test_column_widths_follow_the_widest_cell():
    long_name = 'x' * 80
    ws = build_workbook([('short', FLOW), (long_name, FLOW)])['Flow']
    assert ws.column_dimensions['A'].width == MAX_COLUMN_WIDTH
    # "epe_all" header is wider than the value 1.25
    assert ws.column_dimensions['B'].width == len('epe_all') + 2


def test_per_length_rows_are_sorted_numerically(tmp_path):
    out = tmp_path / 'metrics.xlsx'
    counts = export_workbook(out, [('odom', ODOM)])
    assert counts == {'Odometry': 1, 'Odometry per length': 2}
    ws = load_workbook(out)['Odometry per length']
    assert [row[1] for row in ws.iter_rows(min_row=2, values_only=True)] == [100, 200]
