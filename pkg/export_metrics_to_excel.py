#!/usr/bin/env python3
"""
Export JSON metric reports to a single Excel workbook.

Usage:
    python export_metrics_to_excel.py REPORT_DIR_OR_FILE... [--out metrics.xlsx]

Every *.json report found (directories are searched recursively) becomes a
row on the sheet of its kind: flow, depth, odometry, segmentation, loss or
alignment.
"""
import argparse
import glob
import os
import sys

from dotenv import load_dotenv

load_dotenv()

from rigidflow.exceptions import RigidFlowError
from rigidflow.services.report_export import export_workbook, load_reports


def collect_report_paths(sources):
    paths = []
    for source in sources:
        if os.path.isdir(source):
            paths.extend(sorted(glob.glob(os.path.join(source, '**', '*.json'), recursive=True)))
        else:
            paths.append(source)
    return paths


def main(argv=None):
    parser = argparse.ArgumentParser(description='Export rigidflow JSON reports to Excel')
    parser.add_argument('sources', nargs='+', help='report files or directories')
    parser.add_argument('--out', default='rigidflow_metrics.xlsx', help='workbook path')
    args = parser.parse_args(argv)

    print("\n" + "=" * 60)
    print("EXPORTING METRIC REPORTS TO EXCEL")
    print("=" * 60 + "\n")

    paths = collect_report_paths(args.sources)
    if not paths:
        print("❌ No JSON reports found")
        return 1

    try:
        print(f"📊 Reading {len(paths)} reports...")
        reports = load_reports(paths)
        counts = export_workbook(args.out, reports)
    except RigidFlowError as exc:
        print(f"❌ {exc.diagnostic()}")
        return exc.exit_code

    for sheet, count in counts.items():
        print(f"   ✓ {sheet}: {count} rows")
    print(f"\n✅ Excel file created: {args.out}")
    print("=" * 60 + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
