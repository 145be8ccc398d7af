"""Attack-report serialization: stable JSON plus a CSV summary."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict

from advtrack.pipeline import AttackReport, MetricBlock


class ReportError(Exception):
    pass


_FIELDS = [
    "video_id", "n_frames", "seed", "attack_failed", "clean", "adversarial",
    "tp_final", "linf_final", "ssim_final", "queries",
    "success_curve_clean", "success_curve_adv", "traces", "config",
]


def report_to_dict(report: AttackReport) -> dict:
    raw = asdict(report)
    return {k: raw[k] for k in _FIELDS}


def emit_report(report: AttackReport, path: str, fmt: str = "json") -> None:
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(report_to_dict(report), fh, indent=1, sort_keys=False)
            fh.write("\n")
    elif fmt == "csv-summary":
        emit_summary([report], path)
    else:
        raise ReportError(f"unknown format {fmt!r}")


def parse_report(path: str) -> AttackReport:
    with open(path) as fh:
        data = json.load(fh)
    data["clean"] = MetricBlock(**data["clean"])
    data["adversarial"] = MetricBlock(**data["adversarial"])
    return AttackReport(**data)


_SUMMARY_COLUMNS = [
    "video_id", "n_frames", "attack_failed",
    "clean_accuracy", "clean_robustness", "clean_auc", "clean_precision",
    "adv_accuracy", "adv_robustness", "adv_auc", "adv_precision",
    "tp_final", "linf_final", "ssim_final",
    "queries_generator", "queries_selection", "queries_sign", "queries_total",
]


def emit_summary(reports, path: str) -> None:
    """One CSV row per video."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SUMMARY_COLUMNS)
        for r in reports:
            writer.writerow([
                r.video_id, r.n_frames, int(r.attack_failed),
                repr(r.clean.accuracy), repr(r.clean.robustness),
                repr(r.clean.success_auc), repr(r.clean.precision_at_20),
                repr(r.adversarial.accuracy), repr(r.adversarial.robustness),
                repr(r.adversarial.success_auc),
                repr(r.adversarial.precision_at_20),
                repr(r.tp_final), repr(r.linf_final), repr(r.ssim_final),
                r.queries["generator"], r.queries["selection"],
                r.queries["sign"], r.queries["total"],
            ])


def write_outputs(reports, out_dir: str) -> None:
    """Per-video JSON reports, adversarial first frames, and the summary."""
    os.makedirs(out_dir, exist_ok=True)
    from advtrack.video import write_frame

    for r in reports:
        emit_report(r, os.path.join(out_dir, f"report_{r.video_id}.json"))
        if r.adv_frame0 is not None:
            write_frame(r.adv_frame0,
                        os.path.join(out_dir, f"adv_frame0_{r.video_id}.png"))
    emit_summary(reports, os.path.join(out_dir, "summary.csv"))
