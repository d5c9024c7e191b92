"""CSV and JSON file formats for gaze data, predictions and reports.

Gaze CSV: header `t_ms,x_deg,y_deg,valid,label`, UTF-8, one record per
line, decimal point, valid as 0/1, label empty or a class code 0/1/2.
Floats are written with repr() so a write/read round trip is lossless.

Prediction CSV: header `sample_idx,p_fix,p_sac,p_pur,label,covered`, one
row per sample of the source sequence; uncovered rows leave the score and
label fields empty and set covered to 0.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .detectors import DetectorOutput
from .gaze import GazeSequence, N_CLASSES

GAZE_HEADER = ["t_ms", "x_deg", "y_deg", "valid", "label"]
PRED_HEADER = ["sample_idx", "p_fix", "p_sac", "p_pur", "label", "covered"]
TRACE_HEADER = ["t_ms", "x_deg", "y_deg", "p_fix", "p_sac", "p_pur", "truth", "pred"]


class DataFormatError(ValueError):
    """A file does not conform to its declared schema."""


def _fmt(x: float) -> str:
    return repr(float(x))


def write_gaze_csv(seq: GazeSequence, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(GAZE_HEADER)
        labels = seq.labels
        for i in range(len(seq)):
            writer.writerow(
                [
                    _fmt(seq.t_ms[i]),
                    _fmt(seq.x_deg[i]),
                    _fmt(seq.y_deg[i]),
                    int(seq.valid[i]),
                    "" if labels is None else int(labels[i]),
                ]
            )


def read_gaze_csv(path: str | Path, source_id: str | None = None) -> GazeSequence:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if header != GAZE_HEADER:
            raise DataFormatError(f"{path}: expected header {','.join(GAZE_HEADER)}")
        t, x, y, v, lab = [], [], [], [], []
        have_labels = None
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise DataFormatError(f"{path}:{row_no}: expected 5 fields, got {len(row)}")
            try:
                t.append(float(row[0]))
                x.append(float(row[1]))
                y.append(float(row[2]))
            except ValueError:
                raise DataFormatError(f"{path}:{row_no}: non-numeric coordinate") from None
            if row[3] not in ("0", "1"):
                raise DataFormatError(f"{path}:{row_no}: valid flag must be 0 or 1")
            v.append(row[3] == "1")
            row_has_label = row[4] != ""
            if have_labels is None:
                have_labels = row_has_label
            elif have_labels != row_has_label:
                raise DataFormatError(f"{path}:{row_no}: mixed labeled/unlabeled rows")
            if row_has_label:
                if row[4] not in ("0", "1", "2"):
                    raise DataFormatError(f"{path}:{row_no}: label must be 0, 1 or 2")
                lab.append(int(row[4]))
    labels = np.array(lab, dtype=np.int8) if have_labels else None
    try:
        return GazeSequence(
            t_ms=np.array(t),
            x_deg=np.array(x),
            y_deg=np.array(y),
            valid=np.array(v, dtype=bool),
            labels=labels,
            source_id=source_id if source_id is not None else path.stem,
        )
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def write_predictions_csv(preds: DetectorOutput, path: str | Path) -> None:
    covered = preds.covered
    by_idx = {int(i): k for k, i in enumerate(preds.sample_idx)}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRED_HEADER)
        for i in range(preds.n_samples):
            if covered[i]:
                k = by_idx[i]
                s = preds.scores[k]
                writer.writerow(
                    [i, _fmt(s[0]), _fmt(s[1]), _fmt(s[2]), int(preds.labels[k]), 1]
                )
            else:
                writer.writerow([i, "", "", "", "", 0])


def read_predictions_csv(path: str | Path) -> DetectorOutput:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if header != PRED_HEADER:
            raise DataFormatError(f"{path}: expected header {','.join(PRED_HEADER)}")
        idx, scores, labels = [], [], []
        n = 0
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 6:
                raise DataFormatError(f"{path}:{row_no}: expected 6 fields")
            try:
                sample_idx = int(row[0])
            except ValueError:
                raise DataFormatError(f"{path}:{row_no}: bad sample index") from None
            if sample_idx != n:
                raise DataFormatError(f"{path}:{row_no}: sample indices must be consecutive")
            n += 1
            if row[5] == "1":
                try:
                    triple = [float(row[1]), float(row[2]), float(row[3])]
                    label = int(row[4])
                except ValueError:
                    raise DataFormatError(f"{path}:{row_no}: bad covered row") from None
                idx.append(sample_idx)
                scores.append(triple)
                labels.append(label)
            elif row[5] == "0":
                if any(row[k] != "" for k in (1, 2, 3, 4)):
                    raise DataFormatError(f"{path}:{row_no}: uncovered rows must be empty")
            else:
                raise DataFormatError(f"{path}:{row_no}: covered flag must be 0 or 1")
    try:
        return DetectorOutput(
            n_samples=n,
            sample_idx=np.array(idx, dtype=np.int64),
            scores=np.array(scores, dtype=np.float64).reshape(len(idx), N_CLASSES),
            labels=np.array(labels, dtype=np.int8),
        )
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def write_trace_csv(seq: GazeSequence, preds: DetectorOutput, path: str | Path) -> None:
    """Long-format per-sample activation trace for external plotting."""
    covered = preds.covered
    by_idx = {int(i): k for k, i in enumerate(preds.sample_idx)}
    labels = seq.labels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for i in range(len(seq)):
            truth = "" if labels is None else int(labels[i])
            if covered[i]:
                k = by_idx[i]
                s = preds.scores[k]
                row = [
                    _fmt(seq.t_ms[i]),
                    _fmt(seq.x_deg[i]),
                    _fmt(seq.y_deg[i]),
                    _fmt(s[0]),
                    _fmt(s[1]),
                    _fmt(s[2]),
                    truth,
                    int(preds.labels[k]),
                ]
            else:
                row = [
                    _fmt(seq.t_ms[i]),
                    _fmt(seq.x_deg[i]),
                    _fmt(seq.y_deg[i]),
                    "",
                    "",
                    "",
                    truth,
                    "",
                ]
            writer.writerow(row)


def write_manifest(stats: dict, seed: int, path: str | Path) -> None:
    payload = {"seed": seed, **stats}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON manifest: {exc}") from None


def write_history_csv(records, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "epoch", "train_loss", "val_accuracy"])
        for rec in records:
            writer.writerow([rec.phase, rec.epoch, _fmt(rec.train_loss), _fmt(rec.val_accuracy)])
