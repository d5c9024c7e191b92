"""Grid-search threshold tuning for the baseline detectors.

Thresholds are chosen to maximize macro F1 over the covered frames of a set
of labeled sequences (typically the validation split). The velocity grid is
shared by all two-stage baselines; stage-2 statistics are computed once per
velocity candidate and reused across the three stage-2 grids.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detectors import (
    BaselineConfig,
    DetectorError,
    _prepare,
    stage2_statistics,
)
from .gaze import GazeSequence, N_CLASSES


def _default_velocity_grid() -> np.ndarray:
    return np.geomspace(10.0, 300.0, 20)


def _default_dispersion_grid() -> np.ndarray:
    return np.geomspace(0.2, 3.0, 16)


def _default_angle_grid() -> np.ndarray:
    return np.linspace(0.1 * np.pi, 0.9 * np.pi, 17)


def _default_ratio_grid() -> np.ndarray:
    return np.geomspace(1.5, 50.0, 16)


@dataclass(frozen=True)
class TuningGrids:
    velocity: np.ndarray = field(default_factory=_default_velocity_grid)
    dispersion: np.ndarray = field(default_factory=_default_dispersion_grid)
    angle: np.ndarray = field(default_factory=_default_angle_grid)
    pca_ratio: np.ndarray = field(default_factory=_default_ratio_grid)


def _macro_f1(counts: np.ndarray) -> float:
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(N_CLASSES), where=denom > 0)
    return float(f1.mean())


def _confusion_counts(truth: np.ndarray, pred: np.ndarray) -> np.ndarray:
    return np.bincount(truth * N_CLASSES + pred, minlength=N_CLASSES**2).reshape(
        N_CLASSES, N_CLASSES
    )


def tune_baselines(
    sequences: list[GazeSequence],
    grids: TuningGrids = TuningGrids(),
    window_len: int = 30,
) -> dict[str, BaselineConfig]:
    """Pick per-baseline thresholds maximizing macro F1 on labeled sequences.

    Returns one BaselineConfig per detector name ("ivt", "ivt-idt", "ivmp",
    "pca"). Two-stage baselines search the velocity grid jointly with their
    stage-2 grid.
    """
    if not sequences:
        raise DetectorError("cannot tune on an empty sequence list")
    for seq in sequences:
        if seq.labels is None:
            raise DetectorError(f"sequence {seq.source_id!r} has no labels for tuning")

    probe = BaselineConfig(window_len=window_len)
    prepared = []
    for seq in sequences:
        st = _prepare(seq, probe)
        truth_cov = seq.labels[st.covered_idx].astype(np.int64)
        prepared.append((st, truth_cov))

    stat_kinds = ("dispersion", "turn_angle", "eigen_ratio")
    best: dict[str, tuple[float, BaselineConfig]] = {}

    # one-dimensional sweep for the binary velocity detector
    best_ivt = (-1.0, None)
    for tau_v in grids.velocity:
        counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        for st, truth_cov in prepared:
            with np.errstate(invalid="ignore"):
                pred = (st.v[st.covered_idx] > tau_v).astype(np.int64)  # 0 fix, 1 sac
            counts += _confusion_counts(truth_cov, pred)
        f1 = _macro_f1(counts)
        if f1 > best_ivt[0]:
            best_ivt = (f1, float(tau_v))
    best["ivt"] = (
        best_ivt[0],
        BaselineConfig(velocity_threshold_deg_s=best_ivt[1], window_len=window_len),
    )

    # joint velocity x stage-2 sweeps, sharing stage-2 statistics per tau_v
    stage2_grids = {
        "ivt-idt": ("dispersion", grids.dispersion, False),
        "ivmp": ("turn_angle", grids.angle, True),
        "pca": ("eigen_ratio", grids.pca_ratio, False),
    }
    best_two: dict[str, tuple[float, float, float]] = {
        name: (-1.0, 0.0, 0.0) for name in stage2_grids
    }
    for tau_v in grids.velocity:
        per_seq = []
        for st, truth_cov in prepared:
            with np.errstate(invalid="ignore"):
                sac = st.v > tau_v
            span_mask = ~sac & ~st.bad
            stats = stage2_statistics(st.x, st.y, span_mask, window_len, stat_kinds)
            per_seq.append((st, truth_cov, sac, stats))
        for name, (kind, grid, angle_is_fix_above) in stage2_grids.items():
            for tau_2 in grid:
                counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
                for st, truth_cov, sac, stats in per_seq:
                    stat_cov = stats[kind][st.covered_idx]
                    sac_cov = sac[st.covered_idx]
                    if angle_is_fix_above:
                        pursuit = stat_cov < tau_2  # coherent motion: small angle
                    else:
                        pursuit = stat_cov > tau_2
                    pred = np.where(sac_cov, 1, np.where(pursuit, 2, 0)).astype(np.int64)
                    counts += _confusion_counts(truth_cov, pred)
                f1 = _macro_f1(counts)
                if f1 > best_two[name][0]:
                    best_two[name] = (f1, float(tau_v), float(tau_2))

    best["ivt-idt"] = (
        best_two["ivt-idt"][0],
        BaselineConfig(
            velocity_threshold_deg_s=best_two["ivt-idt"][1],
            dispersion_threshold_deg=best_two["ivt-idt"][2],
            window_len=window_len,
        ),
    )
    best["ivmp"] = (
        best_two["ivmp"][0],
        BaselineConfig(
            velocity_threshold_deg_s=best_two["ivmp"][1],
            angle_threshold_rad=best_two["ivmp"][2],
            window_len=window_len,
        ),
    )
    best["pca"] = (
        best_two["pca"][0],
        BaselineConfig(
            velocity_threshold_deg_s=best_two["pca"][1],
            pca_ratio_threshold=best_two["pca"][2],
            window_len=window_len,
        ),
    )
    return {name: cfg for name, (_, cfg) in best.items()}
