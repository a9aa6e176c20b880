"""Training losses and the concordance evaluation metric.

MSE drives the single-stream training stages; the joint stage minimizes
1 - mean per-dimension concordance over the batch. Reports follow the
three-column arousal/valence/total convention with total = arousal + valence.

Concordance here is Lin's coefficient with population (1/n) moments:
2 cov(x,y) / (var x + var y + (mean x - mean y)^2), defined as 0 when the
denominator vanishes so constant-prediction collapse scores 0 rather than
crashing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError, ShapeError


@dataclass(frozen=True)
class CccReport:
    arousal: float
    valence: float

    @property
    def total(self) -> float:
        return self.arousal + self.valence


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over all 2B elements of squared error."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shapes differ: {pred.shape} vs {target.shape}")
    if pred.ndim != 2 or pred.shape[0] < 1:
        raise ShapeError(f"mse_loss expects [B,2] with B >= 1, got {pred.shape}")
    diff = ad.sub(pred, target)
    return ad.mean_all(ad.mul(diff, diff))


def ccc(x, y) -> float:
    """Plain (non-differentiable) concordance of two equal-length sequences."""
    xa = np.asarray(x, dtype=np.float64).reshape(-1)
    ya = np.asarray(y, dtype=np.float64).reshape(-1)
    if xa.size != ya.size:
        raise DataError(f"ccc length mismatch: {xa.size} vs {ya.size}")
    if xa.size < 2:
        raise DataError(f"ccc needs at least 2 values, got {xa.size}")
    mx, my = xa.mean(), ya.mean()
    var_x = ((xa - mx) ** 2).mean()
    var_y = ((ya - my) ** 2).mean()
    cov = ((xa - mx) * (ya - my)).mean()
    denom = var_x + var_y + (mx - my) ** 2
    if denom == 0.0:
        return 0.0
    return float(2.0 * cov / denom)


def _ccc_column(pred_col: Tensor, target_col: Tensor) -> Tensor:
    mx = ad.mean_all(pred_col)
    my = ad.mean_all(target_col)
    dx = ad.sub(pred_col, mx)
    dy = ad.sub(target_col, my)
    var_x = ad.mean_all(ad.mul(dx, dx))
    var_y = ad.mean_all(ad.mul(dy, dy))
    cov = ad.mean_all(ad.mul(dx, dy))
    gap = ad.sub(mx, my)
    denom = ad.add(ad.add(var_x, var_y), ad.mul(gap, gap))
    if float(denom.data) == 0.0:
        return Tensor(np.zeros((), dtype=pred_col.dtype))
    return ad.div(2.0 * cov, denom)


def ccc_loss(pred: Tensor, target: Tensor) -> Tensor:
    """1 - (CCC of arousal column + CCC of valence column)/2, with gradients
    flowing through the batch means, variances, and covariances."""
    if pred.shape != target.shape:
        raise ShapeError(f"ccc_loss shapes differ: {pred.shape} vs {target.shape}")
    if pred.ndim != 2 or pred.shape[1] != 2:
        raise ShapeError(f"ccc_loss expects [B,2], got {pred.shape}")
    if pred.shape[0] < 2:
        raise ShapeError(f"ccc_loss needs batch size >= 2, got {pred.shape[0]}")
    ccc_a = _ccc_column(ad.slice_axis(pred, 1, 0, 1), ad.slice_axis(target, 1, 0, 1))
    ccc_v = _ccc_column(ad.slice_axis(pred, 1, 1, 2), ad.slice_axis(target, 1, 1, 2))
    return 1.0 - 0.5 * ad.add(ccc_a, ccc_v)


def evaluate(preds, targets) -> CccReport:
    """Per-dimension concordance across utterances; rows are (arousal, valence)."""
    pa = np.asarray(preds, dtype=np.float64)
    ta = np.asarray(targets, dtype=np.float64)
    if pa.shape != ta.shape:
        raise DataError(f"prediction/target shapes differ: {pa.shape} vs {ta.shape}")
    if pa.ndim != 2 or pa.shape[1] != 2:
        raise DataError(f"expected [N,2] prediction rows, got {pa.shape}")
    if pa.shape[0] < 2:
        raise DataError(f"evaluation needs at least 2 utterances, got {pa.shape[0]}")
    return CccReport(ccc(pa[:, 0], ta[:, 0]), ccc(pa[:, 1], ta[:, 1]))


def report_csv(report: CccReport) -> str:
    return (
        "metric,arousal,valence,total\n"
        f"ccc,{report.arousal:.4f},{report.valence:.4f},{report.total:.4f}\n"
    )


def report_table(report: CccReport) -> str:
    header = f"{'':12s}{'Arousal':>10s}{'Valence':>10s}{'Total':>10s}"
    row = f"{'CCC':12s}{report.arousal:>10.4f}{report.valence:>10.4f}{report.total:>10.4f}"
    return header + "\n" + row + "\n"
