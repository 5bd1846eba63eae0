"""Log-log least-squares scaling fits."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

NONLINEAR_RESIDUAL = 0.05


class ScalingRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ScalingFit:
    """``log value = exponent * log scale + intercept`` over a scale range.

    ``residual`` is the largest absolute log residual; ``stderr`` is the
    ordinary least-squares standard error of the exponent.
    """

    exponent: float
    intercept: float
    residual: float
    range: tuple[float, float]
    sample_count: int
    stderr: float
    excluded: int = 0

    @property
    def nonlinear(self) -> bool:
        return self.residual > NONLINEAR_RESIDUAL

    def predict(self, scale):
        return np.exp(self.intercept) * np.asarray(scale) ** self.exponent

    def to_dict(self) -> dict:
        out = asdict(self)
        out["range"] = list(self.range)
        out["nonlinear"] = self.nonlinear
        return out


def fit_exponent(scales, values) -> ScalingFit:
    """Least-squares slope of log(values) against log(scales).

    Non-positive values are dropped and counted in ``excluded``.
    """
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    if scales.shape != values.shape:
        raise ValueError("scales and values differ in length")
    if np.any(scales <= 0):
        raise ValueError("scales must be positive")
    keep = np.isfinite(values) & (values > 0)
    if keep.sum() < 4:
        raise ScalingRangeError("insufficient scaling range")
    x = np.log(scales[keep])
    y = np.log(values[keep])
    if np.ptp(x) == 0:
        raise ScalingRangeError("insufficient scaling range")
    m = x.size
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    res = y - (slope * x + intercept)
    stderr = float(np.sqrt(np.sum(res**2) / (m - 2) / sxx))
    return ScalingFit(
        exponent=slope,
        intercept=intercept,
        residual=float(np.max(np.abs(res))),
        range=(float(scales[keep].min()), float(scales[keep].max())),
        sample_count=int(m),
        stderr=stderr,
        excluded=int((~keep).sum()),
    )


def dyadic_ladder(finest: float, coarsest: float) -> np.ndarray:
    """Powers of two ``2**-j`` in ``[finest, coarsest]``, coarse to fine."""
    jmin = int(np.ceil(-np.log2(coarsest) - 1e-12))
    jmax = int(np.floor(-np.log2(finest) + 1e-12))
    return 2.0 ** -np.arange(jmin, jmax + 1)
