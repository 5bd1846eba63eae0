"""Increment statistics: Besov seminorms, structure functions, scaling fits
and beta-model predictions."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, PeriodicGrid, TimeField, shifted_difference
from .scaling import ScalingFit, ScalingRangeError, dyadic_ladder, fit_exponent

__all__ = [
    "ScalingFit", "ScalingRangeError", "fit_exponent", "increment_norm",
    "besov_seminorm", "structure_function", "StructureTable",
    "beta_model_zeta", "beta_model_holder", "sharp_gamma",
    "effective_exponent", "cubed_increment_integral",
]


def increment_norm(f: Field, h, p: float = 2.0) -> float:
    """||f(. + h) - f||_{L^p} for a lattice vector ``h`` in node units."""
    diff = shifted_difference(f, h)
    if np.isinf(p):
        return float(diff.max())
    return float(np.mean(diff**p) ** (1.0 / p))


def lattice_directions(grid: PeriodicGrid, extra: int = 0, seed: int = 0) -> list[np.ndarray]:
    """Axis directions followed by ``extra`` seeded primitive lattice directions."""
    dirs = [np.eye(grid.d, dtype=np.int64)[a] for a in range(grid.d)]
    rng = np.random.default_rng(seed)
    seen = {tuple(x) for x in dirs}
    while len(dirs) < grid.d + extra:
        k = rng.integers(-3, 4, size=grid.d)
        if not k.any() or np.gcd.reduce(np.abs(k)) != 1:
            continue
        if k[np.flatnonzero(k)[0]] < 0:
            k = -k
        if tuple(k) in seen:
            continue
        seen.add(tuple(k))
        dirs.append(k)
    return dirs


def _lattice_step(grid: PeriodicGrid, direction: np.ndarray, magnitude: float):
    """Lattice vector along ``direction`` with length closest to ``magnitude``."""
    unit = np.linalg.norm(direction) / grid.n
    steps = max(1, int(round(magnitude / unit)))
    return tuple(int(c) for c in steps * direction), steps * unit


@dataclass(frozen=True)
class BesovSeminorm:
    value: float
    h: tuple
    h_norm: float
    ratios: np.ndarray = field(repr=False)
    magnitudes: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"value": self.value, "h": list(self.h), "h_norm": self.h_norm,
                "ratios": list(self.ratios), "magnitudes": list(self.magnitudes)}


def besov_seminorm(f: Field, theta: float, p: float, ladder, extra_directions: int = 0,
                   seed: int = 0) -> BesovSeminorm:
    """Sampled sup over h of ||f(.+h) - f||_p / |h|**theta.

    The sup runs over the dyadic magnitudes in ``ladder`` and over axis
    directions plus ``extra_directions`` seeded lattice directions.
    """
    g = f.grid
    ladder = np.asarray(ladder, dtype=float)
    if ladder.size == 0:
        raise ValueError("empty ladder")
    if ladder.min() < g.spacing * (1 - 1e-12) or ladder.max() > 0.25:
        raise ValueError("ladder must lie within [1/n, 1/4]")
    best, best_h, best_norm = -1.0, None, None
    rung_max = np.zeros(ladder.size)
    for i, m in enumerate(ladder):
        for k in lattice_directions(g, extra_directions, seed):
            h, hn = _lattice_step(g, k, m)
            ratio = increment_norm(f, h, p) / hn**theta
            rung_max[i] = max(rung_max[i], ratio)
            if ratio > best:
                best, best_h, best_norm = ratio, h, hn
    return BesovSeminorm(best, best_h, best_norm, rung_max, ladder)


@dataclass
class StructureTable:
    """S_p(l) with rows over orders ``p`` and columns over scales ``l``."""

    scales: np.ndarray
    orders: np.ndarray
    values: np.ndarray
    directions: int
    slices: int

    def value(self, p, scale) -> float:
        i = int(np.flatnonzero(np.isclose(self.orders, p))[0])
        j = int(np.flatnonzero(np.isclose(self.scales, scale))[0])
        return float(self.values[i, j])

    def fits(self) -> dict:
        """Scaling exponent zeta_p per order; ``None`` when unfittable."""
        out = {}
        for p, row in zip(self.orders, self.values):
            try:
                out[float(p)] = fit_exponent(self.scales, row)
            except ScalingRangeError:
                out[float(p)] = None
        return out

    def rows(self):
        for i, p in enumerate(self.orders):
            for j, s in enumerate(self.scales):
                yield float(p), float(s), float(self.values[i, j])


def structure_function(v: TimeField | Field, scales, orders, direction_count: int | None = None,
                       seed: int = 0) -> StructureTable:
    """Space, direction and time averaged moments of lattice increments.

    Directions are coordinate axes; ``direction_count < d`` picks a seeded
    subset of them.
    """
    if isinstance(v, Field):
        v = TimeField([v])
    g = v.grid
    scales = np.asarray(scales, dtype=float)
    orders = np.asarray(orders, dtype=float)
    axes = list(range(g.d))
    if direction_count is not None:
        if not 1 <= direction_count <= g.d:
            raise ValueError("direction count must lie in [1, d]")
        axes = sorted(np.random.default_rng(seed).permutation(g.d)[:direction_count].tolist())
    vals = np.zeros((orders.size, scales.size))
    for j, ell in enumerate(scales):
        steps = g.nodes(ell)
        acc = np.zeros(orders.size)
        for f in v:
            for a in axes:
                diff = shifted_difference(f, g.axis_vector(a, steps))
                acc += [np.mean(diff**p) for p in orders]
        vals[:, j] = acc / (len(v) * len(axes))
    return StructureTable(scales, orders, vals, len(axes), len(v))


def beta_model_zeta(gamma: float, p: float, d: int = 3) -> float:
    """Structure-function exponent 3 - gamma + p/3 (gamma - 2) of the beta-model."""
    if d != 3:
        raise ValueError("β-model prediction stated for d=3 only")
    if not 0 <= gamma <= 3:
        raise ValueError("gamma must lie in [0, 3]")
    if p < 1:
        raise ValueError("p must be >= 1")
    return 3.0 - gamma + (p / 3.0) * (gamma - 2.0)


def beta_model_holder(gamma: float) -> float:
    """Typical increment exponent (gamma - 2)/3."""
    if not 2 <= gamma <= 3:
        raise ValueError("gamma must lie in [2, 3]")
    return (gamma - 2.0) / 3.0


def sharp_gamma(theta: float) -> float:
    """Critical dimension 2 + 3 theta."""
    if not 0 < theta < 1 / 3:
        raise ValueError("theta must lie in (0, 1/3)")
    return 2.0 + 3.0 * theta


def _time_integrated(v: TimeField, p: float, steps: int) -> float:
    g = v.grid
    best = 0.0
    for a in range(g.d):
        h = g.axis_vector(a, steps)
        total = 0.0
        for f in v:
            total += np.mean(shifted_difference(f, h) ** p) * v.dt
        best = max(best, total)
    return best


def cubed_increment_integral(v: TimeField, ladder, p: float = 3.0, workers: int = 1) -> np.ndarray:
    """Sum over slices of ||v(.+h) - v||_p^p dt, max over axis directions, per |h|."""
    g = v.grid
    steps = [g.nodes(h) for h in ladder]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return np.array(list(ex.map(lambda s: _time_integrated(v, p, s), steps)))
    return np.array([_time_integrated(v, p, s) for s in steps])


@dataclass(frozen=True)
class EffectiveExponent:
    fit: ScalingFit
    values: np.ndarray
    margin: float

    @property
    def conservative(self) -> bool:
        return self.fit.exponent > 1 + self.margin

    @property
    def verdict(self) -> str:
        if self.conservative:
            return "conservative regime"
        if self.fit.exponent < 1 - self.margin:
            return "non-conservative regime"
        return "inconclusive"

    def to_dict(self):
        return {"fit": self.fit.to_dict(), "values": list(self.values),
                "margin": self.margin, "verdict": self.verdict}


def effective_exponent(v: TimeField, p: float = 3.0, ladder=None, workers: int = 1) -> EffectiveExponent:
    """Scaling of the time-integrated p-th increment moment against |h|.

    An exponent above 1 by three standard errors places the field in
    L^3_t B^{1/3+}_{3,inf}, the regime where energy is conserved.
    """
    g = v.grid
    ladder = dyadic_ladder(4 / g.n, 1 / 16) if ladder is None else np.asarray(ladder, float)
    vals = cubed_increment_integral(v, ladder, p, workers)
    fit = fit_exponent(ladder, vals)
    return EffectiveExponent(fit, vals, 3 * fit.stderr)
