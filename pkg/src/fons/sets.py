"""Singular sets on the torus at grid resolution.

Sets are node masks.  Distances use the exact periodic Euclidean transform
in :mod:`fons._edt`; neighbourhood volumes and Minkowski dimensions are grid
functionals of that distance field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _edt
from .grid import Field, PeriodicGrid
from .scaling import ScalingFit, dyadic_ladder, fit_exponent

# relative slack when comparing lattice distances against a continuous radius
_TOL = 1e-12


class ResolutionError(ValueError):
    pass


class EmptySetError(ValueError):
    pass


@dataclass(frozen=True)
class DistanceField:
    """Torus distance to the nearest occupied node.

    ``squared`` holds exact squared distances in node units; ``values`` is
    ``sqrt(squared) / n``.
    """

    grid: PeriodicGrid
    squared: np.ndarray

    @cached_property
    def values(self) -> np.ndarray:
        return np.sqrt(self.squared) / self.grid.n

    @cached_property
    def _sorted(self) -> np.ndarray:
        return np.sort(self.squared, axis=None)

    def within(self, eps: float) -> np.ndarray:
        """Mask of nodes with dist <= eps."""
        return self.squared <= _radius2(eps, self.grid.n)

    def count_within(self, eps) -> np.ndarray:
        r2 = _radius2(np.asarray(eps, dtype=float), self.grid.n)
        return np.searchsorted(self._sorted, r2, side="right")

    @classmethod
    def unit(cls, grid: PeriodicGrid) -> "DistanceField":
        """The dist = 1 convention used for an empty singular set."""
        return cls(grid, np.full(grid.shape, float(grid.n) ** 2))


def _radius2(eps, n):
    return (eps * n) ** 2 * (1 + _TOL)


@dataclass(frozen=True)
class SingularSet:
    grid: PeriodicGrid
    occupancy: np.ndarray
    tag: dict = field(default_factory=dict)
    analytic_dim: float | None = None
    finest_scale: float | None = None

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.shape != self.grid.shape:
            raise ValueError("occupancy shape does not match grid")
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        if not occ.any() and self.tag.get("kind") != "empty":
            raise ValueError("non-empty set kind with empty occupancy")

    @property
    def is_empty(self) -> bool:
        return not self.occupancy.any()

    @property
    def kind(self) -> str:
        return self.tag.get("kind", "custom")

    @cached_property
    def distance(self) -> DistanceField:
        if self.is_empty:
            raise EmptySetError("empty set has no distance field")
        return DistanceField(self.grid, _edt.squared_distance(self.occupancy))

    def distance_or_unit(self) -> DistanceField:
        """Distance field, or dist = 1 everywhere for the empty set."""
        if self.is_empty:
            return DistanceField.unit(self.grid)
        return self.distance

    def as_field(self) -> Field:
        return Field(self.grid, self.occupancy.astype(float))


@dataclass
class SingularSetFamily:
    """Piecewise-constant-in-time family: member ``k`` covers slice ``k``."""

    members: list[tuple[int, SingularSet]]
    horizon: float = 1.0

    def __post_init__(self):
        if not self.members:
            raise ValueError("empty family")
        idx = [k for k, _ in self.members]
        if len(set(idx)) != len(idx):
            raise ValueError("at most one member per time index")
        g = self.members[0][1].grid
        if any(s.grid != g for _, s in self.members):
            raise ValueError("mixed grids in family")
        self.members = sorted(self.members, key=lambda m: m[0])

    @classmethod
    def constant(cls, s: SingularSet, slices: int = 1, horizon: float = 1.0):
        return cls([(k, s) for k in range(slices)], horizon)

    @property
    def grid(self) -> PeriodicGrid:
        return self.members[0][1].grid

    def at(self, time_index: int) -> SingularSet:
        for k, s in self.members:
            if k == time_index:
                return s
        raise KeyError(time_index)

    def sets(self) -> list[SingularSet]:
        return [s for _, s in self.members]

    def __len__(self):
        return len(self.members)


# ---------------------------------------------------------------------------
# generators


def cantor_mask(n: int, removed_fraction: float = 1 / 3, depth: int = 1,
                offset: int = 0) -> np.ndarray:
    """Depth-truncated symmetric Cantor set sampled on ``n`` periodic nodes."""
    if not 0 < removed_fraction < 1:
        raise ValueError("removed fraction must lie in (0, 1)")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    keep = (1 - removed_fraction) / 2
    width = keep**depth
    if width * n < 1 - 1e-9:
        raise ResolutionError("resolution exhausted")
    left = np.zeros(1)
    step = 1.0
    for _ in range(depth):
        step *= keep
        left = np.concatenate([left, left + (1 - keep) * step / keep])
    mask = np.zeros(n, dtype=bool)
    lo = np.ceil(left * n - 1e-9).astype(np.int64)
    hi = np.floor((left + width) * n + 1e-9).astype(np.int64)
    for a, b in zip(lo, hi):
        idx = np.arange(a, b + 1) % n
        mask[idx] = True
    return np.roll(mask, offset)


def _factor_mask(n: int, factor) -> tuple[np.ndarray, float, float]:
    """Return (mask, dimension, finest scale) for one axis factor."""
    if factor == "full":
        return np.ones(n, dtype=bool), 1.0, 1.0 / n
    if factor == "point":
        m = np.zeros(n, dtype=bool)
        m[0] = True
        return m, 0.0, 1.0 / n
    kind, fraction, depth = factor
    if kind != "cantor":
        raise ValueError(f"unknown factor {factor!r}")
    keep = (1 - fraction) / 2
    dim = 1.0 if depth == 0 else np.log(2) / np.log(1 / keep)
    return cantor_mask(n, fraction, depth), dim, max(keep**depth, 1.0 / n)


def make_product(grid: PeriodicGrid, factors: Sequence) -> SingularSet:
    """Cartesian product of per-axis sets.

    Each factor is ``"full"``, ``"point"`` or ``("cantor", removed_fraction,
    depth)``; the analytic dimension is the sum of the factor dimensions.
    """
    if len(factors) != grid.d:
        raise ValueError("one factor per axis required")
    occ = np.ones(grid.shape, dtype=bool)
    dim, finest = 0.0, 0.0
    for a, fac in enumerate(factors):
        m, fd, fs = _factor_mask(grid.n, fac)
        shape = [1] * grid.d
        shape[a] = grid.n
        occ = occ & m.reshape(shape)
        dim += fd
        finest = max(finest, fs)
    tag = {"kind": "product",
           "parameters": {"factors": [f if isinstance(f, str) else list(f)
                                      for f in factors]},
           "seed": None}
    return SingularSet(grid, occ, tag, dim, finest)


def make_cantor(grid: PeriodicGrid, removed_fraction: float = 1 / 3,
                depth: int = 1, axes: Sequence[int] = (0,)) -> SingularSet:
    """Cantor set along ``axes`` times full circles along the other axes."""
    axes = sorted(set(axes))
    if not axes or any(a < 0 or a >= grid.d for a in axes):
        raise ValueError("axes must be a non-empty subset of the grid axes")
    factors = [("cantor", removed_fraction, depth) if a in axes else "full"
               for a in range(grid.d)]
    s = make_product(grid, factors)
    tag = {"kind": "cantor",
           "parameters": {"removed_fraction": removed_fraction, "depth": depth,
                          "axes": list(axes)},
           "seed": None}
    return SingularSet(grid, s.occupancy, tag, s.analytic_dim, s.finest_scale)


def make_hyperplane(grid: PeriodicGrid, axis: int = 0) -> SingularSet:
    """The coordinate hyperplane {x_axis = 0}."""
    occ = np.zeros(grid.shape, dtype=bool)
    idx = [slice(None)] * grid.d
    idx[axis] = 0
    occ[tuple(idx)] = True
    tag = {"kind": "hyperplane", "parameters": {"axis": axis}, "seed": None}
    return SingularSet(grid, occ, tag, float(grid.d - 1), grid.spacing)


def make_point_cloud(grid: PeriodicGrid, count: int = 1, seed: int = 0) -> SingularSet:
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    flat = rng.choice(grid.size, size=count, replace=False)
    occ = np.zeros(grid.size, dtype=bool)
    occ[flat] = True
    tag = {"kind": "point_cloud", "parameters": {"count": count}, "seed": seed}
    return SingularSet(grid, occ.reshape(grid.shape), tag, 0.0, grid.spacing)


def make_empty(grid: PeriodicGrid) -> SingularSet:
    tag = {"kind": "empty", "parameters": {}, "seed": None}
    return SingularSet(grid, np.zeros(grid.shape, dtype=bool), tag, None, None)


def make_full(grid: PeriodicGrid) -> SingularSet:
    """The whole torus (space-filling singular set)."""
    tag = {"kind": "full", "parameters": {}, "seed": None}
    return SingularSet(grid, np.ones(grid.shape, dtype=bool), tag,
                       float(grid.d), grid.spacing)


def set_from_descriptor(grid: PeriodicGrid, desc: dict, seed: int = 0) -> SingularSet:
    """Build a set from a ``{kind, parameters, seed}`` descriptor."""
    kind = desc.get("kind")
    p = dict(desc.get("parameters", {}))
    seed = desc.get("seed", seed) if desc.get("seed") is not None else seed
    if kind == "cantor":
        return make_cantor(grid, p.get("removed_fraction", 1 / 3),
                           p.get("depth", 1), p.get("axes", [0]))
    if kind == "product":
        return make_product(grid, [f if isinstance(f, str) else tuple(f)
                                   for f in p["factors"]])
    if kind == "hyperplane":
        return make_hyperplane(grid, p.get("axis", 0))
    if kind == "point_cloud":
        return make_point_cloud(grid, p.get("count", 1), seed)
    if kind == "empty":
        return make_empty(grid)
    if kind == "full":
        return make_full(grid)
    raise ValueError(f"unknown set kind {kind!r}")


# ---------------------------------------------------------------------------
# measurements


def distance_field(s: SingularSet) -> DistanceField:
    return s.distance


def neighborhood_volume(s: SingularSet | DistanceField, eps) -> float | np.ndarray:
    """Volume of the closed eps-neighbourhood {dist <= eps}.

    ``eps`` may be an array of radii.  The empty set has volume zero below
    the unit-distance convention.
    """
    grid = s.grid
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(eps_arr < grid.spacing * (1 - _TOL)):
        raise ResolutionError("sub-resolution epsilon")
    if isinstance(s, SingularSet):
        dist = s.distance_or_unit()
    else:
        dist = s
    vol = dist.count_within(eps_arr) * grid.cell_volume
    return float(vol) if vol.ndim == 0 else vol


@dataclass(frozen=True)
class MinkowskiEstimate:
    """Dimension estimate ``d - slope`` from neighbourhood-volume regression."""

    dimension: float
    fit: ScalingFit
    ladder: np.ndarray
    volumes: np.ndarray

    @property
    def nonlinear(self) -> bool:
        return self.fit.nonlinear

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "fit": self.fit.to_dict(),
                "ladder": list(self.ladder), "volumes": list(self.volumes)}


def default_ladder(s: SingularSet | SingularSetFamily) -> np.ndarray:
    """Dyadic radii between the finest trustworthy scale and 1/32.

    The finest rung sits at least 8 spacings out (a lattice set is one node
    thick, which inflates small-radius volumes) and above the set's own
    finest feature.  Near 1/4 neighbourhoods start to saturate the torus, so
    coarser rungs are only added when fewer than four would remain.
    """
    sets = s.sets() if isinstance(s, SingularSetFamily) else [s]
    grid = sets[0].grid
    feature = max(x.finest_scale or grid.spacing for x in sets)
    for spacings in (8, 4, 2, 1):
        finest = max(feature, spacings * grid.spacing)
        for coarsest in (1 / 32, 1 / 16, 1 / 8, 1 / 4):
            ladder = dyadic_ladder(finest, coarsest)
            if ladder.size >= 4:
                return ladder
    return ladder


def _check_ladder(grid: PeriodicGrid, ladder) -> np.ndarray:
    ladder = np.asarray(ladder, dtype=float)
    if ladder.ndim != 1 or ladder.size < 4 or np.unique(ladder).size < 4:
        raise ValueError("degenerate ladder: need at least 4 distinct rungs")
    if ladder.min() < grid.spacing * (1 - _TOL) or ladder.max() > 0.25:
        raise ValueError("ladder must lie within [spacing, 1/4]")
    return ladder


def _estimate(grid, ladder, volumes) -> MinkowskiEstimate:
    fit = fit_exponent(ladder, volumes)
    return MinkowskiEstimate(grid.d - fit.exponent, fit, ladder, volumes)


def minkowski_dimension(s: SingularSet, ladder=None) -> MinkowskiEstimate:
    ladder = _check_ladder(s.grid, default_ladder(s) if ladder is None else ladder)
    return _estimate(s.grid, ladder, neighborhood_volume(s, ladder))


def uniform_minkowski_dimension(fam: SingularSetFamily, ladder=None) -> MinkowskiEstimate:
    """Uniform-in-time estimate: per rung, the largest member volume."""
    ladder = _check_ladder(fam.grid, default_ladder(fam) if ladder is None else ladder)
    vols = np.max([neighborhood_volume(s, ladder) for s in fam.sets()], axis=0)
    return _estimate(fam.grid, ladder, vols)
