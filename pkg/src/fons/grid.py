"""Periodic grids on the d-torus and sampled fields.

The torus T^d is identified with [0, 1)^d and sampled at ``n`` nodes per
axis.  Field samples are stored component-first, ``(components, n, ..., n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Integral
from typing import Sequence

import numpy as np


class InvalidFieldError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicGrid:
    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 4, got {self.n}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return float(self.n) ** (-self.d)

    @property
    def diameter(self) -> float:
        """Largest torus distance between two points, sqrt(d)/2."""
        return 0.5 * np.sqrt(self.d)

    def coordinates(self) -> list[np.ndarray]:
        """Broadcastable node coordinates, one array per axis."""
        x = np.arange(self.n) / self.n
        out = []
        for a in range(self.d):
            shape = [1] * self.d
            shape[a] = self.n
            out.append(x.reshape(shape))
        return out

    def nodes(self, h: float) -> int:
        """Number of nodes spanned by a torus length ``h`` (must be on-lattice)."""
        k = h * self.n
        if abs(k - round(k)) > 1e-9:
            raise ValueError("off-grid shift")
        return int(round(k))

    def axis_vector(self, axis: int, nodes: int) -> tuple[int, ...]:
        h = [0] * self.d
        h[axis] = nodes
        return tuple(h)


@dataclass(frozen=True)
class Field:
    grid: PeriodicGrid
    samples: np.ndarray
    time_index: int | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == self.grid.d:
            s = s[np.newaxis]
        if s.shape[1:] != self.grid.shape:
            raise ValueError(
                f"samples shape {s.shape} incompatible with grid {self.grid.shape}"
            )
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def components(self) -> int:
        return self.samples.shape[0]

    @property
    def is_vector(self) -> bool:
        return self.components == self.grid.d

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean magnitude over components."""
        if self.components == 1:
            return np.abs(self.samples[0])
        return np.sqrt(np.einsum("c...,c...->...", self.samples, self.samples))

    def check_finite(self) -> "Field":
        if not np.all(np.isfinite(self.samples)):
            raise InvalidFieldError("invalid field")
        return self

    def with_samples(self, samples: np.ndarray) -> "Field":
        return Field(self.grid, samples, self.time_index)

    def __sub__(self, other: "Field") -> "Field":
        _require_same_grid(self, other)
        return self.with_samples(self.samples - other.samples)

    def __add__(self, other: "Field") -> "Field":
        _require_same_grid(self, other)
        return self.with_samples(self.samples + other.samples)


@dataclass
class TimeField:
    """Time slices ``t_k = k * dt`` of one field, ``dt = horizon / len(slices)``."""

    slices: list[Field]
    horizon: float = 1.0
    amplitudes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.slices:
            raise ValueError("a time field needs at least one slice")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        g = self.slices[0].grid
        if any(s.grid != g for s in self.slices):
            raise ValueError("all slices must share one grid")

    @property
    def grid(self) -> PeriodicGrid:
        return self.slices[0].grid

    @property
    def dt(self) -> float:
        return self.horizon / len(self.slices)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.slices)) * self.dt

    def __len__(self):
        return len(self.slices)

    def __iter__(self):
        return iter(self.slices)


def _require_same_grid(a: Field, b: Field):
    if a.grid != b.grid or a.components != b.components:
        raise ValueError("fields live on different grids")


def integrate(f: Field, p: float = 2.0) -> float:
    """L^p norm over the torus by the periodic trapezoid rule.

    Vector fields use the pointwise Euclidean magnitude.  ``p = inf`` gives
    the max norm.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    f.check_finite()
    m = f.magnitude()
    if np.isinf(p):
        return float(m.max())
    if p == 2:
        return float(np.sqrt(np.mean(m * m)))
    return float(np.mean(m**p) ** (1.0 / p))


def _lattice(h: Sequence[float] | int, d: int) -> tuple[int, ...]:
    if isinstance(h, (Integral, np.integer)):
        if d != 1:
            raise ValueError("scalar shift only valid in one dimension")
        h = (h,)
    h = tuple(h)
    if len(h) != d:
        raise ValueError(f"shift has {len(h)} coordinates, grid has {d}")
    out = []
    for c in h:
        if isinstance(c, (Integral, np.integer)):
            out.append(int(c))
        elif float(c).is_integer():
            out.append(int(c))
        else:
            raise ValueError("off-grid shift")
    return tuple(out)


def shift(f: Field, h: Sequence[int] | int) -> Field:
    """Translate by a lattice vector ``h`` (node units): result(x) = f(x + h)."""
    h = _lattice(h, f.grid.d)
    if not any(h):
        return f
    axes = tuple(range(1, f.grid.d + 1))
    return f.with_samples(np.roll(f.samples, tuple(-c for c in h), axis=axes))


def shifted_difference(f: Field, h: Sequence[int] | int) -> np.ndarray:
    """Pointwise magnitude of f(x + h) - f(x)."""
    h = _lattice(h, f.grid.d)
    if not any(h):
        return np.zeros(f.grid.shape)
    axes = tuple(range(1, f.grid.d + 1))
    diff = np.roll(f.samples, tuple(-c for c in h), axis=axes) - f.samples
    if diff.shape[0] == 1:
        return np.abs(diff[0])
    return np.sqrt(np.einsum("c...,c...->...", diff, diff))


def gradient(f: Field) -> Field:
    """Centered periodic differences.

    Component ``c * d + a`` of the result holds d f_c / d x_a.
    """
    f.check_finite()
    g = f.grid
    scale = g.n / 2.0
    out = np.empty((f.components * g.d,) + g.shape)
    for c in range(f.components):
        for a in range(g.d):
            out[c * g.d + a] = (
                np.roll(f.samples[c], -1, axis=a) - np.roll(f.samples[c], 1, axis=a)
            ) * scale
    return Field(g, out, f.time_index)


def kinetic_energy(v: Field) -> float:
    if not v.is_vector:
        raise ValueError("kinetic energy needs a vector field")
    return 0.5 * integrate(v, 2) ** 2


def constant_field(grid: PeriodicGrid, value, time_index=None) -> Field:
    value = np.atleast_1d(np.asarray(value, dtype=float))
    samples = np.broadcast_to(
        value.reshape((-1,) + (1,) * grid.d), (value.size,) + grid.shape
    ).copy()
    return Field(grid, samples, time_index)
