"""Mollification, the commutator R = v_d (x) v_d - (v (x) v)_d and the
resolved energy flux -int R : grad v_d, split near and away from a singular set."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Field, PeriodicGrid, gradient, integrate
from .scaling import ScalingFit, ScalingRangeError, fit_exponent
from .sets import SingularSet


class KernelResolutionError(ValueError):
    pass


def bump(r: np.ndarray) -> np.ndarray:
    """exp(-1 / (1 - r^2)) on r < 1, zero outside."""
    out = np.zeros_like(r, dtype=float)
    inside = r < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


@dataclass(frozen=True)
class Mollifier:
    """Radial bump of radius ``delta`` sampled on the grid, discrete mass 1."""

    grid: PeriodicGrid
    delta: float

    def __post_init__(self):
        if self.delta > 0.25:
            raise ValueError("delta must lie in (0, 1/4]")
        if self.delta < 4 * self.grid.spacing * (1 - 1e-12):
            raise KernelResolutionError("kernel under grid scale")

    @property
    def samples(self) -> np.ndarray:
        """Kernel weights ``phi_delta(y) / n^d``; they sum to one."""
        return _kernel(self.grid.d, self.grid.n, self.delta)[0]

    @property
    def transform(self) -> np.ndarray:
        return _kernel(self.grid.d, self.grid.n, self.delta)[1]

    def apply(self, a: np.ndarray) -> np.ndarray:
        """Periodic convolution of one scalar sample array."""
        return np.fft.irfftn(np.fft.rfftn(a) * self.transform, s=a.shape, axes=tuple(range(a.ndim)))


@lru_cache(maxsize=32)
def _kernel(d: int, n: int, delta: float):
    i = np.arange(n)
    x = np.minimum(i, n - i) / n
    r2 = np.zeros((n,) * d)
    for a in range(d):
        shape = [1] * d
        shape[a] = n
        r2 = r2 + (x.reshape(shape) / delta) ** 2
    k = bump(np.sqrt(r2))
    k /= k.sum()
    k.setflags(write=False)
    kt = np.fft.rfftn(k)
    kt.setflags(write=False)
    return k, kt


def mollify(f: Field, delta: float) -> Field:
    m = Mollifier(f.grid, delta)
    f.check_finite()
    return f.with_samples(np.stack([m.apply(c) for c in f.samples]))


def product_commutator(f: Field, delta: float) -> Field:
    """f_d (x) f_d - (f (x) f)_d for any number of components.

    Component ``i * c + j`` holds entry (i, j); the tensor is symmetric.
    """
    m = Mollifier(f.grid, delta)
    c = f.components
    fd = np.stack([m.apply(x) for x in f.samples])
    out = np.empty((c * c,) + f.grid.shape)
    for i in range(c):
        for j in range(i, c):
            r = fd[i] * fd[j] - m.apply(f.samples[i] * f.samples[j])
            out[i * c + j] = r
            out[j * c + i] = r
    return f.with_samples(out)


def commutator(v: Field, delta: float) -> Field:
    if not v.is_vector:
        raise ValueError("commutator needs a vector field")
    return product_commutator(v, delta)


def spectral_gradient(f: Field) -> Field:
    """Exact derivative of the trigonometric interpolant, same layout as gradient()."""
    g = f.grid
    k = 2j * np.pi * np.fft.fftfreq(g.n, 1.0 / g.n)
    kr = 2j * np.pi * np.fft.rfftfreq(g.n, 1.0 / g.n)
    # the Nyquist mode has no odd part
    if g.n % 2 == 0:
        k[g.n // 2] = 0
        kr[-1] = 0
    out = np.empty((f.components * g.d,) + g.shape)
    for c in range(f.components):
        fh = np.fft.rfftn(f.samples[c])
        for a in range(g.d):
            shape = [1] * g.d
            shape[a] = -1
            mult = (kr if a == g.d - 1 else k).reshape(shape)
            out[c * g.d + a] = np.fft.irfftn(fh * mult, s=g.shape, axes=tuple(range(g.d)))
    return f.with_samples(out)


def flux_density(v: Field, delta: float, method: str = "fd") -> np.ndarray:
    """Pointwise R_delta : grad v_delta."""
    if not v.is_vector:
        raise ValueError("flux needs a vector field")
    r = commutator(v, delta).samples
    vd = mollify(v, delta)
    if method == "fd":
        gv = gradient(vd).samples
    elif method == "spectral":
        gv = spectral_gradient(vd).samples
    else:
        raise ValueError(f"unknown gradient method {method!r}")
    return np.einsum("c...,c...->...", r, gv)


def energy_flux(v: Field, delta: float, method: str = "fd") -> float:
    """-mean(R_delta : grad v_delta), the right side of the mollified energy balance."""
    return float(-np.mean(flux_density(v, delta, method)))


def flux_split(v: Field, delta: float, s: SingularSet, eps: float,
               method: str = "fd") -> tuple[float, float, float]:
    """(inner, outer, total): flux over {dist <= eps}, over the rest, and in all."""
    if delta > eps * (1 + 1e-12):
        raise ValueError("mollification reaches singular set")
    dens = flux_density(v, delta, method)
    near = s.distance_or_unit().within(eps)
    w = v.grid.cell_volume
    inner = float(-np.sum(dens[near]) * w)
    outer = float(-np.sum(dens[~near]) * w)
    total = float(-np.mean(dens))
    return inner, outer, total


@dataclass
class FluxReport:
    rows: list = field(default_factory=list)  # (delta, eps, inner, outer, total)
    method: str = "fd"
    fits: dict = field(default_factory=dict)

    def add(self, delta, eps, inner, outer, total):
        self.rows.append((float(delta), float(eps), inner, outer, total))

    def column(self, name: str) -> np.ndarray:
        i = ["delta", "eps", "inner", "outer", "total"].index(name)
        return np.array([r[i] for r in self.rows])

    def fit(self):
        for name, scale in (("inner", "eps"), ("total", "delta")):
            try:
                self.fits[name] = fit_exponent(self.column(scale), np.abs(self.column(name)))
            except ScalingRangeError:
                self.fits[name] = None
        return self

    def to_dict(self):
        return {"method": self.method,
                "rows": [dict(zip(["delta", "eps", "inner", "outer", "total"], r))
                         for r in self.rows],
                "fits": {k: (None if f is None else f.to_dict()) for k, f in self.fits.items()}}


def flux_scaling(v: Field, s: SingularSet, ladder, method: str = "fd") -> FluxReport:
    """Flux split along a ladder with delta = eps at every rung."""
    rep = FluxReport(method=method)
    for eps in ladder:
        rep.add(eps, eps, *flux_split(v, eps, s, eps, method))
    return rep.fit()


@dataclass(frozen=True)
class MolliCheck:
    gradient_fit: ScalingFit | None
    commutator_fit: ScalingFit | None
    theta: float
    gradient_norms: np.ndarray
    commutator_norms: np.ndarray

    @property
    def gradient_ok(self) -> bool:
        return self.gradient_fit is None or self.gradient_fit.exponent >= self.theta - 1 - 0.1

    @property
    def commutator_ok(self) -> bool:
        return self.commutator_fit is None or self.commutator_fit.exponent >= 2 * self.theta - 0.1

    @property
    def passed(self) -> bool:
        return self.gradient_ok and self.commutator_ok

    def to_dict(self):
        return {"theta": self.theta,
                "gradient_fit": None if self.gradient_fit is None else self.gradient_fit.to_dict(),
                "commutator_fit": None if self.commutator_fit is None else self.commutator_fit.to_dict(),
                "gradient_norms": list(self.gradient_norms),
                "commutator_norms": list(self.commutator_norms),
                "passed": self.passed}


def _fit_or_none(x, y, floor):
    """Fit, or None when every value is roundoff on a constant field."""
    if np.all(np.asarray(y) <= floor):
        return None
    return fit_exponent(x, y)


def verify_molli_estimates(f: Field, theta: float, r: float, ladder) -> MolliCheck:
    """Measured slopes of ||grad f_d||_r and ||f_d (x) f_d - (f (x) f)_d||_r in delta.

    The mollification bounds predict slopes of at least theta - 1 and
    2 theta respectively.
    """
    ladder = np.asarray(ladder, dtype=float)
    gn = np.array([integrate(gradient(mollify(f, dl)), r) for dl in ladder])
    cn = np.array([integrate(product_commutator(f, dl), r) for dl in ladder])
    floor = 1e-12 * max(1.0, integrate(f, np.inf)) ** 2
    return MolliCheck(_fit_or_none(ladder, gn, floor), _fit_or_none(ladder, cn, floor),
                      theta, gn, cn)
