"""Velocity fields with prescribed Hölder exponent and gradient blow-up.

The singular construction is

    v(x, t) = C(t) * dist(x)**beta * sin(dist(x)**-alpha - 1 + phase_t) * e(x)

with ``beta = theta * (1 + alpha)``.  It is theta-Hölder, smooth off the
singular set and its gradient grows like ``dist**-kappa`` with
``kappa = (1 + alpha) * (1 - theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Field, PeriodicGrid, TimeField, gradient
from .scaling import ScalingFit, ScalingRangeError, dyadic_ladder, fit_exponent
from .sets import SingularSetFamily, uniform_minkowski_dimension

SPACE_FILLING_SLACK = 0.05


def kappa_ceiling(theta: float, r: float, d: int) -> float:
    """Largest admissible blow-up rate: (r-1)/r * d(1-theta)/(1-3 theta)."""
    ratio = 1.0 if np.isinf(r) else (r - 1) / r
    return ratio * d * (1 - theta) / (1 - 3 * theta)


def constant_profile(slices: int) -> np.ndarray:
    return np.ones(slices)


def singular_profile(slices: int, horizon: float = 1.0, power: float = 0.25) -> np.ndarray:
    """C(t) = t**-power at slice midpoints; in L^3 for power < 1/3."""
    dt = horizon / slices
    return ((np.arange(slices) + 0.5) * dt) ** -power


@dataclass
class SynthesisSpec:
    theta: float
    family: SingularSetFamily
    alpha: float = 0.0
    amplitudes: np.ndarray | None = None
    seed: int = 0
    kappa_override: float | None = None
    r: float = np.inf

    def __post_init__(self):
        if not 0 < self.theta < 1 / 3:
            raise ValueError("theta must lie in (0, 1/3)")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.amplitudes is None:
            self.amplitudes = constant_profile(len(self.family))
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.amplitudes.shape != (len(self.family),):
            raise ValueError("one amplitude per time slice")
        if not np.all(np.isfinite(self.amplitudes)) or np.any(self.amplitudes < 0):
            raise ValueError("amplitudes must be finite and non-negative")
        if self.kappa_override is not None:
            if self.alpha != 0 or not 0 <= self.kappa_override < 1 - self.theta:
                raise ValueError("kappa override needs alpha = 0 and kappa < 1 - theta")
        if self.kappa >= kappa_ceiling(self.theta, self.r, self.family.grid.d):
            raise ValueError("blow-up rate exceeds the admissible range")

    @property
    def kappa(self) -> float:
        if self.kappa_override is not None:
            return self.kappa_override
        return (1 + self.alpha) * (1 - self.theta)

    @property
    def beta(self) -> float:
        """Exponent of the distance profile."""
        if self.kappa_override is not None:
            return 1 - self.kappa_override
        return self.theta * (1 + self.alpha)

    @property
    def horizon(self) -> float:
        return self.family.horizon

    def amplitude_l3(self) -> float:
        dt = self.horizon / len(self.amplitudes)
        return float(np.sum(self.amplitudes**3 * dt) ** (1 / 3))

    def to_dict(self) -> dict:
        return {"theta": self.theta, "alpha": self.alpha, "kappa": self.kappa,
                "beta": self.beta, "r": self.r, "seed": self.seed,
                "kappa_override": self.kappa_override,
                "amplitudes": list(self.amplitudes), "horizon": self.horizon,
                "sets": [{"time_index": k, **s.tag} for k, s in self.family.members]}


def modulation(grid: PeriodicGrid, seed: int, strength: float = 0.05) -> np.ndarray:
    """Fixed smooth unit-vector field, shape ``(d, n, ..., n)``.

    A seeded constant direction perturbed by one Fourier mode of relative
    size ``strength``; kept weak so the distance profile dominates the
    gradient near the singular set.
    """
    rng = np.random.default_rng([seed, 0x5EED])
    a = rng.normal(size=grid.d)
    a /= np.linalg.norm(a)
    psi = rng.uniform(0, 2 * np.pi, size=grid.d)
    x = grid.coordinates()
    u = np.empty((grid.d,) + grid.shape)
    for c in range(grid.d):
        u[c] = a[c] + strength * np.cos(2 * np.pi * x[(c + 1) % grid.d] + psi[c])
    return u / np.sqrt(np.sum(u * u, axis=0))


def _slice_rng(seed: int, time_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, time_index])


def singular_field(spec: SynthesisSpec) -> TimeField:
    grid = spec.family.grid
    e = modulation(grid, spec.seed)
    slices = []
    for (k, s), amp in zip(spec.family.members, spec.amplitudes):
        if s.is_empty:
            f = smooth_field(grid, modes=2, seed=spec.seed + 7919 * (k + 1),
                             components=grid.d, lipschitz=1.0)
            slices.append(Field(grid, amp * f.samples, k))
            continue
        phase = _slice_rng(spec.seed, k).uniform(np.pi / 4, 3 * np.pi / 4)
        dist = s.distance.values
        with np.errstate(divide="ignore", invalid="ignore"):
            osc = np.sin(dist**-spec.alpha - 1 + phase) if spec.alpha else np.sin(phase)
            prof = np.where(dist > 0, dist**spec.beta * osc, 0.0)
        slices.append(Field(grid, amp * prof * e, k))
    return TimeField(slices, spec.horizon, spec.amplitudes.copy())


def smooth_field(grid: PeriodicGrid, modes: int = 4, seed: int = 0,
                 components: int = 1, lipschitz: float | None = None,
                 solenoidal: bool = False) -> Field:
    """Random real trigonometric polynomial with |k|_inf <= modes.

    With ``lipschitz`` set, the field is rescaled so the largest
    finite-difference gradient magnitude equals that value.  ``solenoidal``
    projects a d-component field onto its divergence-free part.
    """
    if solenoidal and components != grid.d:
        raise ValueError("solenoidal projection needs d components")
    if not 1 <= modes <= grid.n // 4:
        raise ValueError("modes must lie in [1, n/4]")
    rng = np.random.default_rng(seed)
    k = np.fft.fftfreq(grid.n, 1.0 / grid.n)
    kk = np.meshgrid(*([k] * grid.d), indexing="ij")
    band = np.max(np.abs(kk), axis=0) <= modes
    band &= np.sum(np.abs(kk), axis=0) > 0
    k2 = np.sum(np.square(kk), axis=0)
    out = np.empty((components,) + grid.shape)
    for c in range(components):
        coef = np.zeros(grid.shape, dtype=complex)
        nb = int(band.sum())
        coef[band] = (rng.normal(size=nb) + 1j * rng.normal(size=nb)) / (1 + k2[band])
        out[c] = np.real(np.fft.ifftn(coef)) * grid.size
    if solenoidal:
        out = leray_project(out)
    f = Field(grid, out / np.sqrt(np.mean(out**2)))
    if lipschitz is not None:
        gmax = gradient(f).magnitude().max()
        f = f.with_samples(f.samples * (lipschitz / gmax))
    return f


def leray_project(u: np.ndarray) -> np.ndarray:
    """Divergence-free part of a ``(d, n, ..., n)`` sample array."""
    d = u.shape[0]
    n = u.shape[1]
    axes = tuple(range(1, d + 1))
    k = np.fft.fftfreq(n, 1.0 / n)
    kk = np.meshgrid(*([k] * d), indexing="ij")
    k2 = np.sum(np.square(kk), axis=0)
    k2[(0,) * d] = 1
    uh = np.fft.fftn(u, axes=axes)
    div = sum(kk[a] * uh[a] for a in range(d))
    return np.real(np.fft.ifftn(np.stack([uh[a] - kk[a] * div / k2 for a in range(d)]), axes=axes))


def weierstrass_field(grid: PeriodicGrid, theta: float, levels: int, seed: int = 0,
                      components: int = 1) -> Field:
    """Lacunary series sum_j 2**(-j theta) sin(2 pi 2**j <k_j, x> + phi_j).

    Directions ``k_j`` have entries +-1 so every level oscillates along
    every axis.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if not 0 <= levels <= int(np.log2(grid.n)) - 2:
        raise ValueError("levels must lie in [0, log2(n) - 2]")
    rng = np.random.default_rng(seed)
    x = grid.coordinates()
    out = np.zeros((components,) + grid.shape)
    for c in range(components):
        for j in range(levels + 1):
            signs = np.concatenate([[1.0], rng.choice([-1.0, 1.0], size=grid.d - 1)])
            phi = rng.uniform(0, 2 * np.pi)
            arg = sum(s * xa for s, xa in zip(signs, x))
            out[c] += 2.0 ** (-j * theta) * np.sin(2 * np.pi * 2**j * arg + phi)
    return Field(grid, out)


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass
class HypothesisReport:
    d: int
    theta: float
    r: float
    gamma_hat: float | None
    theta_hat: list
    kappa_hat: float | None
    kappa_slices: list
    gradient_constant: float | None
    kappa_ceiling: float
    flags: list = field(default_factory=list)

    @property
    def dim_ok(self) -> bool:
        return self.gamma_hat is None or self.gamma_hat < self.d - SPACE_FILLING_SLACK

    @property
    def kappa_ok(self) -> bool:
        return self.kappa_hat is None or self.kappa_hat < self.kappa_ceiling

    @property
    def passed(self) -> bool:
        return self.dim_ok and self.kappa_ok

    def to_dict(self) -> dict:
        return {"d": self.d, "theta": self.theta, "r": self.r,
                "gamma_hat": self.gamma_hat, "theta_hat": self.theta_hat,
                "kappa_hat": self.kappa_hat, "kappa_slices": self.kappa_slices,
                "gradient_constant": self.gradient_constant,
                "kappa_ceiling": self.kappa_ceiling,
                "dimension_hypothesis": self.dim_ok,
                "blowup_hypothesis": self.kappa_ok,
                "passed": self.passed, "flags": list(self.flags)}


def holder_exponent(f: Field, ladder=None, p: float = np.inf) -> ScalingFit:
    """Fit of max over axis directions of ||f(.+h) - f||_p against |h|."""
    from .besov import increment_norm

    g = f.grid
    if ladder is None:
        ladder = dyadic_ladder(2 / g.n, 1 / 8)
        if ladder.size < 4:
            ladder = dyadic_ladder(1 / g.n, 1 / 4)
    ladder = np.asarray(ladder, dtype=float)
    vals = [max(increment_norm(f, g.axis_vector(a, g.nodes(h)), p) for a in range(g.d))
            for h in ladder]
    return fit_exponent(ladder, vals)


def blowup_fit(f: Field, dist: np.ndarray, inner: float, outer: float = 1 / 8,
               amplitude: float = 1.0, bins: int = 24) -> ScalingFit | None:
    """Envelope fit of log|grad f| against log dist on inner <= dist <= outer.

    Nodes are grouped in logarithmic distance bins and the largest gradient
    of each bin is regressed, which tracks the bound C dist**-kappa even
    when the field oscillates.
    """
    if not 0 < inner < outer:
        return None
    sel = (dist >= inner) & (dist <= outer)
    if sel.sum() < 4:
        return None
    gm = gradient(f).magnitude()[sel] / max(amplitude, 1e-300)
    edges = np.geomspace(inner, outer, bins + 1)
    b = np.clip(np.searchsorted(edges, dist[sel], side="right") - 1, 0, bins - 1)
    top = np.zeros(bins)
    np.maximum.at(top, b, gm)
    count = np.bincount(b, minlength=bins)
    centres = np.sqrt(edges[1:] * edges[:-1])
    keep = (count > 0) & (top > 0)
    if keep.sum() < 4:
        return None
    return fit_exponent(centres[keep], top[keep])


def resolved_radius(n: int, alpha: float, max_phase_step: float = 0.25) -> float:
    """Smallest distance where the oscillation advances at most ``max_phase_step``
    radians per node."""
    if alpha == 0:
        return 0.0
    return (alpha / (n * max_phase_step)) ** (1 / (1 + alpha))


def verify_hypotheses(v: TimeField, fam: SingularSetFamily, spec: SynthesisSpec | None = None,
                      *, theta: float | None = None, r: float | None = None,
                      h_ladder=None, annulus=None, minkowski_ladder=None) -> HypothesisReport:
    """Measure dimension, Hölder exponent and blow-up rate against the hypotheses."""
    grid = v.grid
    if fam.grid != grid:
        raise ValueError("field and set family live on different grids")
    theta = spec.theta if theta is None else theta
    r = (spec.r if spec is not None else np.inf) if r is None else r
    alpha = spec.alpha if spec is not None else 0.0
    flags = []

    nonempty = [s for s in fam.sets() if not s.is_empty]
    gamma_hat = None
    if nonempty:
        gamma_hat = uniform_minkowski_dimension(
            SingularSetFamily([(k, s) for k, s in fam.members if not s.is_empty]),
            minkowski_ladder).dimension
        if gamma_hat >= grid.d - SPACE_FILLING_SLACK:
            flags.append("space filling")
    else:
        flags.append("empty singular set: dist = 1 convention")

    p = np.inf if np.isinf(r) else 3 * r
    theta_hat = []
    for f in v:
        try:
            theta_hat.append(holder_exponent(f, h_ladder, p).exponent)
        except ScalingRangeError:
            theta_hat.append(None)
    if None in theta_hat:
        flags.append("Hölder exponent unresolved")

    inner, outer = annulus if annulus is not None else (4 / grid.n, 1 / 8)
    inner = max(inner, resolved_radius(grid.n, alpha))
    kappas, consts = [], []
    amps = v.amplitudes if v.amplitudes is not None else np.ones(len(v))
    for f, (k, s), amp in zip(v, fam.members, amps):
        if s.is_empty:
            gmax = gradient(f).magnitude().max()
            kappas.append(0.0)
            consts.append(gmax / amp if amp > 0 else 0.0)
            continue
        dist = s.distance.values
        fit = blowup_fit(f, dist, inner, outer, amp)
        if fit is None:
            kappas.append(None)
            continue
        kappas.append(-fit.exponent)
        sel = (dist >= inner) & (dist <= outer)
        kap = spec.kappa if spec is not None else -fit.exponent
        gm = gradient(f).magnitude()[sel]
        consts.append(float(np.max(gm * dist[sel] ** kap) / max(amp, 1e-300)))
    measured = [x for x in kappas if x is not None]
    kappa_hat = max(measured) if measured else None
    if kappa_hat is None and nonempty:
        flags.append("blow-up rate unresolved")
    return HypothesisReport(
        d=grid.d, theta=theta, r=r, gamma_hat=gamma_hat, theta_hat=theta_hat,
        kappa_hat=kappa_hat, kappa_slices=kappas,
        gradient_constant=max(consts) if consts else None,
        kappa_ceiling=kappa_ceiling(theta, r, grid.d), flags=flags)
