"""End-to-end experiments: thresholds, the I/II/III increment split with the
eps(h) choice, verdicts and threshold sweeps."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .flux import flux_scaling
from .grid import Field, PeriodicGrid, TimeField, shifted_difference
from .scaling import ScalingFit, ScalingRangeError, dyadic_ladder, fit_exponent
from .sets import SingularSet, SingularSetFamily, set_from_descriptor
from .synthesis import (SynthesisSpec, constant_profile, kappa_ceiling, singular_field,
                        singular_profile, verify_hypotheses, weierstrass_field)

NEAR_THRESHOLD = 0.05
CANTOR_DIM = math.log(2) / math.log(3)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def r_ratio(r: float) -> float:
    """r/(r-1), with the r = inf case equal to 1."""
    return 1.0 if np.isinf(r) else r / (r - 1)


def _parse_r(value) -> float:
    if value is None or (isinstance(value, str) and value.lower() in ("inf", "infinity")):
        return math.inf
    return float(value)


# ---------------------------------------------------------------------------
# thresholds


def gamma_threshold(theta: float, r: float, kappa: float, d: int = 3) -> float:
    """Largest singular-set dimension for which the energy argument closes."""
    if not 0 < theta < 1 / 3 or r <= 3 / (2 + 3 * theta):
        raise ValueError("empty theorem regime")
    if not 0 <= kappa < kappa_ceiling(theta, r, d):
        raise ValueError("empty theorem regime")
    q = r_ratio(r) * (1 - 3 * theta)
    if kappa <= 1 - theta:
        out = d - q
    else:
        out = d - kappa / (1 - theta) * q
    if out <= 0:
        raise ValueError("empty theorem regime")
    return out


def epsilon_select(h: float, theta: float, kappa: float, eps0: float) -> float:
    """eps = 2|h| when kappa <= 1 - theta, else 2|h|**((1 - theta)/kappa)."""
    if h <= 0:
        raise ValueError("|h| must be positive")
    if not 2 * h < eps0:
        raise ValueError("h too large for ε₀")
    eps = 2 * h if kappa <= 1 - theta else 2 * h ** ((1 - theta) / kappa)
    if eps >= eps0:
        raise ValueError("h too large for ε₀")
    return eps


def term_decomposition(f: Field, s: SingularSet | None, h, eps: float, eps0: float):
    """(I, II, III): cubed increment mass over dist <= eps, eps < dist <= eps0
    and dist > eps0, using one distance field for all three."""
    g = f.grid
    hv = np.asarray(h, dtype=float).reshape(-1)
    hn = float(np.linalg.norm(hv)) / g.n
    if not 2 * hn <= eps * (1 + 1e-12) or not eps <= eps0 or eps0 >= 1 + 1e-12:
        raise ValueError("need 2|h| <= eps <= eps0")
    cubed = shifted_difference(f, tuple(int(x) for x in hv)) ** 3
    dist = (s.distance_or_unit() if s is not None else None)
    w = g.cell_volume
    if dist is None:
        return 0.0, 0.0, float(np.sum(cubed) * w)
    near = dist.within(eps)
    mid = dist.within(eps0) & ~near
    far = ~(near | mid)
    return (float(np.sum(cubed[near]) * w), float(np.sum(cubed[mid]) * w),
            float(np.sum(cubed[far]) * w))


@dataclass(frozen=True)
class AnnulusSum:
    shell: float
    direct: float
    exponent: float
    shells: tuple  # (i, volume of the i-th shell inside (eps, eps0])

    def to_dict(self):
        return {"shell_sum": self.shell, "direct": self.direct, "exponent": self.exponent,
                "shells": [list(x) for x in self.shells]}


def shell_index(dist: np.ndarray) -> np.ndarray:
    """i with 2**-i < dist <= 2**-(i-1), exact at powers of two."""
    m, e = np.frexp(dist)
    return 1 - e + (m == 0.5)


def dyadic_annulus_sum(s: SingularSet, kappa: float, r: float, eps: float,
                       eps0: float) -> AnnulusSum:
    """Sum_i 2**(i q) |A_i| over dyadic distance shells in (eps, eps0], with
    q = kappa r/(r-1), next to the direct sum of dist**-q over the same nodes.

    Each node falls in exactly one half-open shell, so direct <= shell <=
    2**q direct.
    """
    g = s.grid
    if not 0 < eps < eps0:
        raise ValueError("need 0 < eps < eps0")
    j = math.ceil(-math.log2(eps) - 1e-12)
    if 2.0**-j < 2 * g.spacing * (1 - 1e-12):
        raise ValueError("unresolved shells")
    q = kappa * r_ratio(r)
    d = s.distance_or_unit().values
    sel = (d > eps * (1 + 1e-12)) & (d <= eps0 * (1 + 1e-12))
    dd = d[sel]
    idx = shell_index(dd)
    w = g.cell_volume
    shells = []
    total = 0.0
    for i in np.unique(idx):
        cnt = int(np.count_nonzero(idx == i))
        shells.append((int(i), cnt * w))
        total += 2.0 ** (i * q) * cnt * w
    if q == 0:
        direct = dd.size * w
    else:
        direct = float(np.sum(dd ** -q) * w)
    return AnnulusSum(float(total), float(direct), q, tuple(shells))


# ---------------------------------------------------------------------------
# configuration


def set_for_dimension(d: int, gamma: float, n: int, depth: int | None = None) -> dict:
    """Product-set descriptor with analytic dimension ``gamma``.

    floor(gamma) axes are full circles, one axis carries a symmetric Cantor
    set for the fractional part, the rest are points.
    """
    if not 0 <= gamma <= d:
        raise ConfigError("gamma target must lie in [0, d]")
    whole = int(math.floor(gamma + 1e-9))
    frac = gamma - whole
    factors: list = ["full"] * min(whole, d)
    if len(factors) < d and frac > 1e-6:
        keep = 2.0 ** (-1.0 / frac)
        removed = 1 - 2 * keep
        if abs(frac - CANTOR_DIM) < 1e-3:
            removed, keep = 1 / 3, 1 / 3
        if depth is None:
            # finest gap stays above the eight-node floor of the dimension ladder
            depth = max(1, int(math.floor(math.log(8 / n) / math.log(keep) + 1e-9)))
        factors.append(["cantor", removed, depth])
    factors += ["point"] * (d - len(factors))
    return {"kind": "product", "parameters": {"factors": factors}}


@dataclass
class ExperimentConfig:
    d: int = 2
    n: int = 2048
    theta: float = 0.2
    r: float = math.inf
    kappa: float | None = None
    gamma_target: float | None = None
    set: dict | None = None
    field: str = "singular"
    levels: int | None = None
    slices: int = 8
    horizon: float = 1.0
    profile: str = "constant"
    h_ladder: list | None = None
    eps0: float = 0.125
    seed: int = 0
    flux: bool = False
    artifacts: str = "first"

    def __post_init__(self):
        self.r = _parse_r(self.r)
        if self.kappa is None:
            self.kappa = 1 - self.theta
        try:
            PeriodicGrid(self.d, self.n)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if not 0 < self.theta < 1 / 3:
            raise ConfigError("theta must lie in (0, 1/3)")
        if not self.r > 3 / (2 + 3 * self.theta):
            raise ConfigError("r must exceed 3/(2 + 3 theta)")
        if not 0 <= self.kappa < kappa_ceiling(self.theta, self.r, self.d):
            raise ConfigError("kappa outside the admissible range")
        if not 0 < self.eps0 < 1:
            raise ConfigError("eps0 must lie in (0, 1)")
        if self.field not in ("singular", "weierstrass"):
            raise ConfigError(f"unknown field kind {self.field!r}")
        if self.field == "singular" and (self.set is None) == (self.gamma_target is None):
            raise ConfigError("give exactly one of set and gamma_target")
        if self.profile not in ("constant", "singular"):
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.slices < 1 or not self.horizon > 0:
            raise ConfigError("need slices >= 1 and horizon > 0")
        if self.artifacts not in ("none", "first", "all"):
            raise ConfigError("artifacts must be none, first or all")
        lad = self.ladder
        if lad.size == 0:
            raise ConfigError("empty h ladder")
        if np.any(lad >= self.eps0 / 2):
            raise ConfigError("h ladder rungs must stay below eps0/2")
        grid = PeriodicGrid(self.d, self.n)
        for h in lad:
            try:
                grid.nodes(h)
            except ValueError as e:
                raise ConfigError(str(e)) from None

    @property
    def ladder(self) -> np.ndarray:
        if self.h_ladder is None:
            for nodes in (4, 2, 1):
                lad = dyadic_ladder(nodes / self.n, self.eps0 / 4)
                if lad.size >= 4:
                    break
            return lad
        return np.asarray(self.h_ladder, dtype=float)

    @property
    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.d, self.n)

    def set_descriptor(self) -> dict:
        if self.field == "weierstrass":
            return {"kind": "full", "parameters": {}}
        if self.set is not None:
            return self.set
        return set_for_dimension(self.d, self.gamma_target, self.n)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**raw)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["h_ladder"] = list(self.ladder)
        return out


# ---------------------------------------------------------------------------
# pipeline


def _synthesis_args(theta: float, kappa: float) -> dict:
    if abs(kappa - (1 - theta)) < 1e-12:
        return {"alpha": 0.0}
    if kappa < 1 - theta:
        return {"kappa_override": kappa}
    return {"alpha": kappa / (1 - theta) - 1}


def build(cfg: ExperimentConfig):
    """Set family, time field and synthesis spec (None for lacunary fields)."""
    grid = cfg.grid
    amps = (constant_profile(cfg.slices) if cfg.profile == "constant"
            else singular_profile(cfg.slices, cfg.horizon))
    s = set_from_descriptor(grid, cfg.set_descriptor(), cfg.seed)
    fam = SingularSetFamily.constant(s, cfg.slices, cfg.horizon)
    if cfg.field == "weierstrass":
        levels = cfg.levels if cfg.levels is not None else int(math.log2(cfg.n)) - 2
        slices = [Field(grid, a * weierstrass_field(grid, cfg.theta, levels, cfg.seed + k,
                                                    components=cfg.d).samples, k)
                  for k, a in enumerate(amps)]
        return fam, TimeField(slices, cfg.horizon, amps), None
    spec = SynthesisSpec(cfg.theta, fam, amplitudes=amps, seed=cfg.seed, r=cfg.r,
                         **_synthesis_args(cfg.theta, cfg.kappa))
    return fam, singular_field(spec), spec


@dataclass
class TermRow:
    t: float
    axis: int
    h: float
    eps: float
    I: float
    II: float
    III: float


@dataclass
class ExperimentReport:
    config: dict
    hypotheses: dict
    gamma_hat: float | None
    theta_hat: float | None
    kappa_hat: float | None
    threshold: float
    fit: ScalingFit
    fit_I: ScalingFit | None
    integrals: list
    verdict: str
    consistent: bool | None
    notes: list = field(default_factory=list)
    annulus: list = field(default_factory=list)
    flux: dict | None = None
    terms: list = field(default_factory=list, repr=False)
    field_data: TimeField | None = field(default=None, repr=False)
    family: SingularSetFamily | None = field(default=None, repr=False)

    @property
    def exponent(self) -> float:
        return self.fit.exponent

    @property
    def alpha_hat(self) -> float:
        return self.fit.exponent - 1

    @property
    def margin(self) -> float:
        return 3 * self.fit.stderr

    @property
    def negative(self) -> bool:
        return self.verdict in ("outside regime", "hypotheses not met") or \
            self.verdict.startswith("inconsistent")

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "verdict": self.verdict,
            "consistent": self.consistent,
            "measured": {"gamma_hat": self.gamma_hat, "theta_hat": self.theta_hat,
                         "kappa_hat": self.kappa_hat, "alpha_hat": self.alpha_hat,
                         "exponent": self.exponent, "margin": self.margin},
            "threshold": self.threshold,
            "fit": self.fit.to_dict(),
            "fit_I": None if self.fit_I is None else self.fit_I.to_dict(),
            "integrals": self.integrals,
            "hypotheses": self.hypotheses,
            "annulus": self.annulus,
            "flux": self.flux,
            "notes": self.notes,
        }


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as e:  # noqa: BLE001 - tagged and re-raised
        raise StageError(name, e) from e


def _verdict(cfg, hyp, gamma_hat, threshold, fit, empty):
    alpha = fit.exponent - 1
    margin = 3 * fit.stderr
    if empty:
        if alpha > margin:
            return "conservative (Lipschitz regime)", True
        return "inconclusive", None
    if not hyp.passed:
        return "hypotheses not met", None
    if gamma_hat < threshold - NEAR_THRESHOLD:
        if alpha > margin:
            return "theorem regime, conservative", True
        return "inconsistent: theorem regime without increment decay", False
    if gamma_hat > threshold + NEAR_THRESHOLD:
        return "outside regime", None
    return "inconclusive (near threshold)", None


def _decompose_rung(v, fam, cfg, h, eps, k, axis):
    g = v.grid
    f = v.slices[k]
    s = fam.at(f.time_index if f.time_index is not None else k)
    return term_decomposition(f, s, g.axis_vector(axis, g.nodes(h)), eps, cfg.eps0)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    fam, v, spec = _stage("synthesis", build, cfg)
    grid = cfg.grid
    hyp = _stage("hypotheses", verify_hypotheses, v, fam, spec, theta=cfg.theta, r=cfg.r)
    empty = all(s.is_empty for s in fam.sets())
    thetas = [x for x in hyp.theta_hat if x is not None]
    theta_hat = min(thetas) if thetas else None
    threshold = _stage("threshold", gamma_threshold, cfg.theta, cfg.r, cfg.kappa, cfg.d)

    ladder = cfg.ladder
    eps = [_stage("epsilon", epsilon_select, h, cfg.theta, cfg.kappa, cfg.eps0) for h in ladder]
    jobs = [(i, k, a) for i in range(ladder.size) for k in range(len(v)) for a in range(cfg.d)]

    def job(x):
        i, k, a = x
        return _decompose_rung(v, fam, cfg, ladder[i], eps[i], k, a)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = _stage("decomposition", lambda: list(ex.map(job, jobs)))
    else:
        parts = _stage("decomposition", lambda: [job(x) for x in jobs])

    times = v.times
    terms = [TermRow(float(times[k]), a, float(ladder[i]), float(eps[i]), *p)
             for (i, k, a), p in zip(jobs, parts)]
    dt = v.dt
    integrals = []
    totals, inner = np.zeros(ladder.size), np.zeros(ladder.size)
    for i, h in enumerate(ladder):
        per_axis = np.zeros((cfg.d, 3))
        for row in terms:
            if row.h == float(h):
                per_axis[row.axis] += np.array([row.I, row.II, row.III]) * dt
        best = int(np.argmax(per_axis.sum(axis=1)))
        totals[i] = per_axis[best].sum()
        inner[i] = per_axis[best, 0]
        integrals.append({"h": float(h), "eps": float(eps[i]), "axis": best,
                          "I": per_axis[best, 0], "II": per_axis[best, 1],
                          "III": per_axis[best, 2], "total": totals[i]})
    fit = _stage("fit", fit_exponent, ladder, totals)
    try:
        fit_I = fit_exponent(ladder, inner)
    except ScalingRangeError:
        fit_I = None

    gamma_hat = hyp.gamma_hat
    verdict, consistent = _verdict(cfg, hyp, gamma_hat, threshold, fit, empty)
    notes = list(hyp.flags)
    sharp = cfg.d - 1 + 3 * cfg.theta
    notes.append(f"a non-conservative field with these exponents needs γ ≥ {threshold:.6g}"
                 f" (sharp value d - 1 + 3θ = {sharp:.6g} when r = ∞ and κ ≤ 1 - θ)")
    if fit.nonlinear:
        notes.append("increment scaling is not a clean power law")
    if gamma_hat is not None and fit_I is not None and cfg.kappa <= 1 - cfg.theta:
        budget = 3 * cfg.theta + (cfg.d - gamma_hat) / r_ratio(cfg.r)
        notes.append(f"inner-term budget {budget:.6g}, measured {fit_I.exponent:.6g}")

    annulus = []
    s0 = fam.sets()[0]
    if not s0.is_empty and s0.kind != "full":
        for h, e in zip(ladder, eps):
            try:
                a = dyadic_annulus_sum(s0, cfg.kappa, cfg.r, e, cfg.eps0)
            except ValueError:
                continue
            annulus.append({"h": float(h), "eps": float(e), **a.to_dict()})

    flux = None
    if cfg.flux:
        flux = _stage("flux", _flux_table, v, fam, eps, grid)

    return ExperimentReport(
        config=cfg.to_dict(), hypotheses=hyp.to_dict(), gamma_hat=gamma_hat,
        theta_hat=theta_hat, kappa_hat=hyp.kappa_hat, threshold=threshold, fit=fit,
        fit_I=fit_I, integrals=integrals, verdict=verdict, consistent=consistent,
        notes=notes, annulus=annulus, flux=flux, terms=terms, field_data=v, family=fam)


def _flux_table(v, fam, eps, grid):
    lad = [e for e in eps if 4 * grid.spacing <= e <= 0.25]
    if len(lad) < 4:
        return {"skipped": "fewer than 4 resolved mollification scales"}
    return flux_scaling(v.slices[0], fam.sets()[0], lad).to_dict()


def write_report(rep: ExperimentReport, out, artifacts: str | None = None) -> Path:
    """Report directory: report.json, terms.csv, flux.csv and field/set artifacts."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "report.json", rep.to_dict())
    io.write_csv(out / "terms.csv", ["t", "axis", "h", "eps", "I", "II", "III"],
                 [[r.t, r.axis, r.h, r.eps, r.I, r.II, r.III] for r in rep.terms])
    rows = []
    if rep.flux and "rows" in rep.flux:
        rows = [[x["delta"], x["eps"], x["inner"], x["outer"], x["total"]]
                for x in rep.flux["rows"]]
    io.write_csv(out / "flux.csv", ["delta", "eps", "inner", "outer", "total"], rows)
    mode = artifacts or rep.config.get("artifacts", "first")
    if mode != "none" and rep.field_data is not None:
        count = 1 if mode == "first" else len(rep.field_data)
        for k in range(count):
            f = rep.field_data.slices[k]
            io.write_field(out / f"field_{k}.fons", f)
            s = rep.family.sets()[k]
            io.write_field(out / f"set_{k}.fons", s.as_field())
    return out


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepReport:
    threshold: float
    rows: list  # dicts: target, gamma_hat, alpha_hat, stderr, verdict
    monotone: bool
    resolved: bool
    crossing: float | None
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {"threshold": self.threshold, "rows": self.rows, "monotone": self.monotone,
                "resolved": self.resolved, "crossing": self.crossing, "flags": self.flags}


def threshold_sweep(base: ExperimentConfig, targets, workers: int = 1) -> SweepReport:
    """Run ``base`` over singular sets of the target dimensions and check that
    the increment exponent falls as the measured dimension rises."""
    targets = [float(t) for t in targets]
    if len(targets) < 3:
        raise ValueError("need ≥ 3 targets")
    rows = []
    threshold = None
    for t in targets:
        cfg = replace(base, gamma_target=t, set=None, field="singular")
        rep = run_experiment(cfg, workers)
        threshold = rep.threshold
        rows.append({"target": t, "gamma_hat": rep.gamma_hat, "alpha_hat": rep.alpha_hat,
                     "stderr": rep.fit.stderr, "verdict": rep.verdict})
    flags = []
    order = sorted(rows, key=lambda x: x["gamma_hat"])
    diffs = [b["alpha_hat"] - a["alpha_hat"] for a, b in zip(order, order[1:])]
    errs = [a["stderr"] + b["stderr"] for a, b in zip(order, order[1:])]
    monotone = all(x < 0 for x in diffs)
    resolved = all(-x > e for x, e in zip(diffs, errs))
    if not monotone:
        flags.append("inconclusive: exponent not decreasing in dimension")
    elif not resolved:
        flags.append("some steps lie within fit error")
    g = [x["gamma_hat"] for x in order]
    if not (min(g) < threshold < max(g)):
        flags.append("targets do not straddle the threshold")
    crossing = None
    for a, b in zip(order, order[1:]):
        if a["alpha_hat"] > 0 >= b["alpha_hat"]:
            w = a["alpha_hat"] / (a["alpha_hat"] - b["alpha_hat"])
            crossing = a["gamma_hat"] + w * (b["gamma_hat"] - a["gamma_hat"])
            break
    if crossing is None:
        flags.append("no sign change of the exponent excess")
    return SweepReport(threshold, rows, monotone, resolved, crossing, flags)


def write_sweep(rep: SweepReport, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "sweep.json", rep.to_dict())
    io.write_csv(out / "sweep.csv", ["target", "gamma_hat", "alpha_hat", "stderr", "verdict"],
                 [[r["target"], r["gamma_hat"], r["alpha_hat"], r["stderr"], r["verdict"]]
                  for r in rep.rows])
    return out
