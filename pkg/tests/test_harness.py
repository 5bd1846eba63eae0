import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fons import io
from fons.grid import PeriodicGrid, shifted_difference
from fons.harness import (ConfigError, ExperimentConfig, StageError, dyadic_annulus_sum,
                          epsilon_select, gamma_threshold, run_experiment, set_for_dimension,
                          shell_index, term_decomposition, threshold_sweep, write_report)
from fons.scaling import fit_exponent
from fons.sets import (make_cantor, make_empty, make_hyperplane, make_point_cloud,
                       minkowski_dimension, set_from_descriptor)
from fons.synthesis import weierstrass_field


def test_threshold_examples():
    assert gamma_threshold(0.2, math.inf, 0.8, 3) == pytest.approx(2.6)
    assert gamma_threshold(0.2, math.inf, 1.6, 3) == pytest.approx(2.2)
    assert gamma_threshold(0.2, math.inf, 0.8, 2) == pytest.approx(1.6)
    assert gamma_threshold(1 / 3 - 1e-9, 4.0, 0.1, 3) == pytest.approx(3, abs=1e-6)


def test_threshold_empty_regime():
    with pytest.raises(ValueError, match="empty theorem regime"):
        gamma_threshold(0.2, 1.0, 0.5, 3)
    with pytest.raises(ValueError, match="empty theorem regime"):
        gamma_threshold(0.2, math.inf, 2.1, 1)
    with pytest.raises(ValueError, match="empty theorem regime"):
        gamma_threshold(0.4, math.inf, 0.5, 3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.32), st.one_of(st.just(math.inf), st.floats(2.0, 50.0)),
       st.integers(1, 3))
def test_threshold_continuity_and_monotonicity(theta, r, d):
    junction = 1 - theta
    try:
        at = gamma_threshold(theta, r, junction, d)
    except ValueError:
        return
    just_above = gamma_threshold(theta, r, junction * (1 + 1e-13), d)
    assert abs(at - just_above) < 1e-12
    ceiling_frac = [1.05, 1.2, 1.4]
    vals = []
    for f in ceiling_frac:
        try:
            vals.append(gamma_threshold(theta, r, junction * f, d))
        except ValueError:
            break
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    rr = r if math.isinf(r) else max(r, 3)
    try:
        lo = gamma_threshold(theta * 0.9, rr, 0.0, d)
    except ValueError:
        return
    assert gamma_threshold(theta, rr, 0.0, d) > lo


def test_epsilon_select_examples():
    assert epsilon_select(0.01, 0.2, 0.8, 0.25) == pytest.approx(0.02)
    assert epsilon_select(0.01, 0.2, 1.6, 0.25) == pytest.approx(0.2)
    for h in (2.0**-k for k in range(4, 12)):
        assert epsilon_select(h, 0.2, 0.5, 0.25) / h == 2.0
    with pytest.raises(ValueError, match="h too large"):
        epsilon_select(0.1, 0.2, 0.8, 0.125)
    with pytest.raises(ValueError, match="h too large"):
        epsilon_select(0.04, 0.2, 1.6, 0.3)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 0.1), st.floats(0.05, 0.3), st.floats(0.0, 2.0), st.floats(0.05, 0.9))
def test_epsilon_select_compatibility(h, theta, kappa, eps0):
    try:
        eps = epsilon_select(h, theta, kappa, eps0)
    except ValueError:
        return
    assert 2 * h <= eps < eps0


def _field(g, seed=0):
    return weierstrass_field(g, 0.2, 4, seed=seed, components=g.d)


def test_term_decomposition_empty_and_equal_eps():
    g = PeriodicGrid(2, 64)
    f = _field(g)
    whole = float(np.mean(shifted_difference(f, (2, 0)) ** 3))
    I, II, III = term_decomposition(f, make_empty(g), (2, 0), 1 / 16, 1 / 8)
    assert I == 0 and II == 0 and III == pytest.approx(whole, rel=1e-12)
    I, II, III = term_decomposition(f, make_point_cloud(g, 3), (2, 0), 1 / 8, 1 / 8)
    assert II == 0
    with pytest.raises(ValueError):
        term_decomposition(f, make_point_cloud(g), (8, 0), 1 / 16, 1 / 8)


def test_term_decomposition_partition_cantor():
    g = PeriodicGrid(2, 256)
    s = make_cantor(g, 1 / 3, 3)
    f = _field(g, 2)
    for h in [(1, 0), (0, 4), (3, 2)]:
        I, II, III = term_decomposition(f, s, h, 1 / 16, 1 / 8)
        whole = float(np.mean(shifted_difference(f, h) ** 3))
        assert abs(I + II + III - whole) <= 1e-12 * whole


def test_shell_index_exact_at_powers_of_two():
    d = np.array([0.5, 0.25, 0.3, 0.125, 0.13, 1.0])
    np.testing.assert_array_equal(shell_index(d), [2, 3, 2, 4, 3, 1])


def test_annulus_sum_kappa_zero_is_volume():
    g = PeriodicGrid(2, 512)
    s = make_point_cloud(g, 3, seed=1)
    a = dyadic_annulus_sum(s, 0.0, math.inf, 1 / 32, 1 / 8)
    dist = s.distance.values
    vol = np.count_nonzero((dist > 1 / 32) & (dist <= 1 / 8)) / 512**2
    assert a.shell == a.direct == pytest.approx(vol, rel=1e-15)


def test_annulus_sum_bounds_each_other():
    g = PeriodicGrid(2, 512)
    s = make_cantor(g, 1 / 3, 4)
    a = dyadic_annulus_sum(s, 0.8, 4.0, 1 / 64, 1 / 8)
    q = 0.8 * 4 / 3
    assert a.direct <= a.shell <= 2**q * a.direct


def test_annulus_hyperplane_closed_form():
    g = PeriodicGrid(2, 4096)
    eps, eps0 = 1 / 64, 1 / 8
    a = dyadic_annulus_sum(make_hyperplane(g), 0.5, math.inf, eps, eps0)
    assert a.direct == pytest.approx(4 * (math.sqrt(eps0) - math.sqrt(eps)), rel=0.05)


def test_annulus_cantor_slope():
    # the geometric shell sum only settles once eps is far below eps0, and the
    # Cantor volume oscillates log-periodically, hence the fine 1D grid and 0.05 slack
    g = PeriodicGrid(1, 2**20)
    s = make_cantor(g, 1 / 3, 12)
    gam = minkowski_dimension(s).dimension
    eps = 2.0 ** -np.arange(13, 17)
    sums = [dyadic_annulus_sum(s, 0.8, math.inf, e, 1 / 4) for e in eps]
    for a in sums:
        assert a.direct <= a.shell <= 2**0.8 * a.direct
    slope = fit_exponent(eps, [a.shell for a in sums]).exponent
    assert slope >= -max(0.0, 0.8 - (1 - gam)) - 0.05


def test_annulus_unresolved():
    g = PeriodicGrid(1, 64)
    with pytest.raises(ValueError, match="unresolved shells"):
        dyadic_annulus_sum(make_point_cloud(g), 0.5, math.inf, 1 / 64, 1 / 8)


def test_set_for_dimension():
    g = PeriodicGrid(2, 2048)
    assert set_for_dimension(2, 0, 2048)["parameters"]["factors"] == ["point", "point"]
    assert set_for_dimension(2, 1, 2048)["parameters"]["factors"] == ["full", "point"]
    desc = set_for_dimension(2, 1.63, 2048)
    s = set_from_descriptor(g, desc)
    assert s.analytic_dim == pytest.approx(1.63, abs=2e-3)
    with pytest.raises(ConfigError):
        set_for_dimension(2, 2.5, 2048)


def test_config_invariants():
    ok = dict(d=2, n=256, theta=0.2, gamma_target=0.0, eps0=0.25)
    ExperimentConfig(**ok)
    for bad in (dict(theta=0.4), dict(r=1.0), dict(kappa=5.0), dict(eps0=1.5),
                dict(h_ladder=[0.125]), dict(n=100), dict(set={"kind": "empty"}),
                dict(field="gaussian")):
        with pytest.raises(ConfigError):
            ExperimentConfig(**{**ok, **bad})
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({**ok, "colour": 1})


def test_config_json_roundtrip(tmp_path):
    cfg = ExperimentConfig(d=2, n=256, gamma_target=1.0, eps0=0.25)
    p = tmp_path / "c.json"
    p.write_text(io.dumps(cfg.to_dict()))
    back = ExperimentConfig.load(p)
    assert back.to_dict() == cfg.to_dict()
    assert math.isinf(back.r)


def small(**kw):
    base = dict(d=2, n=256, theta=0.2, kappa=0.8, slices=2, eps0=0.25,
                h_ladder=[2.0**-k for k in range(4, 8)])
    return ExperimentConfig(**{**base, **kw})


def test_run_point_cloud_conservative():
    rep = run_experiment(small(set={"kind": "point_cloud", "parameters": {"count": 2}}))
    assert rep.verdict == "theorem regime, conservative"
    assert rep.alpha_hat > 0 and rep.consistent
    for row in rep.terms:
        assert 2 * row.h <= row.eps < 0.25


def test_run_empty_is_lipschitz_regime():
    rep = run_experiment(small(set={"kind": "empty"}))
    assert rep.verdict == "conservative (Lipschitz regime)"
    assert rep.exponent == pytest.approx(3, abs=0.1)
    assert all(r.I == 0 and r.II == 0 for r in rep.terms)


def test_run_weierstrass_fails_hypothesis():
    rep = run_experiment(small(field="weierstrass", n=512, levels=6))
    assert rep.verdict == "hypotheses not met" and rep.negative
    assert rep.exponent == pytest.approx(0.6, abs=0.15)


@pytest.mark.parametrize("d,n,count", [(1, 2**20, 1), (2, 2048, 4)])
def test_run_first_branch_budget(d, n, count):
    # nodes lying on S carry weight n^-(d - gamma) at |dv| ~ |h|^theta, so the
    # continuum budget only shows once |h| n is large against that layer
    rep = run_experiment(small(d=d, n=n, set={"kind": "point_cloud",
                                              "parameters": {"count": count}},
                               h_ladder=[2.0**-k for k in range(4, 9)]))
    budget = 3 * 0.2 + (d - rep.gamma_hat)
    assert rep.fit_I.exponent >= budget - 0.2


def test_stage_errors_are_tagged():
    cfg = small(set={"kind": "point_cloud"}, h_ladder=[2.0**-k for k in range(4, 7)])
    with pytest.raises(StageError, match=r"\[fit\]"):
        run_experiment(cfg)


def test_report_directory(tmp_path):
    rep = run_experiment(small(set={"kind": "hyperplane"}, flux=True))
    write_report(rep, tmp_path)
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["verdict"] == rep.verdict
    assert (tmp_path / "terms.csv").read_text().startswith("t,axis,h,eps,I,II,III")
    assert len((tmp_path / "flux.csv").read_text().splitlines()) >= 5
    assert (tmp_path / "field_0.fons").exists() and (tmp_path / "set_0.fons").exists()


def test_workers_do_not_change_report():
    cfg = small(set={"kind": "point_cloud", "parameters": {"count": 3}})
    a = io.dumps(run_experiment(cfg, workers=1))
    b = io.dumps(run_experiment(cfg, workers=3))
    assert a == b


def test_sweep_requires_three_targets():
    with pytest.raises(ValueError, match="need ≥ 3 targets"):
        threshold_sweep(small(gamma_target=0.0), [0, 1])


def test_sweep_small_monotone():
    cfg = small(n=1024, gamma_target=0.0, h_ladder=[2.0**-k for k in range(4, 8)])
    rep = threshold_sweep(cfg, [0, 1, 1 + math.log(2) / math.log(3)])
    assert rep.monotone
    alphas = [r["alpha_hat"] for r in rep.rows]
    assert alphas[0] > alphas[-1]
