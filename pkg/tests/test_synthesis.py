import numpy as np
import pytest

from fons.grid import PeriodicGrid, gradient
from fons.sets import (SingularSetFamily, make_cantor, make_empty, make_full,
                       make_hyperplane, make_point_cloud)
from fons.synthesis import (SynthesisSpec, holder_exponent, kappa_ceiling, leray_project,
                            resolved_radius, singular_field, singular_profile,
                            smooth_field, verify_hypotheses, weierstrass_field)


def family(s, m=2):
    return SingularSetFamily.constant(s, m)


def test_kappa_relation():
    g = PeriodicGrid(1, 64)
    fam = family(make_point_cloud(g))
    assert SynthesisSpec(0.2, fam).kappa == pytest.approx(0.8)
    sp = SynthesisSpec(0.2, fam, alpha=1.0)
    assert sp.kappa == pytest.approx(1.6) and sp.beta == pytest.approx(0.4)
    assert SynthesisSpec(0.2, fam, kappa_override=0.5).beta == pytest.approx(0.5)


def test_spec_validation():
    g = PeriodicGrid(1, 64)
    fam = family(make_point_cloud(g))
    with pytest.raises(ValueError):
        SynthesisSpec(0.4, fam)
    with pytest.raises(ValueError):
        SynthesisSpec(0.2, fam, amplitudes=[1.0])
    # d=1, r=inf: ceiling 0.8/0.4 = 2, so kappa = 2.4 is out of range
    assert kappa_ceiling(0.2, np.inf, 1) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        SynthesisSpec(0.2, fam, alpha=2.0)


def test_singular_profile_in_l3():
    a = singular_profile(64)
    assert np.all(np.isfinite(a)) and a[0] > a[-1]
    # midpoint sums of t^(-3/4) approach int_0^1 = 4 with error ~ M^(-1/4)
    gaps = [4 - np.mean(singular_profile(m) ** 3) for m in (64, 1024)]
    assert gaps[0] > 0 and gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.01)


def test_singular_field_profile_exact():
    g = PeriodicGrid(1, 4096)
    s = make_point_cloud(g, 1, seed=0)
    v = singular_field(SynthesisSpec(0.25, family(s, 1), seed=3))
    f = v.slices[0]
    dist = s.distance.values
    mag = f.magnitude()
    # |v| = dist^theta |sin(phase)| with |e| = 1
    ratio = mag[dist > 0] / dist[dist > 0] ** 0.25
    assert np.ptp(ratio) < 1e-12
    assert np.sqrt(2) / 2 - 1e-12 <= ratio[0] <= 1 + 1e-12
    assert np.all(mag[dist == 0] == 0)


def test_singular_field_deterministic():
    g = PeriodicGrid(2, 64)
    fam = family(make_point_cloud(g, 2, seed=1), 3)
    a = singular_field(SynthesisSpec(0.2, fam, seed=5))
    b = singular_field(SynthesisSpec(0.2, fam, seed=5))
    for x, y in zip(a, b):
        assert np.array_equal(x.samples, y.samples)


def test_empty_slices_are_lipschitz_one():
    g = PeriodicGrid(2, 128)
    v = singular_field(SynthesisSpec(0.2, family(make_empty(g)), amplitudes=[2.0, 0.5]))
    for f, amp in zip(v, [2.0, 0.5]):
        assert gradient(f).magnitude().max() == pytest.approx(amp, rel=1e-12)


def test_holder_exponent_recovers_theta():
    g = PeriodicGrid(1, 2**16)
    f = weierstrass_field(g, 0.25, 12, seed=0)
    fit = holder_exponent(f, 2.0 ** -np.arange(3, 13), p=2)
    assert fit.exponent == pytest.approx(0.25, abs=0.03)
    g2 = PeriodicGrid(1, 4096)
    s = make_point_cloud(g2)
    v = singular_field(SynthesisSpec(0.2, family(s, 1)))
    assert holder_exponent(v.slices[0]).exponent == pytest.approx(0.2, abs=0.03)


def test_blowup_rate_point_2d():
    g = PeriodicGrid(2, 1024)
    s = make_point_cloud(g, 1, seed=0)
    spec = SynthesisSpec(0.2, family(s, 1))
    rep = verify_hypotheses(singular_field(spec), spec.family, spec)
    assert rep.kappa_hat == pytest.approx(0.8, abs=0.1)
    assert rep.gamma_hat == pytest.approx(0, abs=0.1)
    assert rep.passed and rep.gradient_constant < 10


def test_blowup_rate_oscillating():
    g = PeriodicGrid(1, 2**16)
    s = make_point_cloud(g, 1, seed=0)
    spec = SynthesisSpec(0.2, family(s, 1), alpha=1.0)
    rep = verify_hypotheses(singular_field(spec), spec.family, spec)
    assert rep.kappa_hat == pytest.approx(1.6, abs=0.15)


def test_resolved_radius():
    assert resolved_radius(1024, 0.0) == 0.0
    r = resolved_radius(1024, 1.0)
    # phase dist^-1 advances by 0.25 per node at r
    assert (1 / r) ** 2 / 1024 == pytest.approx(0.25)


def test_space_filling_flag():
    g = PeriodicGrid(2, 256)
    f = weierstrass_field(g, 0.2, 5, components=2)
    from fons.grid import TimeField
    rep = verify_hypotheses(TimeField([f]), family(make_full(g), 1), theta=0.2, r=np.inf)
    assert "space filling" in rep.flags and not rep.passed


def test_empty_flag_and_kappa_zero():
    g = PeriodicGrid(2, 128)
    spec = SynthesisSpec(0.2, family(make_empty(g)))
    rep = verify_hypotheses(singular_field(spec), spec.family, spec)
    assert rep.gamma_hat is None and rep.kappa_hat == 0.0
    assert any("empty" in x for x in rep.flags)


def test_hyperplane_blowup_and_dimension():
    g = PeriodicGrid(2, 1024)
    spec = SynthesisSpec(0.2, family(make_hyperplane(g), 1))
    rep = verify_hypotheses(singular_field(spec), spec.family, spec)
    assert rep.gamma_hat == pytest.approx(1, abs=0.05)
    assert rep.kappa_hat == pytest.approx(0.8, abs=0.1)


def test_smooth_field_band_and_lipschitz():
    g = PeriodicGrid(2, 64)
    f = smooth_field(g, modes=3, seed=2, components=2)
    spec = np.abs(np.fft.fftn(f.samples[0]))
    k = np.fft.fftfreq(64, 1 / 64)
    outside = np.max(np.abs(np.meshgrid(k, k, indexing="ij")), axis=0) > 3
    assert spec[outside].max() < 1e-9
    h = smooth_field(g, seed=2, lipschitz=0.5)
    assert gradient(h).magnitude().max() == pytest.approx(0.5)


def test_solenoidal_projection():
    g = PeriodicGrid(2, 64)
    f = smooth_field(g, modes=3, seed=4, components=2, solenoidal=True)
    k = 2j * np.pi * np.fft.fftfreq(64, 1 / 64)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    div = kx * np.fft.fftn(f.samples[0]) + ky * np.fft.fftn(f.samples[1])
    assert np.abs(div).max() < 1e-9
    u = f.samples
    assert np.allclose(leray_project(u), u, atol=1e-12)


def test_cantor_family_hypotheses():
    g = PeriodicGrid(2, 1024)
    spec = SynthesisSpec(0.2, family(make_cantor(g, 1 / 3, 5), 2))
    rep = verify_hypotheses(singular_field(spec), spec.family, spec)
    assert rep.gamma_hat == pytest.approx(1.63, abs=0.07)
    assert rep.kappa_hat == pytest.approx(0.8, abs=0.1)
