import dataclasses

import numpy as np
import pytest

from impulsekit.errors import ConfigError, ConvexityError
from impulsekit.designer import (
    HybridImpulse,
    ImpulseDesign,
    build_global_design,
    design_ordinary,
    make_envelope,
    phase_paint_from_states,
)
from impulsekit.geometry import gaussian_packet, make_grid
from impulsekit.schedule import make_schedule
from impulsekit.transportmap import MapSpec, builtin_map

REGION_1D = [(-8.0, 8.0)]


def sample_maps():
    yield builtin_map("translation", dim=1, d=1.2), REGION_1D
    yield builtin_map("scaling", dim=1, c=1.6), REGION_1D
    yield builtin_map("cleave", a=0.5, b=3.0), REGION_1D
    yield builtin_map("tanh_cleave", a=0.5, b=3.0), REGION_1D
    yield (
        builtin_map("linear_matrix", matrix=[[2.0, 1.0], [1.0, 2.0]]),
        [(-4.0, 4.0), (-4.0, 4.0)],
    )


class TestClosedForms:
    """The constructed potential against hand-derived formulas."""

    def test_cleave_potential(self):
        a, b, mass = 0.5, 3.0, 1.3
        sch = make_schedule("sine_sq", T=1.0)
        des = build_global_design(
            builtin_map("cleave", a=a, b=b), sch, REGION_1D, mass=mass
        )
        x = np.linspace(-7, 7, 10001)[:, None]
        xs = x[:, 0]
        for tau in (0.0, 0.23, 0.41, 0.77, 1.0):
            g, gddot = sch.g(tau), sch.gddot(tau)
            c = (1 - g) * a + g * b
            closed = (
                -mass
                * gddot
                * (b - a)
                * np.where(np.abs(xs) <= c, xs**2 / (2 * c), np.abs(xs) - c / 2)
            )
            assert np.max(np.abs(des.potential(x, tau) - closed)) < 1e-10

    def test_linear_matrix_potential(self):
        mass = 1.3
        M = np.array([[2.0, 1.0], [1.0, 2.0]])
        sch = make_schedule("sine_sq", T=1.0)
        des = build_global_design(
            builtin_map("linear_matrix", matrix=M),
            sch,
            [(-4.0, 4.0), (-4.0, 4.0)],
            mass=mass,
        )
        pts = np.random.default_rng(5).uniform(-4, 4, size=(10000, 2))
        for tau in (0.1, 0.41, 0.9):
            g, gddot = sch.g(tau), sch.gddot(tau)
            B = (1 - g) * np.eye(2) + g * M
            A = (M - np.eye(2)) @ np.linalg.inv(B)
            closed = -0.5 * mass * gddot * np.einsum("ni,ij,nj->n", pts, A, pts)
            assert np.max(np.abs(des.potential(pts, tau) - closed)) < 1e-10

    def test_translation_potential(self):
        # linear-in-x potential with a spatially uniform, time-dependent offset
        d, mass = -2.0, 1.3
        sch = make_schedule("sine_sq", T=1.0)
        des = build_global_design(
            builtin_map("translation", dim=1, d=d), sch, REGION_1D, mass=mass
        )
        x = np.linspace(-7, 7, 2001)[:, None]
        xs = x[:, 0]
        for tau in (0.2, 0.5, 0.8):
            g, gddot = sch.g(tau), sch.gddot(tau)
            closed = -mass * gddot * (d * xs - 0.5 * g * d * d)
            assert np.max(np.abs(des.potential(x, tau) - closed)) < 1e-10


class TestStructuralIdentities:
    """Exact properties of the flow, checked on random samples."""

    def test_gradient_of_action_is_momentum(self):
        rng = np.random.default_rng(11)
        sch = make_schedule("quintic", T=1.4)
        h = 1e-6
        for m, region in sample_maps():
            des = build_global_design(m, sch, region, mass=1.3)
            dim = m.dim
            lo = np.array([r[0] for r in region]) * 0.8
            hi = np.array([r[1] for r in region]) * 0.8
            pts = rng.uniform(lo, hi, size=(200, dim))
            for tau in (0.3, 0.9):
                v = des.velocity(pts, tau)
                for a in range(dim):
                    e = np.zeros(dim)
                    e[a] = h
                    gS = (des.action(pts + e, tau) - des.action(pts - e, tau)) / (2 * h)
                    assert np.max(np.abs(gS - 1.3 * v[:, a])) < 2e-6, m.kind

    def test_hamilton_jacobi_residual(self):
        rng = np.random.default_rng(12)
        sch = make_schedule("sine_sq", T=1.0)
        h = 1e-6
        for m, region in sample_maps():
            des = build_global_design(m, sch, region, mass=1.3)
            dim = m.dim
            lo = np.array([r[0] for r in region]) * 0.8
            hi = np.array([r[1] for r in region]) * 0.8
            pts = rng.uniform(lo, hi, size=(200, dim))
            for tau in (0.25, 0.6, 0.85):
                dS = (des.action(pts, tau + h) - des.action(pts, tau - h)) / (2 * h)
                v = des.velocity(pts, tau)
                kinetic = 1.3 * np.sum(v**2, axis=-1) / 2.0
                res = dS + kinetic + des.potential(pts, tau)
                scale = max(1.0, float(np.max(np.abs(des.potential(pts, tau)))))
                assert np.max(np.abs(res)) < 1e-6 * scale, m.kind

    def test_force_is_minus_gradient(self):
        rng = np.random.default_rng(13)
        sch = make_schedule("sine_sq", T=1.0)
        h = 1e-6
        for m, region in sample_maps():
            des = build_global_design(m, sch, region, mass=1.3)
            dim = m.dim
            lo = np.array([r[0] for r in region]) * 0.8
            hi = np.array([r[1] for r in region]) * 0.8
            pts = rng.uniform(lo, hi, size=(200, dim))
            F = des.force(pts, 0.35)
            for a in range(dim):
                e = np.zeros(dim)
                e[a] = h
                gU = (des.potential(pts + e, 0.35) - des.potential(pts - e, 0.35)) / (
                    2 * h
                )
                assert np.max(np.abs(F[:, a] + gU)) < 2e-6, m.kind

    def test_action_vanishes_at_endpoints(self):
        sch = make_schedule("sine_sq", T=1.0)
        for m, region in sample_maps():
            des = build_global_design(m, sch, region, mass=1.0)
            pts = np.random.default_rng(14).uniform(-3, 3, size=(50, m.dim))
            assert np.max(np.abs(des.action(pts, 0.0))) < 1e-12
            assert np.max(np.abs(des.action(pts, 1.0))) < 1e-12

    def test_trajectories_reach_the_map(self):
        sch = make_schedule("quintic", T=1.0)
        for m, region in sample_maps():
            des = build_global_design(m, sch, region, mass=1.0)
            x_i = np.random.default_rng(15).uniform(-3, 3, size=(50, m.dim))
            assert np.allclose(des.lagrangian_position(x_i, 0.0), x_i, atol=1e-12)
            assert np.allclose(
                des.lagrangian_position(x_i, 1.0),
                np.asarray(m.forward(x_i)),
                atol=1e-12,
            )

    def test_impulse_force_balances(self):
        # integral of the drive along each trajectory vanishes for ramps
        # with quiet endpoints, so flown points arrive at rest
        sch = make_schedule("sine_sq", T=1.3)
        m = builtin_map("tanh_cleave", a=0.5, b=3.0)
        des = build_global_design(m, sch, REGION_1D, mass=1.1)
        x_i = np.random.default_rng(16).uniform(-4, 4, size=(20, 1))
        taus = np.linspace(0.0, 1.3, 801)
        samples = np.array(
            [des.force(des.lagrangian_position(x_i, t), t) for t in taus]
        )
        integral = np.trapezoid(samples, taus, axis=0)
        assert np.max(np.abs(integral)) < 1e-8

    def test_newton_matches_closed_form_inverse(self):
        # cleave ships an exact interpolated inverse; stripping it forces
        # the Newton path, which must agree
        m = builtin_map("cleave", a=0.5, b=3.0)
        bare = dataclasses.replace(m, blend_inverse=None)
        sch = make_schedule("sine_sq", T=1.0)
        des = build_global_design(m, sch, REGION_1D)
        des_bare = build_global_design(bare, sch, REGION_1D)
        x = np.linspace(-6, 6, 501)[:, None]
        for tau in (0.2, 0.5, 0.9):
            a = des.lagrangian_start(x, tau)
            b = des_bare.lagrangian_start(x, tau)
            assert np.max(np.abs(a - b)) < 1e-9

    def test_warm_start_accepted(self):
        m = builtin_map("tanh_cleave", a=0.5, b=3.0)
        sch = make_schedule("sine_sq", T=1.0)
        des = build_global_design(m, sch, REGION_1D)
        x = np.linspace(-6, 6, 301)[:, None]
        cold = des.lagrangian_start(x, 0.5)
        warm = des.lagrangian_start(x, 0.5, init=cold)
        assert np.max(np.abs(cold - warm)) < 1e-10


class TestAdmissibility:
    def test_reflection_rejected(self):
        sch = make_schedule("sine_sq", T=1.0)
        with pytest.raises(ConvexityError):
            build_global_design(builtin_map("reflection", dim=1), sch, REGION_1D)

    def test_indefinite_matrix_rejected(self):
        sch = make_schedule("sine_sq", T=1.0)
        m = builtin_map("linear_matrix", matrix=[[2.0, 0.0], [0.0, -1.0]])
        with pytest.raises(ConvexityError):
            build_global_design(m, sch, [(-2.0, 2.0), (-2.0, 2.0)])

    def test_nonmonotone_gradient_fails_certification(self):
        # x + 1.5 sin x folds back near pi; the claimed potential is not
        # convex there and the sampling certificate must catch it
        m = MapSpec(
            dim=1,
            kind="wavy",
            forward=lambda p: p + 1.5 * np.sin(p),
            inverse=lambda p: p,
            jacobian=lambda p: (1.0 + 1.5 * np.cos(p[..., 0]))[..., None, None],
            phi=lambda p: p[..., 0] ** 2 / 2.0 - 1.5 * np.cos(p[..., 0]),
        )
        sch = make_schedule("sine_sq", T=1.0)
        with pytest.raises(ConvexityError) as err:
            build_global_design(m, sch, [(-5.0, 5.0)])
        assert err.value.certificate is not None
        assert not err.value.certificate.holds

    def test_bad_mass(self):
        sch = make_schedule("sine_sq", T=1.0)
        with pytest.raises(ConfigError):
            build_global_design(builtin_map("identity", dim=1), sch, REGION_1D, mass=0.0)


class TestEnvelopes:
    def test_unit_integral(self):
        T = 1.7
        taus = np.linspace(0, T, 20001)
        for kind in ("uniform", "hann"):
            nu = make_envelope(kind, T)
            vals = np.array([nu(t) for t in taus])
            assert np.trapezoid(vals, taus) == pytest.approx(1.0, abs=1e-8)

    def test_hann_quiet_endpoints(self):
        nu = make_envelope("hann", 2.0)
        assert nu(0.0) == pytest.approx(0.0, abs=1e-14)
        assert nu(2.0) == pytest.approx(0.0, abs=1e-14)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            make_envelope("boxcar", 1.0)


class TestWeakImpulses:
    def test_ordinary_phase_budget(self):
        # integrating -u1 over the pulse returns the painted increment
        imp = design_ordinary(lambda p: 0.7 * p[..., 0], T=1.3, envelope="hann")
        x = np.linspace(-2, 2, 11)[:, None]
        taus = np.linspace(0, 1.3, 4001)
        acc = np.trapezoid([-imp.u1(x, t) for t in taus], taus, axis=0)
        assert np.max(np.abs(acc - 0.7 * x[:, 0])) < 1e-8
        assert np.all(imp.u2(x, 0.5) == 0.0)

    def test_hybrid_duration_mismatch(self):
        sch = make_schedule("sine_sq", T=1.0)
        des = build_global_design(builtin_map("scaling", dim=1, c=2.0), sch, REGION_1D)
        imp = design_ordinary(lambda p: p[..., 0], T=2.0)
        with pytest.raises(ConfigError):
            HybridImpulse(design=des, paint=imp.paint)

    def test_hybrid_paints_at_arrival_point(self):
        sch = make_schedule("sine_sq", T=1.0)
        des = build_global_design(builtin_map("scaling", dim=1, c=2.0), sch, REGION_1D)
        imp = design_ordinary(lambda p: p[..., 0] ** 2, T=1.0)
        hyb = HybridImpulse(design=des, paint=imp.paint)
        x = np.linspace(-3, 3, 7)[:, None]
        # at the end of the ramp the flow is the full map, so the paint
        # is evaluated in place
        end = hyb.u1(x, 1.0)
        assert np.allclose(end, -(x[:, 0] ** 2) * 1.0, atol=1e-12)
        # at the start every x still flows to mu(x)
        begin = hyb.u1(x, 0.0)
        assert np.allclose(begin, -((2.0 * x[:, 0]) ** 2) * 1.0, atol=1e-12)

    def test_phase_paint_recovers_difference(self):
        g = make_grid([(-14.0, 14.0)], (1024,))
        base = gaussian_packet(g, sigma=1.5)
        x = g.axis(0)
        theta = 0.6 * x + 0.25 * x**2
        target = base.with_values(base.values * np.exp(1j * theta))
        paint = phase_paint_from_states(base, target, T=1.0)
        mask = base.density().support_mask(relative=1e-8)
        got = paint.delta_s(g.points())[mask]
        diff = got - theta[mask]
        # recovery up to one global constant (a multiple of 2 pi)
        assert np.max(diff) - np.min(diff) < 1e-9
        offset = np.mean(diff) / (2 * np.pi)
        assert abs(offset - round(offset)) < 1e-9

    def test_phase_paint_constant_extension(self):
        g = make_grid([(-14.0, 14.0)], (1024,))
        base = gaussian_packet(g, sigma=1.0)
        target = base.with_values(base.values * np.exp(1j * 0.5 * g.axis(0)))
        paint = phase_paint_from_states(base, target, T=1.0)
        far = np.array([[13.5], [-13.5]])
        edge = np.array([[6.0], [-6.0]])
        fv = paint.delta_s(far)
        assert np.isfinite(fv).all()
        # beyond the support the paint freezes rather than extrapolating
        inner = paint.delta_s(edge * 0.999)
        assert abs(fv[0] - inner[0]) < 0.1 * abs(inner[0] - inner[1])
