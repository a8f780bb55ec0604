import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impulsekit.errors import (
    ConfigError,
    DegenerateDensityError,
    SupportEscapeError,
)
from impulsekit.geometry import DensityField, gaussian_packet, make_grid
from impulsekit.transportmap import (
    builtin_map,
    certify_gradient_of_convex,
    export_map_table,
    import_map_table,
    monotone_rearrangement_1d,
    pushforward_density,
    tabulated_map_1d,
    wasserstein2_cost,
)


def grid1d(lo=-10.0, hi=10.0, n=1024):
    return make_grid([(lo, hi)], (n,))


def gauss_density(grid, sigma=1.0, center=0.0):
    return gaussian_packet(grid, sigma=sigma, center=center).density()


class TestBuiltinMaps:
    def test_identity(self):
        m = builtin_map("identity", dim=2)
        pts = np.random.default_rng(0).normal(size=(40, 2))
        assert np.allclose(m.forward(pts), pts)
        assert np.allclose(m.inverse(pts), pts)
        J = m.jacobian(pts)
        assert np.allclose(J, np.eye(2))

    def test_translation_roundtrip(self):
        m = builtin_map("translation", dim=2, d=[1.5, -0.25])
        pts = np.random.default_rng(1).normal(size=(40, 2))
        assert np.allclose(m.inverse(m.forward(pts)), pts, atol=1e-13)
        assert np.allclose(m.forward(pts) - pts, [1.5, -0.25])

    def test_scaling(self):
        m = builtin_map("scaling", dim=1, c=2.0)
        x = np.linspace(-3, 3, 11)[:, None]
        assert np.allclose(m.forward(x), 2.0 * x)
        assert np.allclose(m.inverse(m.forward(x)), x, atol=1e-13)

    def test_cleave_branches(self):
        m = builtin_map("cleave", a=0.5, b=3.0)
        # core stretches by b/a, outer branches shift rigidly by b-a
        x = np.array([[0.2], [0.5], [2.0], [-1.0]])
        expect = np.array([[1.2], [3.0], [4.5], [-3.5]])
        assert np.allclose(m.forward(x), expect, atol=1e-13)
        assert np.allclose(m.inverse(expect), x, atol=1e-13)

    def test_cleave_blend_inverse(self):
        # frozen from an independent bracketing root-find on (1-g)x + g mu(x) = y
        m = builtin_map("cleave", a=0.5, b=3.0)
        g = 0.6
        ys = np.array([[1.4], [3.0], [-0.7], [0.2]])
        expect = np.array([[0.35], [1.5], [-0.175], [0.05]])
        assert np.allclose(m.blend_inverse(ys, g), expect, atol=1e-12)

    def test_cleave_blend_inverse_consistency(self):
        m = builtin_map("cleave", a=0.5, b=3.0)
        ys = np.linspace(-6, 6, 101)[:, None]
        for g in (0.0, 0.3, 0.8, 1.0):
            x = m.blend_inverse(ys, g)
            back = (1 - g) * x + g * m.forward(x)
            assert np.allclose(back, ys, atol=1e-11)

    def test_tanh_cleave_inverse(self):
        m = builtin_map("tanh_cleave", a=0.5, b=3.0)
        x = np.linspace(-8, 8, 161)[:, None]
        y = m.forward(x)
        assert np.allclose(m.inverse(y), x, atol=1e-10)

    def test_tanh_cleave_jacobian_matches_fd(self):
        m = builtin_map("tanh_cleave", a=0.5, b=3.0)
        x = np.linspace(-4, 4, 41)[:, None]
        h = 1e-6
        fd = (m.forward(x + h) - m.forward(x - h)) / (2 * h)
        J = m.jacobian(x)[..., 0, 0]
        assert np.allclose(J, fd[:, 0], atol=1e-8)

    def test_reflection(self):
        m = builtin_map("reflection", dim=1)
        x = np.linspace(-2, 2, 9)[:, None]
        assert np.allclose(m.forward(x), -x)
        assert m.phi is None

    def test_linear_matrix(self):
        M = np.array([[2.0, 1.0], [1.0, 2.0]])
        m = builtin_map("linear_matrix", matrix=M)
        pts = np.random.default_rng(2).normal(size=(30, 2))
        assert np.allclose(m.forward(pts), pts @ M.T, atol=1e-13)
        assert np.allclose(m.inverse(m.forward(pts)), pts, atol=1e-12)
        assert m.phi is not None

    def test_linear_matrix_asymmetric_has_no_potential(self):
        M = np.array([[2.0, 0.5], [0.0, 1.0]])
        m = builtin_map("linear_matrix", matrix=M)
        assert m.phi is None

    def test_linear_matrix_singular_rejected(self):
        with pytest.raises(ConfigError):
            builtin_map("linear_matrix", matrix=[[1.0, 1.0], [1.0, 1.0]])

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            builtin_map("wormhole")

    def test_cleave_bad_params(self):
        with pytest.raises(ConfigError):
            builtin_map("cleave", a=2.0, b=1.0)


class TestConvexityCertificate:
    def test_gradient_maps_pass(self):
        region = [(-5.0, 5.0)]
        for kind, params in (
            ("identity", {}),
            ("scaling", {"c": 1.7}),
            ("translation", {"d": 0.8}),
            ("cleave", {"a": 0.5, "b": 3.0}),
            ("tanh_cleave", {"a": 0.5, "b": 3.0}),
        ):
            m = builtin_map(kind, dim=1, **params)
            cert = certify_gradient_of_convex(m, region)
            assert cert.holds, kind
            assert cert.min_eigenvalue > 0

    def test_reflection_fails(self):
        m = builtin_map("reflection", dim=1)
        cert = certify_gradient_of_convex(m, [(-3.0, 3.0)])
        assert not cert.holds
        assert cert.witness_kind == "nonpositive"
        assert cert.min_eigenvalue == pytest.approx(-1.0, abs=1e-9)

    def test_asymmetric_matrix_fails(self):
        m = builtin_map("linear_matrix", matrix=[[2.0, 0.6], [0.0, 1.0]])
        cert = certify_gradient_of_convex(m, [(-2.0, 2.0), (-2.0, 2.0)])
        assert not cert.holds
        assert cert.witness_kind == "asymmetric"

    def test_spd_matrix_passes_2d(self):
        m = builtin_map("linear_matrix", matrix=[[2.0, 1.0], [1.0, 2.0]])
        cert = certify_gradient_of_convex(m, [(-2.0, 2.0), (-2.0, 2.0)])
        assert cert.holds


class TestPushforward:
    def test_scaling_gaussian_closed_form(self):
        g = grid1d(lo=-16.0, hi=16.0, n=2048)
        rho = gauss_density(g, sigma=1.0)
        m = builtin_map("scaling", dim=1, c=2.0)
        out = pushforward_density(rho, m)
        x = g.axis(0)
        sig = 2.0
        expect = np.exp(-(x**2) / (2 * sig**2)) / np.sqrt(2 * np.pi * sig**2)
        assert np.max(np.abs(out.values - expect)) < 1e-8

    def test_translation_gaussian(self):
        g = grid1d(lo=-16.0, hi=16.0, n=2048)
        rho = gauss_density(g, sigma=1.2)
        m = builtin_map("translation", dim=1, d=2.0)
        out = pushforward_density(rho, m)
        x = g.axis(0)
        expect = np.exp(-((x - 2.0) ** 2) / (2 * 1.2**2)) / np.sqrt(2 * np.pi * 1.2**2)
        assert np.max(np.abs(out.values - expect)) < 1e-8

    def test_mass_guard_fires_when_support_leaves(self):
        g = grid1d(lo=-10.0, hi=10.0, n=1024)
        rho = gauss_density(g, sigma=1.0)
        m = builtin_map("translation", dim=1, d=15.0)
        with pytest.raises(SupportEscapeError):
            pushforward_density(rho, m)

    def test_2d_linear_matrix(self):
        g = make_grid([(-12, 12), (-12, 12)], (256, 256))
        rho = gauss_density(g, sigma=1.0)
        M = np.array([[2.0, 0.0], [0.0, 1.0]])
        out = pushforward_density(rho, builtin_map("linear_matrix", matrix=M))
        xs = g.points()
        cov = np.diag([4.0, 1.0])
        quad = xs[..., 0] ** 2 / 4.0 + xs[..., 1] ** 2
        expect = np.exp(-quad / 2.0) / (2 * np.pi * np.sqrt(np.linalg.det(cov)))
        assert np.max(np.abs(out.values - expect)) < 1e-7


class TestMonotoneRearrangement:
    def test_gaussian_widening_recovers_scaling(self):
        g = grid1d(lo=-16.0, hi=16.0, n=1024)
        rho_i = gauss_density(g, sigma=1.0)
        rho_f = gauss_density(g, sigma=2.0)
        m = monotone_rearrangement_1d(rho_i, rho_f)
        xa, xb = m.params["trusted"]
        x = np.linspace(max(xa, -5.0), min(xb, 5.0), 401)[:, None]
        assert np.max(np.abs(m.forward(x) - 2.0 * x)) < 1e-8

    def test_shifted_gaussians_recover_translation(self):
        g = grid1d(lo=-16.0, hi=16.0, n=1024)
        rho_i = gauss_density(g, sigma=1.0, center=1.0)
        rho_f = gauss_density(g, sigma=1.0, center=-1.0)
        m = monotone_rearrangement_1d(rho_i, rho_f)
        x = np.linspace(-4.0, 5.5, 301)[:, None]
        assert np.max(np.abs(m.forward(x) - (x - 2.0))) < 1e-8

    def test_rearranged_density_matches_target(self):
        g = grid1d(lo=-16.0, hi=16.0, n=1024)
        rho_i = gauss_density(g, sigma=0.8, center=0.5)
        rho_f = gauss_density(g, sigma=1.4, center=-0.3)
        m = monotone_rearrangement_1d(rho_i, rho_f)
        out = pushforward_density(rho_i, m)
        assert np.max(np.abs(out.values - rho_f.values)) < 1e-6

    def test_monotone_is_cheapest(self):
        # quadratic-cost optimality: the increasing rearrangement beats
        # any other admissible transport, here the reflection
        g = grid1d(lo=-16.0, hi=16.0, n=1024)
        rho_i = gauss_density(g, sigma=1.0, center=1.0)
        rho_f = gauss_density(g, sigma=1.0, center=-1.0)
        mono = monotone_rearrangement_1d(rho_i, rho_f)
        refl = builtin_map("reflection", dim=1)
        c_mono = wasserstein2_cost(rho_i, mono)
        c_refl = wasserstein2_cost(rho_i, refl)
        # frozen oracle values: 4 and 8
        assert c_mono == pytest.approx(4.0, abs=1e-6)
        assert c_refl == pytest.approx(8.0, abs=1e-6)
        assert c_mono < c_refl

    def test_interior_zero_rejected(self):
        g = grid1d(lo=-10.0, hi=10.0, n=1024)
        x = g.axis(0)
        bumps = np.exp(-((x - 4) ** 2) * 4) + np.exp(-((x + 4) ** 2) * 4)
        bumps[np.abs(x) < 2.0] = 0.0
        rho = DensityField(g, bumps / (np.sum(bumps) * g.cell_volume))
        target = gauss_density(g, sigma=1.0)
        with pytest.raises(DegenerateDensityError):
            monotone_rearrangement_1d(rho, target)

    @settings(max_examples=20, deadline=None)
    @given(
        s1=st.floats(0.7, 1.6),
        s2=st.floats(0.7, 1.6),
        c2=st.floats(-1.5, 1.5),
    )
    def test_map_is_monotone(self, s1, s2, c2):
        g = grid1d(lo=-16.0, hi=16.0, n=512)
        rho_i = gauss_density(g, sigma=s1)
        rho_f = gauss_density(g, sigma=s2, center=c2)
        m = monotone_rearrangement_1d(rho_i, rho_f, refine=2)
        x = np.linspace(-15.0, 15.0, 301)[:, None]
        y = m.forward(x)[:, 0]
        assert np.all(np.diff(y) > -1e-10)


class TestTabulatedMaps:
    def test_tabulated_matches_nodes(self):
        x = np.linspace(-5, 5, 201)
        y = x + 0.5 * np.tanh(x)
        m = tabulated_map_1d(x, y, kind="custom")
        probe = np.linspace(-4.5, 4.5, 97)[:, None]
        expect = probe + 0.5 * np.tanh(probe)
        # shape-preserving cubics without slope data are third order
        assert np.max(np.abs(m.forward(probe) - expect)) < 1e-5
        assert np.max(np.abs(m.inverse(m.forward(probe)) - probe)) < 1e-5

    def test_tabulated_affine_tails(self):
        x = np.linspace(-2, 2, 101)
        m = tabulated_map_1d(x, 3.0 * x, kind="custom")
        far = np.array([[6.0], [-7.0]])
        assert np.allclose(m.forward(far), 3.0 * far, atol=1e-9)

    def test_flat_table_rejected(self):
        x = np.linspace(-2, 2, 51)
        with pytest.raises(DegenerateDensityError):
            tabulated_map_1d(x, np.zeros_like(x), kind="custom")

    def test_table_roundtrip_1d(self, tmp_path):
        m = builtin_map("tanh_cleave", a=0.5, b=3.0)
        pts = np.linspace(-9, 9, 721)
        path = tmp_path / "map.csv"
        export_map_table(m, pts, path)
        back = import_map_table(path, dim=1)
        probe = np.linspace(-8, 8, 111)[:, None]
        assert np.max(np.abs(back.forward(probe) - m.forward(probe))) < 2e-5

    def test_table_roundtrip_2d(self, tmp_path):
        M = np.array([[2.0, 1.0], [1.0, 2.0]])
        m = builtin_map("linear_matrix", matrix=M)
        ax = np.linspace(-4, 4, 33)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        path = tmp_path / "map2.csv"
        export_map_table(m, pts, path)
        back = import_map_table(path, dim=2)
        probe = np.random.default_rng(3).uniform(-3, 3, size=(50, 2))
        assert np.max(np.abs(back.forward(probe) - m.forward(probe))) < 1e-6
        assert np.max(np.abs(back.inverse(m.forward(probe)) - probe)) < 1e-6
