"""Release gate: the eleven shipping criteria, one test per criterion.

Each test prints a ``[criterion N]`` line with the measured numbers, so a
verbose run doubles as the sign-off sheet.  Scenario runs are cached at
module scope because several criteria read the same run.

Criterion 4 is expected to fail on its slope clause: the fidelity deficit
is stationary at the predicted state, so smooth maps converge at slope
close to 2 and the kinked cleave flow near 0.5, while the stated band is
[0.8, 1.5].  The clause is asserted as written rather than widened; see
the failure message for the measured slopes.
"""

import time

import numpy as np

from impulsekit import (
    build_global_design,
    builtin_map,
    default_config,
    make_schedule,
    phase_space_map,
    run_scenario,
)

_RUNS = {}


def _scenario(name):
    """Run a catalog scenario once at its default config and cache it."""
    if name not in _RUNS:
        t0 = time.perf_counter()
        res = run_scenario(default_config(name))
        _RUNS[name] = (res, time.perf_counter() - t0)
    return _RUNS[name]


def _value(res, key):
    return res.summary["checks"][key]["value"]


def _line(num, ok, detail):
    print(f"[criterion {num}] {'pass' if ok else 'FAIL'}: {detail}")


def _gate(num, failures, detail):
    _line(num, not failures, detail)
    assert not failures, "; ".join(failures)


class TestAcceptance:
    def test_criterion_01_toy_impulses(self):
        ordinary, t_ord = _scenario("toy_ordinary")
        superimp, t_sup = _scenario("toy_super")
        dx = _value(superimp, "classical_shift")
        dp = _value(superimp, "classical_rest")
        dxq = _value(superimp, "quantum_shift")
        dpq = _value(ordinary, "momentum_shift")
        failures = []
        if abs(dx - 0.25) > 1e-6:
            failures.append(f"classical shift {dx} vs 0.25")
        if abs(dp) > 1e-6:
            failures.append(f"classical rest momentum {dp}")
        if abs(dxq - 0.25) > 0.01 * 0.25:
            failures.append(f"quantum shift {dxq} vs 0.25")
        if abs(dpq - 1.0) > 0.01:
            failures.append(f"ordinary momentum kick {dpq} vs 1.0")
        if max(t_ord, t_sup) > 60.0:
            failures.append(f"runtime {t_ord:.1f}/{t_sup:.1f}s over 60s")
        _gate(
            1,
            failures,
            f"dx={dx:.9f} dp={dp:.2e} <x>={dxq:.6f} <p>={dpq:.6f} "
            f"({t_ord:.1f}s + {t_sup:.1f}s)",
        )

    def test_criterion_02_designer_closed_forms(self):
        t0 = time.perf_counter()
        a, b = 0.5, 3.0
        sch = make_schedule("sine_sq", T=1.0)
        des = build_global_design(
            builtin_map("cleave", a=a, b=b), sch, [(-12.0, 12.0)]
        )
        x = np.linspace(-7.0, 7.0, 10000)[:, None]
        xs = x[:, 0]
        worst_cleave = 0.0
        for tau in (0.13, 0.37, 0.5, 0.71, 0.94):
            g, gddot = sch.g(tau), sch.gddot(tau)
            c = (1 - g) * a + g * b
            closed = (
                -gddot
                * (b - a)
                * np.where(np.abs(xs) <= c, xs**2 / (2 * c), np.abs(xs) - c / 2)
            )
            worst_cleave = max(
                worst_cleave, float(np.max(np.abs(des.u2(x, tau) - closed)))
            )

        worst_linear = 0.0
        for M in (np.diag([1.25, 0.8]), np.array([[2.0, 1.0], [1.0, 2.0]])):
            des2 = build_global_design(
                builtin_map("linear_matrix", matrix=M), sch, [(-4.0, 4.0)] * 2
            )
            pts = np.random.default_rng(2).uniform(-4, 4, size=(10000, 2))
            for tau in (0.13, 0.5, 0.94):
                g, gddot = sch.g(tau), sch.gddot(tau)
                B = (1 - g) * np.eye(2) + g * M
                A = (M - np.eye(2)) @ np.linalg.inv(B)
                closed = -0.5 * gddot * np.einsum("ni,ij,nj->n", pts, A, pts)
                worst_linear = max(
                    worst_linear, float(np.max(np.abs(des2.u2(pts, tau) - closed)))
                )
        wall = time.perf_counter() - t0
        failures = []
        if worst_cleave > 1e-10:
            failures.append(f"cleave form error {worst_cleave:.2e}")
        if worst_linear > 1e-10:
            failures.append(f"linear form error {worst_linear:.2e}")
        if wall > 10.0:
            failures.append(f"runtime {wall:.1f}s over 10s")
        _gate(
            2,
            failures,
            f"cleave err={worst_cleave:.2e} linear err={worst_linear:.2e} "
            f"({wall:.1f}s)",
        )

    def test_criterion_03_structural_identities(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(3)
        rot = np.array([[5.0, -1.0], [-1.0, 3.0]]) / np.sqrt(14.0)
        cases = [
            ("cleave", builtin_map("cleave", a=0.5, b=3.0), "sine_sq", 1.0, 6.0),
            ("tanh", builtin_map("tanh_cleave", a=0.5, b=3.0), "sine_sq", 1.0, 6.0),
            (
                "stretch",
                builtin_map("linear_matrix", matrix=np.diag([1.25, 0.8])),
                "quintic",
                4.0,
                3.0,
            ),
            ("rotation", builtin_map("linear_matrix", matrix=rot), "quintic", 4.0, 3.0),
        ]
        failures = []
        h = 1e-6
        for name, m, kind, T, halfwidth in cases:
            sch = make_schedule(kind, T=T)
            des = build_global_design(m, sch, [(-2 * halfwidth, 2 * halfwidth)] * m.dim)
            pts = rng.uniform(-halfwidth, halfwidth, size=(1000, m.dim))

            # flow endpoints pin the map
            end_err = max(
                float(np.max(np.abs(des.lagrangian_position(pts, 0.0) - pts))),
                float(
                    np.max(
                        np.abs(
                            des.lagrangian_position(pts, T)
                            - np.asarray(m.forward(pts))
                        )
                    )
                ),
            )
            if end_err > 1e-10:
                failures.append(f"{name}: endpoint {end_err:.2e}")

            # accumulated impulse along each trajectory cancels
            taus = np.linspace(0.0, T, 201)
            acc = np.array(
                [des.force(des.lagrangian_position(pts, t), t) for t in taus]
            )
            balance = float(np.max(np.abs(np.trapezoid(acc, taus, axis=0))))
            if balance > 1e-8:
                failures.append(f"{name}: balance {balance:.2e}")

            for tau in (0.3 * T, 0.7 * T):
                fields = des.evaluate_fields(pts, tau)
                disp = fields.final - fields.start
                v = fields.velocity
                grad_w = np.empty_like(pts)
                grad_s = np.empty_like(pts)
                for axis in range(m.dim):
                    e = np.zeros(m.dim)
                    e[axis] = h
                    grad_w[:, axis] = (
                        des.displacement_potential(pts + e, tau)
                        - des.displacement_potential(pts - e, tau)
                    ) / (2 * h)
                    grad_s[:, axis] = (
                        des.action(pts + e, tau) - des.action(pts - e, tau)
                    ) / (2 * h)
                scale = max(1.0, float(np.max(np.abs(disp))))
                gw_err = float(np.max(np.abs(grad_w - disp))) / scale
                gs_err = float(np.max(np.abs(grad_s - v))) / max(
                    1.0, float(np.max(np.abs(v)))
                )
                if gw_err > 2e-6:
                    failures.append(f"{name}: grad potential {gw_err:.2e}")
                if gs_err > 2e-6:
                    failures.append(f"{name}: grad action {gs_err:.2e}")

                ds_dt = (des.action(pts, tau + h) - des.action(pts, tau - h)) / (
                    2 * h
                )
                kinetic = 0.5 * np.sum(v**2, axis=-1)
                u2 = fields.potential
                res = np.abs(ds_dt + kinetic + u2)
                local = np.maximum(1.0, np.abs(u2) + np.abs(fields.action) / T)
                hj = float(np.max(res / local))
                if hj > 1e-6:
                    failures.append(f"{name}: hj residual {hj:.2e}")

            action_end = max(
                float(np.max(np.abs(des.action(pts, 0.0)))),
                float(np.max(np.abs(des.action(pts, T)))),
            )
            if action_end > 1e-10:
                failures.append(f"{name}: endpoint action {action_end:.2e}")
        wall = time.perf_counter() - t0
        if wall > 60.0:
            failures.append(f"runtime {wall:.1f}s over 60s")
        _gate(3, failures, f"4 designs x 1000 samples clean ({wall:.1f}s)")

    def test_criterion_04_epsilon_convergence(self):
        results = {}
        wall = 0.0
        for name in ("cleave", "tanh_cleave", "linear_stretch", "reflect_local"):
            res, t = _scenario(name)
            results[name] = res
            wall += t
        failures = []
        slopes = {}
        for name, res in results.items():
            table = res.tables[0]
            infids = [r.infidelity for r in table.rows]
            slopes[name] = table.fitted_slope
            if tuple(res.summary["config"]["eps_ladder"]) != (0.2, 0.1, 0.05, 0.025):
                failures.append(f"{name}: wrong ladder")
            if not all(a > b for a, b in zip(infids, infids[1:])):
                failures.append(f"{name}: not monotone {infids}")
            if not 0.8 <= table.fitted_slope <= 1.5:
                failures.append(
                    f"{name}: slope {table.fitted_slope:.3f} outside [0.8, 1.5]"
                )
            if infids[-1] > 1e-2:
                failures.append(f"{name}: deficit {infids[-1]:.2e} at eps=0.025")
        if wall > 600.0:
            failures.append(f"runtime {wall:.0f}s over 600s")
        detail = " ".join(f"{k}={v:.3f}" for k, v in slopes.items())
        _gate(4, failures, f"slopes {detail} ({wall:.0f}s)")

    def test_criterion_05_exact_reflection(self):
        res, wall = _scenario("harmonic_reflect")
        infids = [r.infidelity for r in res.tables[0].rows]
        worst = max(infids)
        failures = []
        if worst > 1e-6:
            failures.append(f"worst deficit {worst:.2e} over 1e-6")
        if wall > 60.0:
            failures.append(f"runtime {wall:.1f}s over 60s")
        _gate(5, failures, f"worst 1-F={worst:.2e} across ladder ({wall:.1f}s)")

    def test_criterion_06_local_design(self):
        res, wall = _scenario("reflect_local")
        rearr = _value(res, "rearrangement_shift")
        u2 = _value(res, "u2_linear_form")
        fid = _value(res, "painted_fidelity")
        failures = []
        if rearr > 1e-8:
            failures.append(f"rearrangement error {rearr:.2e}")
        if u2 > 1e-8:
            failures.append(f"quadratic-ramp form error {u2:.2e}")
        if fid < 0.99:
            failures.append(f"painted fidelity {fid:.5f} under 0.99")
        if wall > 120.0:
            failures.append(f"runtime {wall:.1f}s over 120s")
        _gate(
            6,
            failures,
            f"rearr={rearr:.2e} u2={u2:.2e} painted F={fid:.5f} ({wall:.1f}s)",
        )

    def test_criterion_07_rotation(self):
        res, wall = _scenario("rotation_local")
        target = np.array([[2.0, 1.0], [1.0, 2.0]])
        fitted = np.array(res.summary["metrics"]["covariance_inverse"])
        e_err = float(np.max(np.abs(fitted - target)))
        fid = _value(res, "deformation_fidelity")
        failures = []
        if e_err > 1e-3:
            failures.append(f"covariance inverse off by {e_err:.2e}")
        if fid < 0.99:
            failures.append(f"fidelity {fid:.5f} under 0.99")
        if res.summary["config"]["npoints"] is None or len(
            res.summary["config"]["npoints"]
        ) != 2:
            failures.append("not a planar run")
        if wall > 300.0:
            failures.append(f"runtime {wall:.0f}s over 300s")
        _gate(7, failures, f"E err={e_err:.2e} F={fid:.5f} ({wall:.0f}s)")

    def test_criterion_08_classical_correspondence(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(8)
        cases = [
            (
                "cleave",
                builtin_map("cleave", a=0.5, b=3.0),
                make_schedule("sine_sq", T=1.0),
                6.0,
            ),
            (
                "linear",
                builtin_map("linear_matrix", matrix=np.diag([1.25, 0.8])),
                make_schedule("quintic", T=4.0),
                3.0,
            ),
        ]
        failures = []
        stats = []
        for name, m, sch, halfwidth in cases:
            des = build_global_design(m, sch, [(-2 * halfwidth, 2 * halfwidth)] * m.dim)
            pts = rng.uniform(-halfwidth, halfwidth, size=(100, m.dim))
            eye = np.eye(m.dim)
            jtl = det = landing = 0.0
            # fixed step count: the adaptive refinement is overkill for a
            # 1e-6 landing gate and would blow the runtime budget
            for x_i in pts:
                rep = phase_space_map(x_i, np.zeros_like(x_i), des, nsteps=4096)
                jtl = max(jtl, float(np.abs(rep.J.T @ rep.L - eye).max()))
                det = max(
                    det,
                    abs(float(np.linalg.det(rep.J) * np.linalg.det(rep.L)) - 1.0),
                )
                target = np.asarray(m.forward(x_i[None, :]), dtype=float)[0]
                landing = max(landing, float(np.abs(rep.x_f - target).max()))
            stats.append(f"{name}: JtL={jtl:.1e} det={det:.1e} land={landing:.1e}")
            if jtl > 1e-5:
                failures.append(f"{name}: JtL pairing {jtl:.2e}")
            if det > 1e-5:
                failures.append(f"{name}: volume product {det:.2e}")
            if landing > 1e-6:
                failures.append(f"{name}: landing {landing:.2e}")
        wall = time.perf_counter() - t0
        if wall > 120.0:
            failures.append(f"runtime {wall:.0f}s over 120s")
        _gate(8, failures, "; ".join(stats) + f" ({wall:.0f}s)")

    def test_criterion_09_hybrid(self):
        res, wall = _scenario("hybrid_demo")
        fid = _value(res, "hybrid_fidelity")
        agree = _value(res, "two_step_agreement")
        failures = []
        if fid < 0.99:
            failures.append(f"fidelity to prediction {fid:.5f} under 0.99")
        if agree < 0.999:
            failures.append(f"two-step agreement {agree:.5f} under 0.999")
        if wall > 120.0:
            failures.append(f"runtime {wall:.1f}s over 120s")
        _gate(9, failures, f"F={fid:.6f} pipeline={agree:.6f} ({wall:.1f}s)")

    def test_criterion_10_gpe(self):
        res, wall = _scenario("gpe_demo")
        infids = [r.infidelity for r in res.tables[0].rows]
        ratio = _value(res, "interaction_scale")
        failures = []
        if not all(a > b for a, b in zip(infids, infids[1:])):
            failures.append(f"deviation not decreasing {infids}")
        if infids[-1] > 2e-2:
            failures.append(f"deviation {infids[-1]:.2e} at eps=0.025")
        if not 0.2 <= ratio <= 5.0:
            failures.append(f"interaction/kinetic ratio {ratio:.3f} not comparable")
        if wall > 180.0:
            failures.append(f"runtime {wall:.1f}s over 180s")
        _gate(
            10,
            failures,
            f"deficit={infids[-1]:.2e} ratio={ratio:.3f} ({wall:.1f}s)",
        )

    def test_criterion_11_unbalance_witness(self):
        res, wall = _scenario("unbalanced_demo")
        w_unb = _value(res, "unbalanced_phase_witness")
        w_bal = _value(res, "balanced_phase_witness")
        r_unb = _value(res, "unbalanced_rest_residual")
        r_bal = _value(res, "balanced_rest_residual")
        l1 = _value(res, "density_still_converging")
        failures = []
        if w_unb < 0.1:
            failures.append(f"unbalanced phase witness {w_unb:.3f} under 0.1 rad")
        if r_unb < 1e-2:
            failures.append(f"unbalanced rest residual {r_unb:.2e} under 1e-2")
        if not all(a > b for a, b in zip(l1, l1[1:])):
            failures.append(f"unbalanced density error not converging {l1}")
        if w_bal >= 1e-3:
            failures.append(f"balanced phase witness {w_bal:.2e} over 1e-3")
        if r_bal >= 1e-3:
            failures.append(f"balanced rest residual {r_bal:.2e} over 1e-3")
        _gate(
            11,
            failures,
            f"phase {w_unb:.3f} vs {w_bal:.1e} rad, rest {r_unb:.1e} vs "
            f"{r_bal:.1e} ({wall:.1f}s)",
        )
