import numpy as np
import pytest

from sgchannel.spectral import (
    ChannelGrid,
    SpectralScalarField,
    field_from_function,
    inner_product,
    transform_forward,
    transform_inverse,
    zero_field,
)
from sgchannel.fields import VelocityField, q_from_u, velocity_from_stream
from sgchannel.dynamics import (
    BranchKind,
    ModelBranch,
    StepControl,
    StepRejected,
    branch_from_params,
    classify_kind,
    recover_velocity,
    run,
)
from sgchannel.experiments import base_stream
from sgchannel import oracles


class TestBranch:
    @pytest.mark.parametrize(
        "alpha,nu,kind",
        [
            (0.1, 0.01, BranchKind.SECOND_GRADE),
            (0.1, 0.0, BranchKind.EULER_ALPHA),
            (0.0, 0.01, BranchKind.NAVIER_STOKES),
            (0.0, 0.0, BranchKind.EULER),
        ],
    )
    def test_classification(self, alpha, nu, kind):
        assert classify_kind(alpha, nu) is kind
        assert branch_from_params(alpha, nu).kind is kind

    def test_inconsistent_kind_rejected(self):
        with pytest.raises(ValueError, match="inconsistent"):
            ModelBranch(BranchKind.EULER, alpha=0.1, nu=0.0)

    def test_negative_parameters_rejected(self):
        with pytest.raises(ValueError):
            branch_from_params(-0.1, 0.0)


class TestRecovery:
    def test_zero(self):
        g = ChannelGrid(16, 32)
        psi, omega, u = recover_velocity(zero_field(g), branch_from_params(0.5, 0.0))
        assert np.max(np.abs(psi.coeffs)) == 0.0
        assert np.max(np.abs(omega.coeffs)) == 0.0

    def test_clamped_manufactured(self):
        g = ChannelGrid(16, 48)
        q = field_from_function(g, lambda x, y: 0 * x + 12.0 * y**2 - 10.0)
        psi, omega, u = recover_velocity(q, branch_from_params(0.5, 0.1))
        want = ((1 - g.y_nodes**2) ** 2)[None, :]
        assert np.max(np.abs(transform_inverse(psi) - want)) <= 1e-9
        assert u.wall_speed() <= 1e-10

    def test_euler_constant_vorticity(self):
        # q = c: psi = c (y^2-1)/2, u = (-c y, 0)
        g = ChannelGrid(16, 32)
        c = -2.5
        q = field_from_function(g, lambda x, y: np.ones_like(x + y) * c)
        psi, omega, u = recover_velocity(q, branch_from_params(0.0, 0.0))
        assert np.max(np.abs(transform_inverse(psi) - c * (g.y_nodes**2 - 1)[None, :] / 2)) <= 1e-12
        assert np.max(np.abs(transform_inverse(u.u1) + c * g.y_nodes[None, :])) <= 1e-11

    def test_consistency_round_trip(self, rng):
        from sgchannel.diagnostics import random_tangent_stream

        g = ChannelGrid(16, 48)
        q = random_tangent_stream(g, rng)
        branch = branch_from_params(0.25, 0.01)
        _, _, u = recover_velocity(q, branch)
        back = q_from_u(u, 0.25)
        assert np.max(np.abs(back.coeffs - q.coeffs)) <= 1e-9 * np.max(np.abs(q.coeffs))


def clamped_poly_velocity(grid, epsilon=0.5):
    return velocity_from_stream(
        base_stream("clamped-poly", grid, epsilon=epsilon), no_slip=True
    )


class TestSecondGradeStep:
    def test_shear_is_steady_without_viscosity(self):
        g = ChannelGrid(16, 48)
        u0 = clamped_poly_velocity(g, epsilon=0.0)  # x-independent
        traj = run(u0, branch_from_params(0.3, 0.0), StepControl(t_end=0.02, dt=1e-3))
        q0 = q_from_u(u0, 0.3)
        assert np.max(np.abs(traj.final_state.q.coeffs - q0.coeffs)) <= 1e-12

    def test_relaxation_matches_matrix_exponential(self):
        alpha, nu = 0.4, 0.02
        g = ChannelGrid(8, 48)
        u0 = clamped_poly_velocity(g, epsilon=0.0)
        traj = run(u0, branch_from_params(alpha, nu), StepControl(t_end=0.05, dt=1e-3))
        q0_nodal = transform_inverse(q_from_u(u0, alpha))[0]
        oracle = oracles.relaxation_trajectory(g, alpha, nu, q0_nodal, 0.05)
        ours = transform_inverse(traj.final_state.q)[0]
        assert np.max(np.abs(ours - oracle)) <= 1e-10 * np.max(np.abs(q0_nodal))

    def test_energy_drift_inviscid(self):
        g = ChannelGrid(32, 48)
        u0 = clamped_poly_velocity(g)
        traj = run(u0, branch_from_params(0.2, 0.0), StepControl(t_end=0.2, dt=1e-3))
        e = [r.energy_alpha for r in traj.records]
        assert abs(e[-1] - e[0]) <= 1e-9 * e[0]

    def test_q_norm_conserved_euler_alpha(self):
        g = ChannelGrid(32, 48)
        u0 = clamped_poly_velocity(g)
        traj = run(u0, branch_from_params(0.2, 0.0), StepControl(t_end=0.2, dt=1e-3))
        qs = [r.q_norm_sq for r in traj.records]
        assert abs(qs[-1] - qs[0]) <= 1e-6 * qs[0]

    def test_branch_consistency_nu_to_zero(self):
        g = ChannelGrid(16, 48)
        u0 = clamped_poly_velocity(g)
        ctrl = StepControl(t_end=0.1, dt=1e-3)
        ea = run(u0, branch_from_params(0.2, 0.0), ctrl)
        ratios = []
        for nu in (1e-2, 1e-3, 1e-4):
            sg = run(u0, branch_from_params(0.2, nu), ctrl)
            d = np.max(np.abs(sg.final_state.q.coeffs - ea.final_state.q.coeffs))
            ratios.append(d / nu)
        assert max(ratios) <= 10.0 * min(ratios)  # difference scales like C nu


class TestNavierStokesStep:
    def test_zero_field_stays_zero(self):
        g = ChannelGrid(16, 32)
        u0 = velocity_from_stream(zero_field(g), no_slip=True)
        traj = run(u0, branch_from_params(0.0, 0.1), StepControl(t_end=0.01, dt=1e-3))
        assert np.max(np.abs(traj.final_state.q.coeffs)) == 0.0

    def test_decaying_shear_short(self):
        nu = 0.1
        g = ChannelGrid(8, 48)
        u0 = VelocityField(
            transform_forward(g, np.tile(np.cos(np.pi * g.y_nodes / 2), (8, 1))),
            zero_field(g),
            no_slip=True,
        )
        traj = run(u0, branch_from_params(0.0, nu), StepControl(t_end=0.2, dt=1e-3))
        want = oracles.decaying_shear_velocity(g, nu, 0.2)
        got = transform_inverse(traj.final_state.u.u1)[0]
        assert np.max(np.abs(got - want)) <= 1e-8

    def test_energy_balance_random_data(self, rng):
        from sgchannel.diagnostics import random_noslip_stream, energy_balance_residual

        g = ChannelGrid(16, 48)
        u0 = velocity_from_stream(random_noslip_stream(g, rng), no_slip=True)
        traj = run(u0, branch_from_params(0.0, 0.05), StepControl(t_end=0.2, dt=1e-3))
        assert energy_balance_residual(traj) <= 1e-6

    def test_energy_nonincreasing(self, rng):
        from sgchannel.diagnostics import random_noslip_stream

        g = ChannelGrid(16, 48)
        u0 = velocity_from_stream(random_noslip_stream(g, rng), no_slip=True)
        traj = run(
            u0, branch_from_params(0.0, 0.05), StepControl(t_end=0.1, dt=1e-3, record_every=10)
        )
        e = [r.energy_alpha for r in traj.records]
        assert all(b <= a * (1 + 1e-10) for a, b in zip(e, e[1:]))

    def test_noslip_enforced_after_steps(self, rng):
        from sgchannel.diagnostics import random_noslip_stream

        g = ChannelGrid(16, 48)
        u0 = velocity_from_stream(random_noslip_stream(g, rng), no_slip=True)
        traj = run(u0, branch_from_params(0.0, 0.05), StepControl(t_end=0.05, dt=1e-3))
        assert traj.final_state.u.wall_speed() <= 1e-10


class TestEulerStep:
    def test_shear_steady(self):
        g = ChannelGrid(16, 48)
        u0 = velocity_from_stream(base_stream("shear", g))
        traj = run(u0, branch_from_params(0.0, 0.0), StepControl(t_end=1.0, dt=2e-3))
        drift = np.max(np.abs(traj.final_state.q.coeffs - q_from_u(u0, 0).coeffs))
        assert drift <= 1e-12

    def test_velocity_norm_conserved(self):
        g = ChannelGrid(32, 48)
        u0 = velocity_from_stream(base_stream("perturbed-shear", g))
        traj = run(u0, branch_from_params(0.0, 0.0), StepControl(t_end=1.0, dt=1e-3))
        e = [r.energy_alpha for r in traj.records]
        assert abs(e[-1] - e[0]) <= 1e-8 * e[0]

    def test_vorticity_norm_conserved(self):
        g = ChannelGrid(32, 48)
        u0 = velocity_from_stream(base_stream("perturbed-shear", g))
        traj = run(u0, branch_from_params(0.0, 0.0), StepControl(t_end=1.0, dt=1e-3))
        qs = [r.q_norm_sq for r in traj.records]
        assert abs(qs[-1] - qs[0]) <= 1e-7 * qs[0]


class TestRunHarness:
    def test_zero_horizon_single_record(self):
        g = ChannelGrid(16, 32)
        u0 = clamped_poly_velocity(g)
        traj = run(u0, branch_from_params(0.1, 0.01), StepControl(t_end=0.0))
        assert len(traj.records) == 1 and traj.records[0].t == 0.0
        assert traj.n_steps == 0

    def test_dt_snaps_to_horizon(self):
        g = ChannelGrid(16, 32)
        u0 = clamped_poly_velocity(g)
        traj = run(u0, branch_from_params(0.1, 0.0), StepControl(t_end=0.01, dt=3e-3))
        assert traj.n_steps == 4
        assert traj.final_state.t == pytest.approx(0.01, abs=1e-15)

    def test_cfl_rejection_carries_advisory(self):
        g = ChannelGrid(16, 32)
        u0 = clamped_poly_velocity(g)
        with pytest.raises(StepRejected) as info:
            run(u0, branch_from_params(0.1, 0.0), StepControl(t_end=0.5, dt=0.5))
        assert info.value.advisory_dt > 0

    def test_probes_feed_extras(self):
        g = ChannelGrid(16, 32)
        u0 = clamped_poly_velocity(g)
        traj = run(
            u0,
            branch_from_params(0.1, 0.0),
            StepControl(t_end=0.002, dt=1e-3, record_every=1),
            probes=[lambda st: {"time_copy": st.t}],
        )
        assert all(r.extras["time_copy"] == r.t for r in traj.records)

    def test_third_order_transport_convergence(self):
        # advection-dominated Euler case: halving dt cuts the error ~8x
        g = ChannelGrid(32, 48)
        u0 = velocity_from_stream(base_stream("perturbed-shear", g, epsilon=0.1))
        branch = branch_from_params(0.0, 0.0)
        ref = run(u0, branch, StepControl(t_end=0.2, dt=2.5e-4))
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            traj = run(u0, branch, StepControl(t_end=0.2, dt=dt))
            errs.append(
                np.max(np.abs(traj.final_state.q.coeffs - ref.final_state.q.coeffs))
            )
        slope = np.polyfit(np.log([4e-3, 2e-3, 1e-3]), np.log(errs), 1)[0]
        assert slope == pytest.approx(3.0, abs=0.3)

    def test_second_order_diffusion_convergence(self):
        # pure-diffusion decaying shear: Crank-Nicolson is second order, so
        # the stated third-order behavior cannot hold on this case
        nu = 0.1
        g = ChannelGrid(8, 48)
        u0 = VelocityField(
            transform_forward(g, np.tile(np.cos(np.pi * g.y_nodes / 2), (8, 1))),
            zero_field(g),
            no_slip=True,
        )
        errs = []
        dts = (4e-3, 2e-3, 1e-3)
        for dt in dts:
            traj = run(u0, branch_from_params(0.0, nu), StepControl(t_end=0.2, dt=dt))
            got = transform_inverse(traj.final_state.u.u1)[0]
            errs.append(np.max(np.abs(got - oracles.decaying_shear_velocity(g, nu, 0.2))))
        slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.25)
