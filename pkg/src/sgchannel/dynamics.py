"""Time integration of the four model branches.

All branches evolve a single scalar: potential vorticity q for alpha > 0,
plain vorticity for alpha = 0.  Advection is dealiased pseudospectral
transport under SSP-RK3 (Shu-Osher form); the second-grade relaxation
(nu/alpha^2)(q - omega) is split around the transport step and advanced
by its exact precomputed per-mode propagator, and Navier-Stokes diffusion
is Crank-Nicolson with the wall vorticity pinned by the influence matrix.
"""

import enum
import time
from dataclasses import dataclass, field as dfield
from typing import Callable, Optional, Sequence

import numpy as np

from .spectral import SpectralScalarField, transform_inverse
from .solvers import batched, mode_solvers
from .fields import (
    VelocityField,
    advection_term,
    grad_sq_value,
    q_from_u,
    strip_weights,
    velocity_from_stream,
)
from .diagnostics import DiagnosticsRecord, energy_alpha


class BranchKind(enum.Enum):
    SECOND_GRADE = "second-grade"
    EULER_ALPHA = "euler-alpha"
    NAVIER_STOKES = "navier-stokes"
    EULER = "euler"


@dataclass(frozen=True)
class ModelBranch:
    """Family member selected by (alpha, nu); kind must match the signs."""

    kind: BranchKind
    alpha: float
    nu: float

    def __post_init__(self):
        if self.alpha < 0 or self.nu < 0:
            raise ValueError("alpha and nu must be nonnegative")
        if classify_kind(self.alpha, self.nu) is not self.kind:
            raise ValueError(
                f"branch {self.kind.value} inconsistent with alpha={self.alpha}, nu={self.nu}"
            )


def classify_kind(alpha, nu):
    if alpha > 0 and nu > 0:
        return BranchKind.SECOND_GRADE
    if alpha > 0:
        return BranchKind.EULER_ALPHA
    if nu > 0:
        return BranchKind.NAVIER_STOKES
    return BranchKind.EULER


def branch_from_params(alpha, nu):
    return ModelBranch(classify_kind(alpha, nu), alpha, nu)


@dataclass
class StepControl:
    t_end: float
    dt: Optional[float] = None
    cfl_target: float = 0.5
    record_every: int = 20

    def __post_init__(self):
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 < self.cfl_target <= 1.0:
            raise ValueError("cfl_target must lie in (0, 1]")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


DT_CAP = 1e-3


@dataclass
class FlowState:
    t: float
    q: SpectralScalarField
    psi: SpectralScalarField
    omega: SpectralScalarField
    u: VelocityField


class StepRejected(RuntimeError):
    """CFL violation; carries an advisory time step."""

    def __init__(self, cfl, advisory_dt):
        super().__init__(
            f"advective CFL {cfl:.3f} exceeds target; retry with dt <= {advisory_dt:.3e}"
        )
        self.advisory_dt = advisory_dt


@dataclass
class Trajectory:
    records: list
    branch: ModelBranch
    dt: float
    n_steps: int
    wall_time: float
    snapshots: list = dfield(default_factory=list)
    strip: object = None

    @property
    def final_state(self):
        return self._final_state

    @property
    def times(self):
        return np.array([r.t for r in self.records])


class _Recovery:
    """Batched velocity recovery for one (grid, branch).

    alpha > 0: clamped fourth-order solve (no-slip).  Euler: Dirichlet
    Poisson (tangency, zero-flux gauge).  Navier-Stokes: Dirichlet Poisson
    for k != 0, but the k=0 column is rebuilt by integrating the mean
    vorticity with the no-slip gauge U(-1) = 0 so a nonzero mean flux is
    representable.
    """

    def __init__(self, grid, branch):
        ms = mode_solvers(grid)
        self.grid = grid
        self.alpha = branch.alpha
        self.mean_flow = None
        if branch.alpha > 0:
            self.stream_op = batched(grid, lambda k: ms.clamped_second_grade(k, branch.alpha))
            self.omega_op = batched(grid, lambda k: ms.omega_from_q(k, branch.alpha))
        else:
            self.stream_op = batched(grid, ms.poisson_dirichlet)
            self.omega_op = None
            if branch.kind is BranchKind.NAVIER_STOKES:
                _, self.mean_flow = ms.mean_flow_recovery()

    def __call__(self, q, t=0.0):
        psi_c = self.stream_op.apply(q.coeffs)
        if self.mean_flow is not None:
            psi_c[0] = self.mean_flow @ q.coeffs[0]
        psi = SpectralScalarField(self.grid, psi_c)
        if self.omega_op is not None:
            omega = SpectralScalarField(self.grid, self.omega_op.apply(q.coeffs))
        else:
            omega = q
        u = velocity_from_stream(psi, no_slip=self.alpha > 0)
        return FlowState(t, q, psi, omega, u)


def recover_velocity(q, branch):
    """(psi, omega, u) for the branch's wall conditions.

    alpha > 0: clamped fourth-order recovery (no-slip); alpha = 0:
    Dirichlet Poisson (tangency only; Navier-Stokes regains no-slip inside
    the diffusion substep, not here).
    """
    state = _Recovery(q.grid, branch)(q)
    return state.psi, state.omega, state.u


def cfl_number(u, dt):
    """Advective CFL from nodal speeds and local grid spacings."""
    g = u.grid
    v1 = np.abs(transform_inverse(u.u1))
    v2 = np.abs(transform_inverse(u.u2))
    rate = np.max(v1 / g.x_weight + v2 / g.local_spacing_y[None, :])
    return float(dt * rate), float(rate)


class _SecondGradeStepper:
    """alpha > 0 branches: Strang split of exact relaxation half-steps
    around an SSP-RK3 transport step.

    The relaxation term -(nu/alpha^2)(q - omega[q]) is linear with a
    precomputed per-mode generator, so each half-step applies its exact
    propagator; any relaxation rate is unconditionally stable and the
    zero-advection dynamics are exact.  nu = 0 degenerates to pure
    transport.  Dissipation (full and strip) is accumulated by the
    trapezoid rule on the relaxation sub-flows, where all of it happens.
    """

    def __init__(self, grid, branch, dt):
        self.grid = grid
        self.branch = branch
        self.dt = dt
        self.recover = _Recovery(grid, branch)
        self.half_relax = None
        if branch.nu > 0:
            ms = mode_solvers(grid)
            rate = branch.nu / branch.alpha**2
            self.half_relax = batched(
                grid,
                lambda k: ms.relaxation_propagator(k, branch.alpha, rate, 0.5 * dt),
            )

    def _transport(self, combo, scale, stage_state):
        adv = advection_term(stage_state.u, stage_state.q)
        return SpectralScalarField(self.grid, combo - scale * self.dt * adv.coeffs)

    def _relax_half(self, state, strip_w):
        new = self.recover(SpectralScalarField(self.grid, self.half_relax.apply(state.q.coeffs)))
        h = 0.5 * self.dt
        nu = self.branch.nu
        diss = nu * 0.5 * h * (grad_sq_value(state.u) + grad_sq_value(new.u))
        strip = (
            nu * 0.5 * h * (grad_sq_value(state.u, strip_w) + grad_sq_value(new.u, strip_w))
            if strip_w is not None
            else 0.0
        )
        return new, diss, strip

    def __call__(self, state, strip_w=None):
        diss = strip = 0.0
        if self.half_relax is not None:
            state, diss, strip = self._relax_half(state, strip_w)
        q0 = state.q
        q1 = self._transport(q0.coeffs, 1.0, state)
        s1 = self.recover(q1)
        q2 = self._transport(0.75 * q0.coeffs + 0.25 * q1.coeffs, 0.25, s1)
        s2 = self.recover(q2)
        q3 = self._transport(
            (1.0 / 3.0) * q0.coeffs + (2.0 / 3.0) * q2.coeffs, 2.0 / 3.0, s2
        )
        new = self.recover(q3, state.t + self.dt)
        if self.half_relax is not None:
            new, d2, x2 = self._relax_half(new, strip_w)
            new.t = state.t + self.dt
            diss += d2
            strip += x2
        return new, diss, strip


class _EulerStepper:
    """Pure vorticity transport with tangency-only recovery."""

    def __init__(self, grid, branch, dt):
        self.grid = grid
        self.dt = dt
        self.recover = _Recovery(grid, branch)

    def _stage(self, combo, scale, stage_state):
        adv = advection_term(stage_state.u, stage_state.q)
        return SpectralScalarField(self.grid, combo - scale * self.dt * adv.coeffs)

    def __call__(self, state, strip_w=None):
        q0 = state.q
        q1 = self._stage(q0.coeffs, 1.0, state)
        s1 = self.recover(q1)
        q2 = self._stage(0.75 * q0.coeffs + 0.25 * q1.coeffs, 0.25, s1)
        s2 = self.recover(q2)
        q3 = self._stage((1.0 / 3.0) * q0.coeffs + (2.0 / 3.0) * q2.coeffs, 2.0 / 3.0, s2)
        return self.recover(q3, state.t + self.dt), 0.0, 0.0


class _NavierStokesStepper:
    """Strang split: half CN diffusion, SSP-RK3 advection, half CN diffusion.

    No-slip enters through the influence-matrix closure of each diffusion
    substep; dissipation is accumulated at the Crank-Nicolson midpoints
    where the discrete energy balance of the diffusion step is sharp.
    """

    def __init__(self, grid, branch, dt):
        self.grid = grid
        self.branch = branch
        self.dt = dt
        self.recover = _Recovery(grid, branch)
        ms = mode_solvers(grid)

        def gb(k):
            g, b = ms.ns_diffusion(k, branch.nu, 0.5 * dt)
            return g @ b

        self.diffuse = batched(grid, gb)
        self.transport = _EulerStepper(grid, branch, dt)

    def _half_diffusion(self, state, strip_w):
        w_new = SpectralScalarField(self.grid, self.diffuse.apply(state.q.coeffs))
        new = self.recover(w_new, state.t)
        mid = SpectralScalarField(self.grid, 0.5 * (state.q.coeffs + w_new.coeffs))
        u_mid = self.recover(mid).u
        h = 0.5 * self.dt
        diss = self.branch.nu * h * grad_sq_value(u_mid)
        strip = (
            self.branch.nu * h * grad_sq_value(u_mid, strip_w) if strip_w is not None else 0.0
        )
        return new, diss, strip

    def __call__(self, state, strip_w=None):
        s1, d1, x1 = self._half_diffusion(state, strip_w)
        s2, _, _ = self.transport(s1)
        s3, d3, x3 = self._half_diffusion(s2, strip_w)
        s3.t = state.t + self.dt
        return s3, d1 + d3, x1 + x3


def make_stepper(grid, branch, dt):
    if branch.kind in (BranchKind.SECOND_GRADE, BranchKind.EULER_ALPHA):
        return _SecondGradeStepper(grid, branch, dt)
    if branch.kind is BranchKind.NAVIER_STOKES:
        return _NavierStokesStepper(grid, branch, dt)
    return _EulerStepper(grid, branch, dt)


def step_second_grade(state, branch, ctrl):
    """One SSP-RK3/IMEX step of the potential-vorticity equation."""
    if branch.alpha <= 0:
        raise ValueError("second-grade stepping needs alpha > 0")
    return _single_step(state, branch, ctrl)


def step_navier_stokes(state, branch, ctrl):
    if branch.kind is not BranchKind.NAVIER_STOKES:
        raise ValueError("branch is not Navier-Stokes")
    return _single_step(state, branch, ctrl)


def step_euler(state, branch, ctrl):
    if branch.kind is not BranchKind.EULER:
        raise ValueError("branch is not Euler")
    return _single_step(state, branch, ctrl)


def _single_step(state, branch, ctrl):
    dt = ctrl.dt if ctrl.dt is not None else DT_CAP
    cfl, rate = cfl_number(state.u, dt)
    if cfl > ctrl.cfl_target:
        raise StepRejected(cfl, ctrl.cfl_target / rate)
    stepper = make_stepper(state.q.grid, branch, dt)
    new, _, _ = stepper(state)
    return new


def initial_state(initial, branch):
    if isinstance(initial, VelocityField):
        q0 = q_from_u(initial, branch.alpha)
    else:
        q0 = initial
    return _Recovery(q0.grid, branch)(q0)


def resolve_dt(u0, ctrl):
    """Fixed step size: configured dt (or CFL pick capped at 1e-3), snapped
    so an integer number of steps lands exactly on t_end."""
    if ctrl.t_end == 0:
        return 0.0, 0
    if ctrl.dt is not None:
        dt = ctrl.dt
    else:
        _, rate = cfl_number(u0, 1.0)
        dt = min(DT_CAP, ctrl.cfl_target / rate) if rate > 0 else DT_CAP
    n = max(1, int(np.ceil(ctrl.t_end / dt - 1e-9)))
    return ctrl.t_end / n, n


def run(
    initial,
    branch,
    ctrl,
    probes: Sequence[Callable] = (),
    strip=None,
    reference=None,
    store_fields=False,
):
    """Integrate and sample diagnostics.

    initial: VelocityField (or the evolved scalar directly).  strip: a
    StripSpec accumulating the wall-strip dissipation alongside the full
    one.  reference: object with velocity_at(t, grid) used for the error
    column.  Returns a Trajectory.
    """
    t_start = time.perf_counter()
    state = initial_state(initial, branch)
    grid = state.q.grid
    dt, n_steps = resolve_dt(state.u, ctrl)
    stepper = make_stepper(grid, branch, dt) if n_steps else None
    strip_w = strip_weights(grid, strip) if strip is not None else None

    records = []
    snapshots = []
    cum = 0.0
    cum_strip = 0.0

    def sample(st):
        rec = DiagnosticsRecord(
            t=st.t,
            energy_alpha=energy_alpha(st.u, branch.alpha),
            grad_sq=grad_sq_value(st.u),
            q_norm_sq=_norm_sq(st.q),
            cum_dissipation=cum,
            strip_dissipation=cum_strip,
            err_vs_ref_l2=_reference_error(st, reference),
        )
        for probe in probes:
            rec.extras.update(probe(st))
        records.append(rec)
        if store_fields:
            snapshots.append((st.t, st.q.copy()))

    sample(state)
    for i in range(n_steps):
        cfl, rate = cfl_number(state.u, dt)
        if cfl > ctrl.cfl_target:
            raise StepRejected(cfl, ctrl.cfl_target / rate)
        state, diss, sdiss = stepper(state, strip_w)
        state.t = (i + 1) * dt  # exact multiples; avoids drift in t
        cum += diss
        cum_strip += sdiss
        if (i + 1) % ctrl.record_every == 0 or i + 1 == n_steps:
            sample(state)

    traj = Trajectory(
        records=records,
        branch=branch,
        dt=dt,
        n_steps=n_steps,
        wall_time=time.perf_counter() - t_start,
        snapshots=snapshots,
        strip=strip,
    )
    traj._final_state = state
    return traj


def _norm_sq(f):
    from .spectral import inner_product

    return inner_product(f, f)


def _reference_error(state, reference):
    if reference is None:
        return None
    u_ref = reference.velocity_at(state.t, state.q.grid)
    du1 = SpectralScalarField(state.q.grid, state.u.u1.coeffs - u_ref.u1.coeffs)
    du2 = SpectralScalarField(state.q.grid, state.u.u2.coeffs - u_ref.u2.coeffs)
    from .spectral import inner_product

    return float(np.sqrt(max(inner_product(du1, du1) + inner_product(du2, du2), 0.0)))
