"""Parameter-regime classification, initial-data families, reference
solutions, and scaling-path sweeps toward the joint alpha, nu -> 0 limit."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dfield
from typing import Optional, Sequence

import numpy as np

from .spectral import (
    ChannelGrid,
    SpectralScalarField,
    field_from_function,
    inner_product,
    transform_forward,
    transform_inverse,
)
from .fields import StripSpec, grad_sq_value, l2_sq, norms_of, velocity_from_stream, VelocityField
from .dynamics import StepControl, branch_from_params, run
from .diagnostics import StripRule, strip_width


# --- regime map -------------------------------------------------------------

_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class RegimeRegion:
    """One of the four open regions or a point on a separating curve."""

    region: str                 # "I", "II", "III", "IV", or "boundary"
    curve: Optional[str] = None  # e.g. "III/IV" when region == "boundary"

    @property
    def label(self):
        return f"boundary {self.curve}" if self.region == "boundary" else self.region


def classify_regime(alpha, nu):
    """Position of (alpha, nu) relative to nu = a^{2/3}, a^{6/5}, a^2.

    Needs 0 < alpha, nu < 1 so the three curves are ordered; points within
    relative tolerance 1e-9 of a curve are labeled as boundary points.
    """
    if not (0.0 < alpha < 1.0 and 0.0 < nu < 1.0):
        raise ValueError("classification requires alpha, nu in (0, 1)")
    thresholds = (
        (alpha ** (2.0 / 3.0), "I/II"),
        (alpha ** 1.2, "II/III"),
        (alpha**2, "III/IV"),
    )
    for value, name in thresholds:
        if math.isclose(nu, value, rel_tol=_BOUNDARY_TOL):
            return RegimeRegion("boundary", name)
    if nu > thresholds[0][0]:
        return RegimeRegion("I")
    if nu > thresholds[1][0]:
        return RegimeRegion("II")
    if nu > thresholds[2][0]:
        return RegimeRegion("III")
    return RegimeRegion("IV")


# --- base-flow catalog ------------------------------------------------------

def shear_stream(grid, **_):
    """Zero-flux shear with unit tangential wall velocity: psi = (1-y^2)/2."""
    return field_from_function(grid, lambda x, y: 0 * x + 0.5 * (1.0 - y * y))


def perturbed_shear_stream(grid, epsilon=0.05, **_):
    """Shear plus one clamped x-mode; wall slip stays exactly the shear's."""
    lx = grid.lx
    return field_from_function(
        grid,
        lambda x, y: 0.5 * (1.0 - y * y)
        + epsilon * (1.0 - y * y) ** 2 * np.cos(2.0 * np.pi * x / lx),
    )


def clamped_poly_stream(grid, epsilon=0.5, amplitude=0.5, **_):
    """Fully no-slip polynomial data (value and slope vanish at walls)."""
    lx = grid.lx
    return field_from_function(
        grid,
        lambda x, y: amplitude
        * (1.0 - y * y) ** 2
        * (1.0 + epsilon * np.cos(2.0 * np.pi * x / lx)),
    )


BASE_FLOWS = {
    "shear": shear_stream,
    "perturbed-shear": perturbed_shear_stream,
    "clamped-poly": clamped_poly_stream,
}

# base flows whose Euler evolution is steady (exact zero-cost reference)
_STEADY_BASE_FLOWS = {"shear"}


def base_stream(name, grid, **params):
    try:
        builder = BASE_FLOWS[name]
    except KeyError:
        raise ValueError(f"unknown base flow {name!r}; have {sorted(BASE_FLOWS)}") from None
    return builder(grid, **params)


# --- suitable family of no-slip approximations ------------------------------

class UnresolvedCollar(RuntimeError):
    pass


# C^4 ramp 0 -> 1 on [0,1] (derivative 630 s^4 (1-s)^4) and its derivatives.
# The approximation family needs H^3 velocities, i.e. an H^4 stream
# function, so the collar ramp must be smoother than the C^2 corrector
# cutoff (which only ever meets first derivatives).
_RAMP_POLY = np.array([0, 0, 0, 0, 0, 126, -420, 540, -315, 70], dtype=float)
_RAMP_DERIVS = [_RAMP_POLY]
for _ in range(4):
    _RAMP_DERIVS.append(np.polynomial.polynomial.polyder(_RAMP_DERIVS[-1]))


def _quartic_smootherstep(s):
    s = np.clip(s, 0.0, 1.0)
    return np.polynomial.polynomial.polyval(s, _RAMP_POLY)


# the ramp rises over dist in [delta/8, delta]: the identically-zero collar
# is delta/8 wide and the transition gets 7/8 of the support, which keeps
# marginal grids from distorting the construction
_RAMP_START = 0.125


def _ramp_derivatives(grid, delta, orders=5):
    """m(y), m'(y), ... in closed form; m ramps over dist in [d/8, d]."""
    y = grid.y_nodes
    dist = 1.0 - np.abs(y)
    width = (1.0 - _RAMP_START) * delta
    s = (dist - _RAMP_START * delta) / width
    inside = (s > 0.0) & (s < 1.0)
    chain = -np.sign(y) / width
    out = [np.where(s <= 0.0, 0.0, np.where(s >= 1.0, 1.0, _quartic_smootherstep(s)))]
    for j in range(1, orders):
        vals = np.polynomial.polynomial.polyval(np.clip(s, 0.0, 1.0), _RAMP_DERIVS[j])
        out.append(np.where(inside, vals * chain**j, 0.0))
    return out


def _collar_ramp(grid, delta):
    """0 within delta/2 of a wall, 1 beyond delta, C^4 ramp between."""
    return _ramp_derivatives(grid, delta, orders=1)[0]


def _cancel_wall_slip(psi):
    """Subtract per-mode cubics so d(psi)/dy vanishes exactly at both walls.

    Interpolating the C^2 collar ramp leaves an O(ny^-2) wall slope; the
    cubics (1+y)^2(y-1)/4 and (1-y)^2(1+y)/4 remove it without touching
    wall values.
    """
    grid = psi.grid
    dtop, dbottom = psi.wall_derivatives()
    y = grid.y_nodes
    g_top = transform_forward(grid, np.tile(0.25 * (1 + y) ** 2 * (y - 1), (grid.nx, 1)))
    g_bot = transform_forward(grid, np.tile(0.25 * (1 - y) ** 2 * (1 + y), (grid.nx, 1)))
    coeffs = (
        psi.coeffs
        - dtop[:, None] * g_top.coeffs[0][None, :]
        - dbottom[:, None] * g_bot.coeffs[0][None, :]
    )
    return SpectralScalarField(grid, coeffs)


def collar_nodes(grid, delta):
    return int(np.sum(1.0 - grid.y_nodes < delta))


def suitable_family(u0_stream, alpha):
    """No-slip approximation of the tangent base flow at parameter alpha.

    The stream function is multiplied by a C^2 ramp vanishing within
    alpha/2 of the walls (full support cut at distance alpha), then the
    residual interpolation slip is cancelled exactly per mode.
    """
    grid = u0_stream.grid
    n_collar = collar_nodes(grid, alpha)
    if n_collar < 8:
        raise UnresolvedCollar(
            f"only {n_collar} Chebyshev nodes inside the width-{alpha} collar; "
            "increase ny (need >= 8)"
        )
    ramp = _collar_ramp(grid, alpha)
    product = transform_inverse(u0_stream) * ramp[None, :]
    psi = _cancel_wall_slip(transform_forward(grid, product))
    return velocity_from_stream(psi, no_slip=True)


def _family_h3(u0_stream, alpha):
    """H^3 norm of the family member, assembled from closed-form ramp
    derivatives times spectral derivatives of the (smooth) base stream.

    Differentiating the interpolant of the ramp product directly is
    useless here: its high derivatives are dominated by the interpolation
    tail blowing up like n^8 at the walls, while the true function
    vanishes identically there.  The tiny per-mode slip cancellers are
    ignored (their contribution is orders below the collar terms).
    """
    from math import comb

    from .spectral import diff_x, diff_y

    grid = u0_stream.grid
    m = _ramp_derivatives(grid, alpha)

    psi_partials = {(0, 0): u0_stream}
    for ax in range(5):
        for ay in range(5 - ax):
            if (ax, ay) in psi_partials:
                continue
            if ay > 0:
                psi_partials[(ax, ay)] = diff_y(psi_partials[(ax, ay - 1)])
            else:
                psi_partials[(ax, ay)] = diff_x(psi_partials[(ax - 1, ay)])
    psi_nodal = {key: transform_inverse(f) for key, f in psi_partials.items()}

    def u1_partial(ax, ay):
        # d^{ax}_x d^{ay}_y of -(m psi)_y via Leibniz in y
        total = np.zeros((grid.nx, grid.ny + 1))
        for j in range(ay + 2):
            total += comb(ay + 1, j) * m[j][None, :] * psi_nodal[(ax, ay + 1 - j)]
        return -total

    def u2_partial(ax, ay):
        total = np.zeros((grid.nx, grid.ny + 1))
        for j in range(ay + 1):
            total += comb(ay, j) * m[j][None, :] * psi_nodal[(ax + 1, ay - j)]
        return total

    wy = grid.quad_weights
    h3_sq = 0.0
    for ax in range(4):
        for ay in range(4 - ax):
            for part in (u1_partial, u2_partial):
                v = part(ax, ay)
                h3_sq += float(grid.x_weight * np.einsum("ij,ij,j->", v, v, wy))
    return math.sqrt(max(h3_sq, 0.0))


def family_gap_terms(u0_stream, alpha):
    """The three admissibility terms: ||u0a - u0||, a^2||grad u0a||^2, a^3||u0a||_3."""
    u0 = velocity_from_stream(u0_stream)
    ua = suitable_family(u0_stream, alpha)
    diff = VelocityField(
        SpectralScalarField(u0.grid, ua.u1.coeffs - u0.u1.coeffs),
        SpectralScalarField(u0.grid, ua.u2.coeffs - u0.u2.coeffs),
    )
    gap = math.sqrt(max(l2_sq(diff), 0.0))
    grad_term = alpha**2 * grad_sq_value(ua)
    h3_term = alpha**3 * _family_h3(u0_stream, alpha)
    return gap, grad_term, h3_term


# --- references -------------------------------------------------------------

class SteadyReference:
    """Constant-in-time Euler solution (exact for steady base flows)."""

    def __init__(self, stream_by_grid):
        self._builder = stream_by_grid
        self._cache = {}

    def velocity_at(self, t, grid):
        if grid not in self._cache:
            self._cache[grid] = velocity_from_stream(self._builder(grid))
        return self._cache[grid]

    resolution_gap = 0.0


class SampledReference:
    """Euler trajectory sampled on a fine grid, restricted spectrally."""

    def __init__(self, trajectory, fine_grid):
        self._times = [t for t, _ in trajectory.snapshots]
        self._snaps = [q for _, q in trajectory.snapshots]
        self._fine = fine_grid
        self._branch = trajectory.branch
        self.resolution_gap = None

    def _restrict_stream(self, q, grid):
        from .dynamics import _Recovery

        state = _Recovery(self._fine, self._branch)(q)
        fine = state.psi.coeffs
        half = grid.nx // 2
        c = np.zeros((grid.nx, grid.ny + 1), dtype=np.complex128)
        c[:half, :] = fine[:half, : grid.ny + 1]
        c[half + 1:, :] = fine[self._fine.nx - half + 1:, : grid.ny + 1]
        return SpectralScalarField(grid, c)

    def velocity_at(self, t, grid):
        for ts, q in zip(self._times, self._snaps):
            if math.isclose(ts, t, abs_tol=1e-12):
                return velocity_from_stream(self._restrict_stream(q, grid))
        raise ValueError(f"reference has no sample at t={t}")


class ReferenceRejected(RuntimeError):
    pass


def reference_solution(base_flow, ctrl, grid, params=None, resolution_factor=2):
    """Euler reference for a named base flow.

    Steady flows cost nothing.  Otherwise the Euler branch is run at
    `resolution_factor` times the resolution and half the step, and a
    same-path run at 1x provides the self-convergence gap callers must
    compare against the errors they measure.
    """
    params = params or {}
    if base_flow in _STEADY_BASE_FLOWS:
        return SteadyReference(lambda g, name=base_flow: base_stream(name, g, **params))

    branch = branch_from_params(0.0, 0.0)

    def euler_traj(factor, dt_scale):
        g = ChannelGrid(grid.nx * factor, grid.ny * factor, grid.lx)
        u0 = velocity_from_stream(base_stream(base_flow, g, **params))
        c = StepControl(
            t_end=ctrl.t_end,
            dt=None if ctrl.dt is None else ctrl.dt * dt_scale,
            cfl_target=ctrl.cfl_target,
            record_every=max(1, ctrl.record_every * (1 if dt_scale == 1.0 else 2)),
        )
        return run(u0, branch, c, store_fields=True), g

    fine_traj, fine_grid = euler_traj(resolution_factor, 0.5)
    coarse_traj, coarse_grid = euler_traj(1, 1.0)
    ref = SampledReference(fine_traj, fine_grid)
    coarse_ref = SampledReference(coarse_traj, coarse_grid)
    gap = 0.0
    for t, _ in coarse_traj.snapshots:
        uf = ref.velocity_at(t, coarse_grid)
        uc = coarse_ref.velocity_at(t, coarse_grid)
        diff = VelocityField(
            SpectralScalarField(coarse_grid, uf.u1.coeffs - uc.u1.coeffs),
            SpectralScalarField(coarse_grid, uf.u2.coeffs - uc.u2.coeffs),
        )
        gap = max(gap, math.sqrt(max(l2_sq(diff), 0.0)))
    ref.resolution_gap = gap
    return ref


# --- sweeps ------------------------------------------------------------------

def default_resolution(alpha, nu, t_end, base_flow):
    """(nx, ny) resolving the collar ramp and the viscous layers.

    Near-wall node count within distance d is about (ny/pi) sqrt(2 d); the
    schedule demands >= 8 nodes across the family's ramp band and across
    the widths sqrt(alpha) and sqrt(nu T).
    """
    ny = 64
    # >= 8 nodes between delta/8 and delta of the wall, delta = alpha
    ramp_density = math.sqrt(2.0) - math.sqrt(2.0 * _RAMP_START)
    ny = max(ny, math.ceil(8.0 * math.pi / (ramp_density * math.sqrt(alpha)) / 32.0) * 32)
    for w in (math.sqrt(alpha), math.sqrt(max(nu * t_end, 0.0))):
        if w > 0:
            ny = max(ny, math.ceil(8.0 * math.pi / math.sqrt(2.0 * w) / 32.0) * 32)
    nx = 16 if base_flow == "shear" else 64
    return nx, ny


@dataclass
class SweepPlan:
    """Scaling path nu = coeff * alpha^beta over a decreasing alpha list."""

    beta: float
    coeff: float
    alphas: Sequence[float]
    base_flow: str = "shear"
    base_flow_params: dict = dfield(default_factory=dict)
    t_end: float = 1.0
    dt: Optional[float] = 1e-3
    cfl_target: float = 0.5
    record_every: int = 20
    strip_rule: StripRule = StripRule.NU_LINEAR
    strip_coeff: float = 1.0
    resolutions: Optional[Sequence] = None
    lx: float = 2.0 * math.pi
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas or any(a <= 0 for a in alphas):
            raise ValueError("alphas must be positive")
        if any(b >= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("alphas must be strictly decreasing")
        self.alphas = alphas
        if self.base_flow not in BASE_FLOWS:
            raise ValueError(f"unknown base flow {self.base_flow!r}")
        if self.resolutions is None:
            self.resolutions = tuple(
                default_resolution(a, self.nu_of(a), self.t_end, self.base_flow)
                for a in alphas
            )
        else:
            self.resolutions = tuple((int(nx), int(ny)) for nx, ny in self.resolutions)
            if len(self.resolutions) != len(alphas):
                raise ValueError("resolution schedule length must match alphas")

    def nu_of(self, alpha):
        return self.coeff * alpha**self.beta

    def ctrl(self):
        return StepControl(
            t_end=self.t_end,
            dt=self.dt,
            cfl_target=self.cfl_target,
            record_every=self.record_every,
        )


@dataclass
class SweepRow:
    alpha: float
    nu: float
    region: str = ""
    delta_used: float = math.nan
    sup_err: float = math.nan
    kato_value: float = math.nan
    ic_l2_gap: float = math.nan
    ic_grad_term: float = math.nan
    ic_h3_term: float = math.nan
    final_energy_gap: float = math.nan
    sup_alpha_grad_sq: float = math.nan
    failure: Optional[str] = None


def _row_job(plan, index, reference=None):
    alpha = plan.alphas[index]
    nu = plan.nu_of(alpha)
    row = SweepRow(alpha=alpha, nu=nu)
    try:
        row.region = classify_regime(alpha, nu).label
        nx, ny = plan.resolutions[index]
        grid = ChannelGrid(nx, ny, plan.lx)
        delta = strip_width(plan.strip_rule, alpha, nu, plan.strip_coeff)
        row.delta_used = delta
        stream = base_stream(plan.base_flow, grid, **plan.base_flow_params)
        u0 = suitable_family(stream, alpha)
        row.ic_l2_gap, row.ic_grad_term, row.ic_h3_term = family_gap_terms(stream, alpha)
        ref = reference
        if ref is None:
            ref = reference_solution(plan.base_flow, plan.ctrl(), grid, plan.base_flow_params)
        branch = branch_from_params(alpha, nu)
        traj = run(u0, branch, plan.ctrl(), strip=StripSpec(delta), reference=ref)
        errs = [r.err_vs_ref_l2 for r in traj.records]
        row.sup_err = max(errs)
        row.kato_value = traj.records[-1].strip_dissipation
        row.sup_alpha_grad_sq = max(alpha**2 * r.grad_sq for r in traj.records)
        u_ref = ref.velocity_at(traj.records[-1].t, grid)
        row.final_energy_gap = abs(traj.records[-1].energy_alpha - l2_sq(u_ref))
    except Exception as exc:  # row failures recorded, sweep continues
        row.failure = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(plan):
    """All rows of the plan, ordered by decreasing alpha.

    Rows are independent jobs; failures are recorded per row.  For base
    flows without a steady reference the Euler reference is computed once
    and its self-convergence gap must stay below 10% of the smallest
    measured error, otherwise the whole sweep is rejected.
    """
    shared_ref = None
    if plan.base_flow not in _STEADY_BASE_FLOWS:
        finest = max(plan.resolutions, key=lambda r: r[0] * r[1])
        grid = ChannelGrid(finest[0], finest[1], plan.lx)
        shared_ref = reference_solution(
            plan.base_flow, plan.ctrl(), grid, plan.base_flow_params
        )

    if plan.workers > 1 and shared_ref is None:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            rows = list(pool.map(_row_job, [plan] * len(plan.alphas), range(len(plan.alphas))))
    else:
        rows = [_row_job(plan, i, shared_ref) for i in range(len(plan.alphas))]

    if shared_ref is not None and shared_ref.resolution_gap is not None:
        finite = [r.sup_err for r in rows if r.failure is None and r.sup_err > 0]
        if finite and shared_ref.resolution_gap > 0.1 * min(finite):
            raise ReferenceRejected(
                f"reference self-convergence gap {shared_ref.resolution_gap:.3e} "
                f"exceeds 10% of the smallest sweep error {min(finite):.3e}"
            )
    return rows


@dataclass
class RateFit:
    slope: float
    ci_low: float
    ci_high: float
    n_rows: int

    def __float__(self):
        return self.slope


def rate_fit(rows):
    """Least-squares slope of log(sup_err) against log(alpha), with 95% CI."""
    usable = [r for r in rows if r.failure is None and r.sup_err > 0]
    if len(usable) < 3:
        raise ValueError("rate fit needs at least 3 rows with positive errors")
    x = np.log([r.alpha for r in usable])
    y = np.log([r.sup_err for r in usable])
    from scipy import stats

    res = stats.linregress(x, y)
    half = stats.t.ppf(0.975, len(usable) - 2) * res.stderr if len(usable) > 2 else math.inf
    return RateFit(float(res.slope), float(res.slope - half), float(res.slope + half), len(usable))
