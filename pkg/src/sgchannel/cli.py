"""Command-line surface: run, sweep, classify, corrector-check,
bench-inequalities, oracle-check."""

import argparse
import math
import os
import sys

import numpy as np

from .spectral import ChannelGrid, cheb_forward, cheb_inverse, transform_inverse
from .fields import StripSpec, velocity_from_stream
from . import solvers, oracles
from .dynamics import BranchKind, ModelBranch, StepControl, run
from .diagnostics import (
    StripRule,
    corrector_norms,
    corrector_scaling_fit,
    energy_balance_residuals,
    inequality_bench,
    make_bench_corpus,
    strip_width,
)
from .experiments import (
    SteadyReference,
    SweepPlan,
    base_stream,
    classify_regime,
    run_sweep,
    suitable_family,
)
from .config import ConfigError, load_config
from . import dataio

OUTPUT_ENV = "SGCHANNEL_OUTPUT"


def _out_dir(preferred):
    path = os.environ.get(OUTPUT_ENV, preferred)
    os.makedirs(path, exist_ok=True)
    return path


def _build_initial(cfg, grid):
    params = {"epsilon": cfg.epsilon, "amplitude": cfg.amplitude}
    stream = base_stream(cfg.base_flow, grid, **params)
    if cfg.family_alpha is not None:
        return suitable_family(stream, cfg.family_alpha)
    return velocity_from_stream(stream)


def _needs_noslip(branch):
    return branch.kind is not BranchKind.EULER


def cmd_run(args):
    cfg = load_config(args.config)
    for note in cfg.notes:
        print(f"note: {note}")
    grid = ChannelGrid(cfg.nx, cfg.ny, cfg.lx)
    branch = ModelBranch(cfg.branch, cfg.alpha, cfg.nu)
    initial = _build_initial(cfg, grid)
    if _needs_noslip(branch) and initial.wall_speed() > 1e-8:
        raise SystemExit(
            "initial data violates the branch's no-slip walls; "
            "set family_alpha to build a no-slip approximation of the base flow"
        )
    strip = None
    if cfg.strip_rule is not None:
        delta = strip_width(cfg.strip_rule, cfg.alpha, cfg.nu, cfg.strip_constant)
        strip = StripSpec(delta)
        print(f"strip width delta = {delta!r}")
    reference = None
    if cfg.base_flow == "shear":
        reference = SteadyReference(lambda g: base_stream("shear", g))
    ctrl = StepControl(
        t_end=cfg.t_end,
        dt=cfg.dt,
        cfl_target=cfg.cfl_target,
        record_every=cfg.record_every,
    )
    traj = run(initial, branch, ctrl, strip=strip, reference=reference)
    out = _out_dir(cfg.output_dir)
    csv_path = os.path.join(out, "timeseries.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        dataio.write_timeseries(traj.records, fh)
    print(
        f"{traj.n_steps} steps (dt={traj.dt!r}) in {traj.wall_time:.2f}s; "
        f"{len(traj.records)} samples -> {csv_path}"
    )
    if len(traj.records) >= 2:
        res = energy_balance_residuals(traj)
        print(
            f"energy balance residual: {res['standard']:.3e} "
            f"(printed-form {res['as-printed']:.3e})"
        )
    if cfg.write_snapshot:
        snap_path = os.path.join(out, "final_state.snap")
        dataio.save_snapshot(traj.final_state, branch, snap_path)
        print(f"final state -> {snap_path}")
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config)
    for note in cfg.notes:
        print(f"note: {note}")
    if not cfg.sweep_alphas:
        raise SystemExit("sweep needs sweep_alphas (and sweep_beta) in the config")
    plan = SweepPlan(
        beta=cfg.sweep_beta,
        coeff=cfg.sweep_coeff,
        alphas=cfg.sweep_alphas,
        base_flow=cfg.base_flow,
        base_flow_params={"epsilon": cfg.epsilon, "amplitude": cfg.amplitude},
        t_end=cfg.t_end,
        dt=cfg.dt,
        cfl_target=cfg.cfl_target,
        record_every=cfg.record_every,
        strip_rule=cfg.strip_rule or StripRule.NU_LINEAR,
        strip_coeff=cfg.strip_constant,
        resolutions=cfg.sweep_resolutions,
        lx=cfg.lx,
        seed=cfg.seed,
        workers=cfg.workers,
    )
    rows = run_sweep(plan)
    out = _out_dir(cfg.output_dir)
    csv_path = os.path.join(out, "sweep.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        dataio.write_sweep(rows, fh)
    failures = 0
    for r in rows:
        if r.failure:
            failures += 1
            print(f"alpha={r.alpha}: FAILED ({r.failure})")
        else:
            print(
                f"alpha={r.alpha} nu={r.nu:.6g} [{r.region}] "
                f"sup_err={r.sup_err:.6g} kato={r.kato_value:.6g}"
            )
    print(f"{len(rows)} rows -> {csv_path}")
    return 1 if failures else 0


def cmd_classify(args):
    region = classify_regime(args.alpha, args.nu)
    print(region.label)
    return 0


def cmd_corrector_check(args):
    grid = ChannelGrid(args.nx, args.ny)
    stream = base_stream("shear", grid)
    deltas = (0.2, 0.1, 0.05, 0.025)
    rows = []
    worst_oracle = 0.0
    for d in deltas:
        from .diagnostics import CorrectorSpec

        ours = corrector_norms(stream, CorrectorSpec(d))
        ref = oracles.corrector_norms_1d(d, lx=grid.lx)
        diff = max(abs(ours[0] - ref[0]) / ref[0], abs(ours[1] - ref[1]) / ref[1])
        worst_oracle = max(worst_oracle, diff)
        rows.append((d, ours[0], ours[1]))
        print(
            f"delta={d}: |u_b|={ours[0]:.6g} |grad u_b|={ours[1]:.6g} "
            f"(quadrature oracle gap {diff:.2e})"
        )
    p0, p1 = corrector_scaling_fit(stream, deltas)
    # quadrature of the kinked cutoff integrand agrees with the adaptive
    # 1D oracle to about a percent at ny=256
    ok = 0.4 <= p0 <= 0.6 and -0.6 <= p1 <= -0.4 and worst_oracle < 1e-2
    print(f"fitted exponents: |u_b| ~ delta^{p0:.3f}, |grad u_b| ~ delta^{p1:.3f}")
    print("PASS" if ok else "FAIL", "(expected +0.5 in [0.4,0.6] and -0.5 in [-0.6,-0.4])")
    out = _out_dir(args.out)
    path = os.path.join(out, "corrector.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# schema=sgchannel-corrector-v1\n")
        fh.write("delta,u_b_l2,grad_u_b_l2\n")
        for d, a, b in rows:
            fh.write(f"{d!r},{a!r},{b!r}\n")
    print(f"norms -> {path}")
    return 0 if ok else 1


def cmd_bench(args):
    grid = ChannelGrid(args.nx, args.ny)
    corpus = make_bench_corpus(grid, args.fields, seed=args.seed)
    report = inequality_bench(corpus)
    print(f"transport identity residual: {report.transport_identity_residual:.3e}")
    print(f"curl/gradient identity residual: {report.curl_norm_identity_residual:.3e}")
    print(f"L4 product constant: {report.ladyzhenskaya_constant:.4f}")
    print(f"H1 interpolation constant: {report.h1_interpolation_constant:.4f}")
    print(f"H3 recovery constant: {report.h3_recovery_constant:.4f}")
    for d, v in report.strip_poincare_constants.items():
        print(f"strip Poincare constant (delta={d}): {v:.4f}")
    print(f"strip Poincare log-log slope: {report.strip_poincare_slope:+.4f}")
    for note in report.skipped:
        print(f"skipped: {note}")
    ok = (
        report.transport_identity_residual <= 1e-10
        and report.curl_norm_identity_residual <= 1e-10
        and math.isfinite(report.ladyzhenskaya_constant)
        and math.isfinite(report.h1_interpolation_constant)
        and math.isfinite(report.h3_recovery_constant)
        and abs(report.strip_poincare_slope) <= 0.15
    )
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _oracle_cases():
    """(name, error, tolerance) for every independent-oracle comparison."""
    cases = []

    grid = ChannelGrid(8, 48)
    y = grid.y_nodes

    rhs = cheb_forward(-(np.pi**2 / 4.0) * np.cos(np.pi * y / 2.0))
    phi = solvers.solve_poisson_dirichlet(grid, 0, rhs)
    err = np.max(np.abs(cheb_inverse(phi) - np.cos(np.pi * y / 2.0)))
    cases.append(("poisson-dirichlet manufactured cos(pi y/2)", err, 1e-11))

    rhs = cheb_forward(12.0 * y**2 - 10.0)
    psi = solvers.solve_clamped_second_grade(grid, 0, 0.5, rhs)
    err = np.max(np.abs(cheb_inverse(psi) - (1.0 - y * y) ** 2))
    cases.append(("clamped fourth-order manufactured (1-y^2)^2", err, 1e-9))

    phi = solvers.solve_helmholtz_influence(grid, 0, 1.0, np.zeros(49), (1.0, 1.0))
    err = np.max(np.abs(cheb_inverse(phi) - np.cosh(y) / np.cosh(1.0)))
    cases.append(("helmholtz wall-driven cosh solution", err, 1e-10))

    rng = np.random.default_rng(1234)
    c = np.zeros(49)
    c[:20] = rng.normal(size=20) * np.exp(-0.3 * np.arange(20))
    rhs_nodal = cheb_inverse(c)
    psi_tau = solvers.solve_clamped_second_grade(grid, 2, 0.1, cheb_forward(rhs_nodal))
    psi_col = oracles.collocation_clamped(grid, 2, 0.1, rhs_nodal)
    err = np.max(np.abs(cheb_inverse(psi_tau) - psi_col)) / np.max(np.abs(psi_col))
    cases.append(("clamped solve vs dense collocation (k=2)", err, 1e-9))

    alpha, nu = 0.5, 0.00625
    g2 = ChannelGrid(8, 64)
    psi_s = velocity_from_stream(
        base_stream("clamped-poly", g2, epsilon=0.0, amplitude=1.0), no_slip=True
    )
    from .fields import q_from_u
    from .dynamics import branch_from_params

    traj = run(
        psi_s,
        branch_from_params(alpha, nu),
        StepControl(t_end=0.1, dt=1e-4, record_every=1000),
    )
    q0_nodal = transform_inverse(q_from_u(psi_s, alpha))[0, :]
    q_oracle = oracles.relaxation_trajectory(g2, alpha, nu, q0_nodal, 0.1)
    q_ours = transform_inverse(traj.final_state.q)[0, :]
    err = np.max(np.abs(q_ours - q_oracle)) / np.max(np.abs(q0_nodal))
    cases.append(("second-grade relaxation vs matrix exponential", err, 1e-8))

    nu = 0.1
    g3 = ChannelGrid(8, 64)
    from .spectral import transform_forward, zero_field
    from .fields import VelocityField

    u0 = VelocityField(
        transform_forward(g3, np.tile(np.cos(np.pi * g3.y_nodes / 2.0), (8, 1))),
        zero_field(g3),
        no_slip=True,
    )
    traj = run(
        u0, branch_from_params(0.0, nu), StepControl(t_end=1.0, dt=1e-3, record_every=1000)
    )
    exact = oracles.decaying_shear_velocity(g3, nu, 1.0)
    err = np.max(np.abs(transform_inverse(traj.final_state.u.u1)[0, :] - exact))
    cases.append(("navier-stokes decaying shear closed form", err, 1e-6))

    return cases


def cmd_oracle_check(_args):
    failures = 0
    for name, err, tol in _oracle_cases():
        ok = err <= tol
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'} {name}: err={err:.3e} tol={tol:.0e}")
    print("all oracle checks passed" if failures == 0 else f"{failures} oracle checks failed")
    return 0 if failures == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sgchannel",
        description=(
            "Pseudospectral channel solver for the second-grade fluid family "
            "(second-grade / Euler-alpha / Navier-Stokes / Euler) with "
            "wall-strip dissipation diagnostics"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configuration, write timeseries CSV")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scaling-path sweep, write sweep CSV")
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("classify", help="print the (alpha, nu) regime region")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--nu", type=float, required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("corrector-check", help="wall-corrector scaling fit report")
    p.add_argument("--nx", type=int, default=8)
    p.add_argument("--ny", type=int, default=256)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_corrector_check)

    p = sub.add_parser("bench-inequalities", help="functional-inequality bench")
    p.add_argument("--nx", type=int, default=48)
    p.add_argument("--ny", type=int, default=48)
    p.add_argument("--fields", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-check", help="run all independent-oracle comparisons")
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, dataio.SchemaError, dataio.SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
