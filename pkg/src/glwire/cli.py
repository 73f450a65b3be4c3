"""Command-line entry point.

Subcommands: normal-state, spectrum, resolvent-scan, decay-predict,
model-op, tdgl-run, verify.  Every subcommand takes --config PATH,
--out DIR, --log-level LEVEL.  Exit codes: 0 pass, 1 check failure,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .io_utils import write_csv, write_field_snapshot, write_json

log = logging.getLogger("glwire")

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


def _common(sub):
    sub.add_argument("--config", required=True, help="YAML run configuration")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--log-level", default="INFO")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glwire",
                                 description="normal-state stability laboratory "
                                             "for current-carrying wires")
    subs = ap.add_subparsers(dest="command", required=True)
    for name in ("normal-state", "spectrum", "resolvent-scan", "decay-predict",
                 "model-op", "tdgl-run", "verify"):
        _common(subs.add_parser(name))
    return ap


def _setup(args) -> tuple[RunConfig, Path]:
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), None)
                        or logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = parse_config(args.config)
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def cmd_normal_state(cfg: RunConfig, out: Path) -> int:
    from .normal_state import (build_normal_state, cauchy_riemann_residual,
                               current_intensity_endpoints,
                               current_intensity_min, normal_state_residual)
    dom, grid, p = cfg.build()
    ns = build_normal_state(dom, grid, p)
    X, Y = grid.node_xy()
    h = cfg.hash()
    write_csv(out / "phi_n.csv", ["x", "y", "phi_n"],
              zip(X.ravel(), Y.ravel(), ns.phi_n.ravel()), h)
    write_csv(out / "B_n.csv", ["x", "y", "B_n"],
              zip(X.ravel(), Y.ravel(), ns.B_n.ravel()), h)
    mx = 0.5 * (X[:-1, :] + X[1:, :])
    my = 0.5 * (Y[:, :-1] + Y[:, 1:])
    write_csv(out / "A_n_x.csv", ["x", "y", "A_x"],
              zip(mx.ravel(), Y[:-1, :].ravel(), ns.A_n.x.ravel()), h)
    write_csv(out / "A_n_y.csv", ["x", "y", "A_y"],
              zip(X[:, :-1].ravel(), my.ravel(), ns.A_n.y.ravel()), h)
    if ns.gamma is not None:
        write_csv(out / "zero_curve.csv", ["x", "y"], ns.gamma, h)
    summary = {
        "B_min": ns.B_min, "B_max": ns.B_max,
        "residual_force_balance": normal_state_residual(ns, p.c),
        "residual_cauchy_riemann": cauchy_riemann_residual(ns, p.c),
        "z1": ns.z1, "z2": ns.z2,
    }
    if ns.gamma is not None:
        summary["intensity_min_on_curve"] = current_intensity_min(ns, p.h)
        summary["intensity_endpoints"] = current_intensity_endpoints(ns, p.h)
    write_json(out / "normal_state.json", summary, h)
    log.info("normal state written to %s", out)
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, out: Path) -> int:
    from .normal_state import build_normal_state
    from .spectral import dirichlet_ground_energy, magnetic_ground_energy
    dom, grid, p = cfg.build()
    ns = build_normal_state(dom, grid, p)
    h_values = cfg.experiment.get("spectrum", {}).get("h_values", [p.h])
    rows = []
    for h in h_values:
        r = magnetic_ground_energy(ns, float(h), grid, dom)
        rows.append((float(h), r.value, r.residual))
    lam = dirichlet_ground_energy(grid, dom)
    write_csv(out / "spectrum.csv", ["h", "mu", "residual"], rows, cfg.hash())
    write_json(out / "spectrum.json",
               {"lambda_dirichlet": lam.value,
                "lambda_residual": lam.residual,
                "mu": {str(r[0]): r[1] for r in rows}}, cfg.hash())
    return EXIT_OK


def cmd_resolvent_scan(cfg: RunConfig, out: Path) -> int:
    from .normal_state import build_normal_state
    from .spectral import assemble_linearized_operator, resolvent_sup_over_gamma
    dom, grid, p = cfg.build()
    ns = build_normal_state(dom, grid, p)
    op = assemble_linearized_operator(ns, p.h, grid, dom)
    opts = cfg.experiment.get("resolvent-scan", {})
    nu = float(opts.get("nu", 0.0))
    gmax = float(opts.get("gamma_max",
                          2.0 * p.h * float(np.max(np.abs(ns.phi_n))) + 1.0))
    n_gamma = int(opts.get("n_gamma", 41))
    scan = resolvent_sup_over_gamma(op, nu, gmax, n_gamma=n_gamma)
    write_csv(out / "resolvent_scan.csv", ["gamma", "norm"],
              zip(scan.gammas, scan.norms), cfg.hash())
    write_json(out / "resolvent_scan.json",
               {"nu": nu, "sup": scan.sup_value, "tail_bound": scan.tail_bound,
                "sup_with_tail": scan.sup_with_tail,
                "gamma_range": list(scan.gamma_range)}, cfg.hash())
    return EXIT_OK


def cmd_decay_predict(cfg: RunConfig, out: Path) -> int:
    from .decay import (DecayInputs, decay_rate_asymptotic,
                        decay_rate_fixed_choice, decay_rate_optimized,
                        monotonicity_onset_time, stability_condition)
    from .normal_state import build_normal_state
    from .spectral import dirichlet_ground_energy, magnetic_ground_energy
    dom, grid, p = cfg.build()
    ns = build_normal_state(dom, grid, p)
    mu = magnetic_ground_energy(ns, p.h, grid, dom).value
    lam = dirichlet_ground_energy(grid, dom).value
    kappas = cfg.experiment.get("decay-predict", {}).get("kappa_values",
                                                         [p.kappa])
    rows = []
    for kap in kappas:
        inp = DecayInputs(mu=mu, lam=lam, c=p.c, kappa=float(kap))
        fx = decay_rate_fixed_choice(inp)
        op = decay_rate_optimized(inp)
        cond, _ = stability_condition(inp)
        try:
            asym = decay_rate_asymptotic(inp).rate
        except ValueError:
            asym = float("nan")
        rows.append((float(kap), op.regime, fx.rate, op.rate, asym, cond))
    write_csv(out / "decay_predict.csv",
              ["kappa", "regime", "rate_fixed", "rate_optimized",
               "rate_asymptotic", "condition_passes"], rows, cfg.hash())
    write_json(out / "decay_predict.json",
               {"mu": mu, "lambda": lam, "c": p.c,
                "onset_time_unit_field": monotonicity_onset_time(
                    p.kappa, 1.0, lam, p.c)}, cfg.hash())
    return EXIT_OK


def cmd_model_op(cfg: RunConfig, out: Path) -> int:
    from .model_ops import (ModelOpConfig, assemble_model_operator,
                            leftmost_eigenvalue, model_resolvent_sup,
                            reduced_model_estimate)
    opts = cfg.experiment.get("model-op", {})
    mcfg = ModelOpConfig(
        frak_j=float(opts.get("frak_j", 1.0)),
        c=float(opts.get("c", cfg.physics["kappa"] ** 2 / cfg.physics["sigma"])),
        half_width=float(opts.get("half_width", 12.0)),
        height=float(opts.get("height", 12.0)),
        nx=int(opts.get("nx", 240)), ny=int(opts.get("ny", 120)),
        variant=opts.get("variant", "half_plane"))
    op = assemble_model_operator(mcfg)
    if mcfg.variant == "half_plane":
        r = leftmost_eigenvalue(op, mcfg)
        nu_m = r.leftmost_real
        residual = r.residuals[0]
        scan = model_resolvent_sup(op, 0.0,
                                   3.0 * reduced_model_estimate(mcfg.frak_j, mcfg.c),
                                   n_gamma=17)
    else:
        nu_m = float("nan")
        residual = float("nan")
        scan = model_resolvent_sup(op, 0.0, 50.0, n_gamma=17)
    write_csv(out / "model_op.csv",
              ["variant", "frak_j", "c", "half_width", "height", "nx", "ny",
               "nu_m", "resolvent_sup", "residual"],
              [(mcfg.variant, mcfg.frak_j, mcfg.c, mcfg.half_width, mcfg.height,
                mcfg.nx, mcfg.ny, nu_m, scan.sup_value, residual)], cfg.hash())
    write_csv(out / "model_op_scan.csv", ["gamma", "norm"],
              zip(scan.gammas, scan.norms), cfg.hash())
    return EXIT_OK


def cmd_tdgl_run(cfg: RunConfig, out: Path) -> int:
    from .normal_state import build_normal_state
    from .tdgl import init_state, run
    dom, grid, p = cfg.build()
    ns = build_normal_state(dom, grid, p)
    opts = cfg.experiment.get("tdgl-run", {})
    snapshots = bool(opts.get("snapshots", False))
    mutation = opts.get("mutation", None)
    X, Y = grid.node_xy()
    psi0 = 0.8 * np.sin(np.pi * Y / dom.width).astype(complex)
    from .tdgl import scaling_coefficients
    coef = scaling_coefficients(cfg.solver["scaling"], p.kappa)
    st = init_state(psi0, (p.h * coef.s_A) * ns.A_n, dom, grid, p,
                    gauge=cfg.solver["gauge"], scaling=cfg.solver["scaling"],
                    ns=ns)
    series = run(ns, grid, dom, p, st, dt=cfg.solver["dt"],
                 t_final=cfg.solver["t_final"],
                 record_every=cfg.solver["record_every"],
                 mutation=mutation, snapshots=snapshots)
    header = ["t", "psi_l2", "psi_sup", "a1_l2", "phi1_l2", "grad_psi_l2",
              "energy_slack", "grad_phi1_l2", "supercurrent_l2"]
    write_csv(out / "tdgl_series.csv", header,
              ([row[k] for k in header] for row in series.row_dicts()),
              cfg.hash())
    write_json(out / "tdgl_summary.json",
               {"fitted_rate": series.fitted_rate,
                "fit_reliable": series.fit_reliable,
                "gauge": series.gauge, "scaling": series.scaling}, cfg.hash())
    if snapshots:
        for k, snap in enumerate(series.psi_abs_snapshots):
            write_field_snapshot(out / f"psi_abs_{k:04d}.bin", snap,
                                 grid.hx, grid.hy, float(series.t[k]),
                                 cfg.hash(), label="|psi|")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    from .harness import verify_all
    report, code = verify_all(cfg, out)
    for c in report.checks:
        print(c.line())
    print(f"overall: {'PASS' if report.all_pass else 'FAIL'}")
    return code


_COMMANDS = {
    "normal-state": cmd_normal_state,
    "spectrum": cmd_spectrum,
    "resolvent-scan": cmd_resolvent_scan,
    "decay-predict": cmd_decay_predict,
    "model-op": cmd_model_op,
    "tdgl-run": cmd_tdgl_run,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, out = _setup(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        return _COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as exc:
        log.exception("numerical failure")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
