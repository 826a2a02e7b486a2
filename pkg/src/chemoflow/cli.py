"""Command-line entry point.

Subcommands: run, sweep-eps, sweep-m, refine, barenblatt, heat-test, check.
Every config key is also a flag (--key=value or --key value), applied over
the file given by --config, which is applied over the defaults.

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure,
3 monitor failure.
"""

import math
import os
import sys

import numpy as np

from .config import RunConfig, apply_overrides, load_config, parse_config
from .diagnostics import (check_c_monotone, check_energy_boundedness,
                          check_gradc_budget, check_mass_bound)
from .errors import (CflViolationError, ConfigError, InputDomainError,
                     NumericalFailureError, RunAbortedError, SetupError)
from .harness import (barenblatt_test, eps_sweep, heat_mode_test, m_sweep,
                      refinement_study, run)
from .io_formats import (CsvWriter, read_checkpoint, read_history,
                         write_checkpoint, write_snapshot)

USAGE = """\
usage: chemoflow <command> [--config FILE] [--key=value ...]

commands:
  run         advance one scenario; writes history.csv, snapshots, checkpoint
  sweep-eps   run the scenario across --eps-list and report Cauchy ratios
  sweep-m     run the scenario across --m-list
  refine      weak-form residual refinement study across --grids
  barenblatt  degenerate-diffusion oracle (exact self-similar solution)
  heat-test   m=1 diffusion oracle against the discrete eigenvalue decay
  check       re-run the monitor suite on an existing output directory

exit codes: 0 pass, 1 usage, 2 numerical failure, 3 monitor failure
"""


def _parse_scalar(text):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _parse_value(text):
    if "," in text:
        return [_parse_scalar(tok) for tok in text.split(",") if tok != ""]
    return _parse_scalar(text)


def _split_args(args):
    """Returns (options dict, positionals); --key=value and --key value."""
    opts = {}
    positional = []
    i = 0
    while i < len(args):
        arg = args[i]
        if arg.startswith("--"):
            body = arg[2:]
            if "=" in body:
                key, val = body.split("=", 1)
            else:
                key = body
                i += 1
                if i >= len(args):
                    raise ConfigError(f"--{key}: missing value")
                val = args[i]
            opts[key.replace("-", "_")] = _parse_value(val)
        else:
            positional.append(arg)
        i += 1
    return opts, positional


_CLI_ONLY = ("config", "restart", "eps_list", "m_list", "grids", "dt_coef",
             "t0", "t1", "dt", "richardson", "quiet")


def _build_config(opts):
    path = opts.get("config")
    overrides = {k: v for k, v in opts.items() if k not in _CLI_ONLY}
    if path:
        cfg = load_config(path, overrides=overrides)
    else:
        cfg = apply_overrides(RunConfig(), {k: (k, v)
                                            for k, v in overrides.items()})
    cfg.threads = int(os.environ.get("CHEMOFLOW_THREADS", "0") or 0)
    return cfg


def _prepare_outdir(cfg):
    os.makedirs(cfg.outdir, exist_ok=True)
    with open(os.path.join(cfg.outdir, "params.toml"), "w",
              encoding="utf-8") as fh:
        fh.write(cfg.as_toml())
    return cfg.outdir


def _monitor_exit(verdicts):
    for v in verdicts:
        print(v)
    return 0 if all(v.passed for v in verdicts) else 3


def cmd_run(args):
    opts, _ = _split_args(args)
    cfg = _build_config(opts)
    outdir = _prepare_outdir(cfg)
    scenario = cfg.scenario()
    restart = opts.get("restart")
    state = read_checkpoint(restart) if restart else None

    csv_path = os.path.join(outdir, cfg.csv_name)
    snap_count = [0]

    def on_sample(st):
        if cfg.snapshot_dt > 0 and _is_multiple(st.t, cfg.snapshot_dt):
            write_snapshot(st, os.path.join(
                outdir, f"snap_t{st.t:012.6f}.vtk"))
            snap_count[0] += 1
        if cfg.checkpoint_dt > 0 and _is_multiple(st.t, cfg.checkpoint_dt):
            write_checkpoint(st, os.path.join(
                outdir, f"checkpoint_t{st.t:012.6f}.chk"))

    with CsvWriter(csv_path, append=restart is not None) as writer:
        result = run(scenario, outdir=outdir, writer=writer, state=state,
                     on_sample=on_sample)
    write_checkpoint(result.final_state, os.path.join(outdir, "final.chk"))
    write_snapshot(result.final_state, os.path.join(outdir, "final.vtk"))
    print(f"run complete: {result.steps} steps to t={result.final_state.t:g} "
          f"in {result.wall_time:.2f}s ({csv_path})")
    code = _monitor_exit(result.monitors)
    with open(os.path.join(outdir, "monitors.txt"), "w",
              encoding="utf-8") as fh:
        for v in result.monitors:
            fh.write(str(v) + "\n")
    return code


def _is_multiple(t, interval):
    k = t / interval
    return abs(k - round(k)) < 1e-9 and round(k) > 0


def _write_sweep(report, outdir, stem):
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, f"{stem}.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# pairwise L2(Omega x (0,T)) distances, axis={report.axis}\n")
        fh.write("value," + ",".join("%.17g" % v for v in report.values) + "\n")
        for i, row in enumerate(report.pairwise_dist):
            fh.write("%.17g," % report.values[i]
                     + ",".join("%.17g" % v for v in row) + "\n")
        fh.write("cauchy_ratios,"
                 + ",".join("%.17g" % r for r in report.cauchy_ratios) + "\n")
        fh.write("# pairwise distances of (n+eps)^(m/2)\n")
        for i, row in enumerate(report.pairwise_dist_pow):
            fh.write("pow_%.17g," % report.values[i]
                     + ",".join("%.17g" % v for v in row) + "\n")
    with open(os.path.join(outdir, f"{stem}_summary.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(f"axis: {report.axis}\nvalues: {report.values}\n")
        fh.write(f"cauchy_ratios: {report.cauchy_ratios}\n")
        for v, s, e in zip(report.values, report.summaries, report.errors):
            fh.write(f"{report.axis}={v}: {s if not e else 'ERROR ' + e}\n")
    print(f"sweep written to {path}")
    print("cauchy ratios:", ", ".join("%.4f" % r for r in report.cauchy_ratios))
    return 2 if any(report.errors) else 0


def cmd_sweep_eps(args):
    opts, _ = _split_args(args)
    eps_list = opts.pop("eps_list", [1e-1, 1e-2, 1e-3, 1e-4])
    if not isinstance(eps_list, list):
        eps_list = [eps_list]
    cfg = _build_config(opts)
    if cfg.sample_dt <= 0:
        cfg.sample_dt = 0.05
    report = eps_sweep(cfg.scenario(), [float(e) for e in eps_list])
    return _write_sweep(report, cfg.outdir, "sweep_eps")


def cmd_sweep_m(args):
    opts, _ = _split_args(args)
    m_list = opts.pop("m_list", [0.5, 1.0, 2.0])
    if not isinstance(m_list, list):
        m_list = [m_list]
    cfg = _build_config(opts)
    if cfg.sample_dt <= 0:
        cfg.sample_dt = 0.05
    report = m_sweep(cfg.scenario(), [float(m) for m in m_list])
    return _write_sweep(report, cfg.outdir, "sweep_m")


def cmd_refine(args):
    opts, _ = _split_args(args)
    grids = opts.pop("grids", [32, 64, 128])
    if not isinstance(grids, list):
        grids = [grids]
    dt_coef = float(opts.pop("dt_coef", 0.15))
    cfg = _build_config(opts)
    out = refinement_study(cfg.scenario(), cell_counts=[int(g) for g in grids],
                           dt_coef=dt_coef)
    os.makedirs(cfg.outdir, exist_ok=True)
    path = os.path.join(cfg.outdir, "refine.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("cells,res_n,res_c,res_u\n")
        for k, nc in enumerate(out["cells"]):
            fh.write("%d,%.17g,%.17g,%.17g\n" % (
                nc, out["residuals"]["n"][k], out["residuals"]["c"][k],
                out["residuals"]["u"][k]))
        for key in ("n", "c", "u"):
            fh.write(f"orders_{key}," + ",".join(
                "%.17g" % o for o in out["orders"][key]) + "\n")
    print(f"refinement written to {path}")
    for key in ("n", "c", "u"):
        print(f"  {key}: residuals "
              + " ".join("%.3e" % r for r in out["residuals"][key])
              + "  orders " + " ".join("%.2f" % o for o in out["orders"][key]))
    return 0


def cmd_barenblatt(args):
    opts, _ = _split_args(args)
    m = float(opts.pop("m", 2.0))
    cells = opts.pop("cells", [128, 128])
    if not isinstance(cells, list):
        cells = [cells, cells]
    t0 = float(opts.pop("t0", 1.0))
    t1 = float(opts.pop("t1", 1.5))
    refine = opts.pop("refine", None)
    cfg = _build_config(opts) if opts else RunConfig()
    os.makedirs(cfg.outdir, exist_ok=True)
    grids = ([int(g) for g in refine] if isinstance(refine, list)
             else [int(refine)] if refine else [int(cells[0])])
    rows = []
    final = None
    for nc in grids:
        res = barenblatt_test(m, tuple(nc for _ in cells), t0, t1)
        rows.append((nc, res["l1_error"], res["relative"]))
        final = res["final_state"]
        print(f"barenblatt m={m} {nc}^2: L1 error {res['l1_error']:.6e} "
              f"({100 * res['relative']:.3f}% of mass)")
    with open(os.path.join(cfg.outdir, "barenblatt_refine.csv"), "w",
              encoding="utf-8") as fh:
        fh.write("cells,l1_error,relative\n")
        for nc, err, rel in rows:
            fh.write("%d,%.17g,%.17g\n" % (nc, err, rel))
    write_snapshot(final, os.path.join(cfg.outdir, "barenblatt_final.vtk"))
    return 0


def cmd_heat_test(args):
    opts, _ = _split_args(args)
    cells = opts.pop("cells", [64, 64])
    if not isinstance(cells, list):
        cells = [cells, cells]
    t1 = float(opts.pop("t1", 0.1))
    dt = float(opts.pop("dt", 5e-4))
    richardson = bool(opts.pop("richardson", False))
    err = heat_mode_test(tuple(int(c) for c in cells), t1=t1, dt=dt)
    print(f"heat-test {cells} t1={t1} dt={dt}: max error {err:.6e}")
    if richardson:
        err2 = heat_mode_test(tuple(int(c) for c in cells), t1=t1, dt=0.5 * dt)
        print(f"  dt/2 error {err2:.6e}, ratio {err / err2:.3f}")
    return 0


def cmd_check(args):
    opts, positional = _split_args(args)
    outdir = positional[0] if positional else opts.get("outdir", "out")
    params_path = os.path.join(outdir, "params.toml")
    csv_path = None
    for name in ("history.csv",):
        cand = os.path.join(outdir, name)
        if os.path.exists(cand):
            csv_path = cand
    if not os.path.exists(params_path) or csv_path is None:
        raise ConfigError(f"{outdir}: missing params.toml or history.csv")
    with open(params_path, encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    history = read_history(csv_path)
    if not history:
        raise ConfigError(f"{csv_path}: empty history")
    params = cfg.scenario().params
    volume = float(np.prod(cfg.lengths))
    verdicts = [
        check_mass_bound(history, params, volume, tol=cfg.tol_mass),
        check_c_monotone(history, tol=cfg.tol_c),
        check_gradc_budget(history, cfg.c_level ** 2 * volume,
                           tol=cfg.tol_budget),
    ]
    finite = all(all(np.isfinite(v) for v in rec.as_row())
                 for rec in history)
    from .diagnostics import MonitorVerdict
    verdicts.append(MonitorVerdict("all_finite", finite,
                                   0.0 if finite else math.inf, 0.0, 0.0))
    div_worst = max(rec.div_u_max for rec in history)
    verdicts.append(MonitorVerdict("incompressibility",
                                   div_worst <= cfg.lin_tol * 10,
                                   div_worst, cfg.lin_tol * 10, 0.0))
    return _monitor_exit(verdicts)


COMMANDS = {
    "run": cmd_run,
    "sweep-eps": cmd_sweep_eps,
    "sweep-m": cmd_sweep_m,
    "refine": cmd_refine,
    "barenblatt": cmd_barenblatt,
    "heat-test": cmd_heat_test,
    "check": cmd_check,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ("-h", "--help", "help"):
        print(USAGE)
        return 0 if argv else 1
    cmd = argv[0]
    handler = COMMANDS.get(cmd)
    if handler is None:
        print(f"unknown command {cmd!r}\n{USAGE}", file=sys.stderr)
        return 1
    try:
        return handler(argv[1:])
    except (ConfigError, InputDomainError, SetupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailureError, CflViolationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except RunAbortedError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        if exc.checkpoint_path:
            print(f"checkpoint: {exc.checkpoint_path}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
