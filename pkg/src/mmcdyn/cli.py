"""Command-line front end.

Subcommands::

    mmcdyn run       --params paper.cfg --scenario paper.scn --model both --out DIR
    mmcdyn compare   --params paper.cfg --scenario paper.scn --out DIR
    mmcdyn linearize --params paper.cfg --p-ref 1.0 --q-ref 0.0 --out DIR
    mmcdyn eig       --params paper.cfg --p-ref 1.0 --q-ref 0.0 [--out DIR]

Bare file names are resolved against $MMCDYN_CONFIG_DIR (default: the packaged
data directory). Traces are written as CSV with a header row and a units row;
`compare` also renders overlay figures and exits nonzero if any cross-model
acceptance bound is violated.
"""

import argparse
import os
import sys

import numpy as np

from mmcdyn import analysis, params, plotting, sim
from mmcdyn.control import Refs
from mmcdyn.ssti import ssti_rhs


# ---------------------------------------------------------------------------
# trace CSV I/O
# ---------------------------------------------------------------------------

def _base_for(name, unit, p):
    if unit == "A":
        return p.i_base_ac
    if unit == "V":
        return p.v_base_dc if name.startswith("v_c_") else p.v_base_ac
    if unit == "W":
        return p.s_base
    return 1.0


def trace_to_csv(trace, path, pu=False):
    """Write a TraceLog as CSV: header row, units row, then fixed-format data."""
    names = list(trace.channels)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("t," + ",".join(names) + "\n")
        units = ["pu" if (pu and trace.bases.get(n, 1.0) != 1.0)
                 else trace.units[n] for n in names]
        handle.write("s," + ",".join(units) + "\n")
        cols = [trace.in_pu(n) if pu else trace.channels[n] for n in names]
        data = np.column_stack([trace.t] + cols)
        for row in data:
            handle.write(",".join("%.8e" % v for v in row) + "\n")


def trace_from_csv(path, p=None):
    """Read a trace CSV back into a TraceLog.

    Per-unit bases are reconstructed from the units row (pass `p` for SI
    traces; pu traces need no bases).
    """
    with open(path, "r", encoding="utf-8") as handle:
        names = handle.readline().strip().split(",")
        units = handle.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    if data.ndim == 1:
        data = data[None, :]
    t = data[:, 0]
    channels, unit_map, bases = {}, {}, {}
    for j, name in enumerate(names[1:], start=1):
        unit = units[j]
        channels[name] = data[:, j]
        unit_map[name] = unit
        if unit in ("A", "V", "W"):
            if p is None:
                raise ValueError("SI trace %s needs --params for pu bases"
                                 % path)
            bases[name] = _base_for(name, unit, p)
        else:
            bases[name] = 1.0
    return sim.TraceLog(t=t, channels=channels, units=unit_map, bases=bases,
                        meta={"source": path})


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _load_common(args):
    p = params.load_params(params.resolve_config_path(args.params))
    sc = sim.load_scenario(params.resolve_config_path(args.scenario)) \
        if getattr(args, "scenario", None) else None
    return p, sc


def _warm_starts(p, sc):
    refs = Refs(*sc.initial_refs)
    y_aam, y_ssti, _eq = analysis.prepare_warm_start(p, refs)
    return {"aam": y_aam, "ssti": y_ssti}


def cmd_run(args):
    p, sc = _load_common(args)
    os.makedirs(args.out, exist_ok=True)
    models = ["aam", "ssti"] if args.model == "both" else [args.model]
    warm = _warm_starts(p, sc) if args.warm_start else {}
    for model in models:
        trace = sim.run_scenario(model, sc, p, dt=args.dt,
                                 warm_start=warm.get(model))
        out_csv = os.path.join(args.out, "%s_trace.csv" % model)
        trace_to_csv(trace, out_csv, pu=args.pu)
        print("wrote %s (%d samples, dt=%g s)"
              % (out_csv, trace.t.size, trace.dt))
        if trace.meta["index_violation"]:
            print("warning: insertion-index range violation at t=%s ..."
                  % trace.meta["index_violation_times"][:3], file=sys.stderr)
        if not args.no_figures:
            for path in plotting.render_run_figures(trace, args.out,
                                                    pu=args.pu):
                print("wrote %s" % path)
    return 0


def cmd_compare(args):
    p, sc = _load_common(args)
    os.makedirs(args.out, exist_ok=True)
    if args.aam_csv or args.ssti_csv:
        if not (args.aam_csv and args.ssti_csv):
            raise SystemExit("--aam-csv and --ssti-csv must be given together")
        aam_trace = trace_from_csv(args.aam_csv, p)
        ssti_trace = trace_from_csv(args.ssti_csv, p)
    else:
        warm = {} if args.flat_start else _warm_starts(p, sc)
        aam_trace = sim.run_scenario("aam", sc, p, warm_start=warm.get("aam"))
        ssti_trace = sim.run_scenario("ssti", sc, p,
                                      warm_start=warm.get("ssti"))
        trace_to_csv(aam_trace, os.path.join(args.out, "aam_trace.csv"),
                     pu=args.pu)
        trace_to_csv(ssti_trace, os.path.join(args.out, "ssti_trace.csv"),
                     pu=args.pu)

    if "i_delta_a" in aam_trace.channels:
        proj = analysis.project_aam_trace(aam_trace, p)
    else:
        proj = aam_trace  # already projected (loaded from a projected CSV)
    report, violations = analysis.evaluate_comparison(proj, ssti_trace, sc, p)

    report_path = os.path.join(args.out, "compare_report.csv")
    with open(report_path, "w", encoding="utf-8") as handle:
        handle.write(report.to_csv_text())
    summary_path = os.path.join(args.out, "compare_summary.txt")
    with open(summary_path, "w", encoding="utf-8") as handle:
        handle.write(report.summary_text())
        for line in violations:
            handle.write("VIOLATION: %s\n" % line)
    print(report.summary_text(), end="")
    print("wrote %s" % report_path)
    if not args.no_figures:
        for path in plotting.render_compare_figures(proj, ssti_trace,
                                                    args.out, pu=True):
            print("wrote %s" % path)
    if violations:
        for line in violations:
            print("VIOLATION: %s" % line, file=sys.stderr)
        return 1
    print("all cross-model bounds satisfied")
    return 0


def _write_matrix(path, matrix, row_labels=None, col_labels=None):
    with open(path, "w", encoding="utf-8") as handle:
        if col_labels:
            handle.write("," + ",".join(col_labels) + "\n")
        for i, row in enumerate(np.atleast_2d(matrix)):
            prefix = (row_labels[i] + ",") if row_labels else ""
            handle.write(prefix + ",".join("%.9e" % v for v in row) + "\n")


def _equilibrium_pipeline(args):
    p = params.load_params(params.resolve_config_path(args.params))
    refs = Refs(args.p_ref, args.q_ref)
    eq = analysis.find_equilibrium(p, refs)
    lm = analysis.closed_loop_linear_model(p, refs, eq)
    vals = analysis.eigenvalues(lm.a_matrix)
    return p, refs, eq, lm, vals


def cmd_linearize(args):
    p, refs, eq, lm, vals = _equilibrium_pipeline(args)
    os.makedirs(args.out, exist_ok=True)
    scales = analysis.state_scales(p)
    with open(os.path.join(args.out, "equilibrium.csv"), "w",
              encoding="utf-8") as handle:
        handle.write("state,value_pu,value_si\n")
        for label, z, x in zip(lm.state_labels, eq.y_star / scales,
                               eq.y_star):
            handle.write("%s,%.9e,%.9e\n" % (label, z, x))
    _write_matrix(os.path.join(args.out, "a_matrix.csv"), lm.a_matrix,
                  row_labels=lm.state_labels, col_labels=lm.state_labels)
    # open-loop plant input matrix at the equilibrium (pu states, raw inputs)
    from mmcdyn.ssti import INPUT_LABELS, STATE_LABELS

    def f_plant(x_pu, u):
        x_si = x_pu * scales[:12]
        dx = ssti_rhs(x_si, u[0], u[1], u[2], u[3], u[4], u[5], u[6],
                      u[7], u[8], u[9], p)
        return np.asarray(dx) / scales[:12]

    u0 = np.concatenate([eq.u_star.m_sigma_dqz, eq.u_star.m_delta_dqZ,
                         eq.u_star.v_g_dq, [eq.u_star.v_dc]])
    plant_lm = analysis.linearize(f_plant, eq.y_star[:12] / scales[:12], u0,
                                  state_labels=STATE_LABELS,
                                  input_labels=INPUT_LABELS)
    _write_matrix(os.path.join(args.out, "b_matrix.csv"), plant_lm.b_matrix,
                  row_labels=STATE_LABELS, col_labels=INPUT_LABELS)
    _write_eigs(os.path.join(args.out, "eigenvalues.csv"), vals)
    _print_spectrum(eq, vals)
    return 0


def _write_eigs(path, vals):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("real,imag\n")
        for v in vals:
            handle.write("%.9e,%.9e\n" % (v.real, v.imag))


def _print_spectrum(eq, vals):
    print("equilibrium residual: %.3e pu/s" % eq.residual_norm)
    print("dominant modes (real part descending):")
    for v in vals[:6]:
        print("  %12.4f %+12.4fj   (f = %.2f Hz, damping %.4f)"
              % (v.real, v.imag, abs(v.imag) / (2 * np.pi),
                 -v.real / max(abs(v), 1e-12)))
    stable = bool(np.all(vals.real < 0))
    print("spectrum %s" % ("stable (all real parts < 0)"
                           if stable else "UNSTABLE"))


def cmd_eig(args):
    _p, _refs, eq, _lm, vals = _equilibrium_pipeline(args)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_eigs(os.path.join(args.out, "eigenvalues.csv"), vals)
    _print_spectrum(eq, vals)
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="mmcdyn", description="dual-model MMC simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        sp.add_argument("--params", default="paper.cfg",
                        help="parameter config (path or packaged name)")
        if scenario:
            sp.add_argument("--scenario", default="paper.scn",
                            help="scenario file (path or packaged name)")
        sp.add_argument("--out", default="out", help="output directory")

    sp = sub.add_parser("run", help="simulate one or both models")
    common(sp)
    sp.add_argument("--model", choices=["aam", "ssti", "both"],
                    default="both")
    sp.add_argument("--dt", type=float, default=None,
                    help="integration step override [s]")
    sp.add_argument("--pu", action="store_true",
                    help="export channels in per-unit")
    sp.add_argument("--warm-start", action="store_true",
                    help="start from the equilibrium of the initial refs")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="cross-model validation gate")
    common(sp)
    sp.add_argument("--aam-csv", help="pre-computed AAM trace CSV")
    sp.add_argument("--ssti-csv", help="pre-computed SSTI trace CSV")
    sp.add_argument("--flat-start", action="store_true",
                    help="use the flat start instead of warm equilibria")
    sp.add_argument("--pu", action="store_true")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("linearize", help="equilibrium + A/B + spectrum")
    common(sp, scenario=False)
    sp.add_argument("--p-ref", type=float, required=True)
    sp.add_argument("--q-ref", type=float, required=True)
    sp.set_defaults(func=cmd_linearize)

    sp = sub.add_parser("eig", help="equilibrium spectrum only")
    common(sp, scenario=False)
    sp.add_argument("--p-ref", type=float, required=True)
    sp.add_argument("--q-ref", type=float, required=True)
    sp.set_defaults(func=cmd_eig)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (sim.BlowupError, sim.ScenarioError, analysis.NewtonError,
            params.ParamError, ValueError, KeyError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
