"""Figure rendering for run and comparison reports (PNG, non-interactive)."""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, outdir, name):
    path = os.path.join(outdir, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_run_figures(trace, outdir, pu=True):
    """State/power overview figures for a single-model run."""
    os.makedirs(outdir, exist_ok=True)
    model = trace.meta.get("model", "run")
    t = trace.t
    written = []

    def channel(name):
        return trace.in_pu(name) if pu else trace.channels[name]

    groups = []
    if "i_delta_a" in trace.channels:  # aam
        groups = [("currents", [["i_delta_a", "i_delta_b", "i_delta_c"],
                                ["i_sigma_a", "i_sigma_b", "i_sigma_c"]]),
                  ("voltages", [["v_c_sigma_a", "v_c_sigma_b", "v_c_sigma_c"],
                                ["v_c_delta_a", "v_c_delta_b",
                                 "v_c_delta_c"]])]
    else:  # ssti
        groups = [("currents", [["i_delta_d", "i_delta_q"],
                                ["i_sigma_d", "i_sigma_q", "i_sigma_z"]]),
                  ("voltages", [["v_c_sigma_d", "v_c_sigma_q", "v_c_sigma_z"],
                                ["v_c_delta_d", "v_c_delta_q",
                                 "v_c_delta_zd", "v_c_delta_zq"]])]
    groups.append(("power", [["p_ac", "p_ref"], ["q_ac", "q_ref"]]))

    for title, panels in groups:
        fig, axes = plt.subplots(len(panels), 1, sharex=True,
                                 figsize=(8, 2.6 * len(panels)))
        if len(panels) == 1:
            axes = [axes]
        for ax, names in zip(axes, panels):
            for name in names:
                style = "--" if name.endswith("_ref") else "-"
                ax.plot(t, channel(name), style, lw=0.9, label=name)
            ax.legend(loc="best", fontsize=8)
            ax.grid(alpha=0.3)
        axes[-1].set_xlabel("t [s]")
        fig.suptitle("%s: %s%s" % (model, title, " [pu]" if pu else ""))
        written.append(_save(fig, outdir, "%s_%s.png" % (model, title)))
    return written


def render_compare_figures(aam_proj, ssti_trace, outdir, pu=True):
    """Overlay figures: AAM (projected, reference) vs SSTI per channel group."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    groups = [
        ("grid_current", ["i_delta_d", "i_delta_q"]),
        ("circulating_current", ["i_sigma_d", "i_sigma_q", "i_sigma_z"]),
        ("vc_sigma", ["v_c_sigma_d", "v_c_sigma_q", "v_c_sigma_z"]),
        ("vc_delta", ["v_c_delta_d", "v_c_delta_q"]),
        ("vc_delta_z", ["v_c_delta_z"]),
    ]
    for title, names in groups:
        fig, axes = plt.subplots(len(names), 1, sharex=True,
                                 figsize=(8, 2.2 * len(names)))
        if len(names) == 1:
            axes = [axes]
        for ax, name in zip(axes, names):
            for tr, label, style in ((aam_proj, "aam", "-"),
                                     (ssti_trace, "ssti", "--")):
                y = tr.in_pu(name) if pu else tr.channels[name]
                ax.plot(tr.t, y, style, lw=0.9, label="%s %s" % (label, name))
            ax.legend(loc="best", fontsize=8)
            ax.grid(alpha=0.3)
        axes[-1].set_xlabel("t [s]")
        fig.suptitle("compare: %s%s" % (title, " [pu]" if pu else ""))
        written.append(_save(fig, outdir, "compare_%s.png" % title))
    return written
