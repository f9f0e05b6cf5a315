"""The standard figure types, rendered from loaded artifacts."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .artifacts import ArtifactError, config_deltas, domain_box

plt.rcParams.update({
    "figure.figsize": (7.0, 4.3),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
})


def _finish(fig, out):
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return out


def plot_energy_balance(runs, columns, out):
    """Time series of one or more CSV columns, one line per (run, column)."""
    if not columns:
        raise ArtifactError("no columns selected")
    for run in runs:
        for col in columns:
            run.column(col)        # validates the schema early
    labels = config_deltas(runs)
    fig, ax = plt.subplots()
    for run in runs:
        t = run.column("time")
        for col in columns:
            y = run.column(col)
            keep = ~np.isnan(y)
            name = col if len(runs) == 1 else f"{col} [{labels[run.path]}]"
            ax.plot(t[keep], y[keep], label=name, lw=1.2)
    ax.set_xlabel("time (reduced units)")
    ax.set_ylabel(" / ".join(columns) + " (reduced units)")
    ax.legend(fontsize=8)
    return _finish(fig, out)


def _select_steps(run, steps, available):
    if steps in (None, "last"):
        return [max(available)]
    out = []
    for s in steps:
        if s == "last":
            out.append(max(available))
        elif int(s) in available:
            out.append(int(s))
        else:
            raise ArtifactError(
                f"no file for step {s} in {run.path} (have {sorted(available)})")
    return out


def plot_interface_profiles(runs, steps, out):
    """Overlaid interface polylines with the wall rectangle drawn."""
    fig, ax = plt.subplots()
    labels = config_deltas(runs)
    for run in runs:
        if not run.interfaces:
            raise ArtifactError(f"no interface files in {run.path}")
        chosen = _select_steps(run, steps, set(run.interfaces))
        for step in chosen:
            for k, poly in enumerate(run.interfaces[step]):
                name = f"{labels[run.path]}, step {step}" if k == 0 else None
                ax.plot(poly[:, 0], poly[:, 1], lw=1.4, label=name)
    x0, x1, y0, y1 = domain_box(runs[0])
    ax.plot([x0, x1, x1, x0, x0], [y0, y0, y1, y1, y0], "k-", lw=0.8)
    ax.set_xlabel("x (reduced units)")
    ax.set_ylabel("y (reduced units)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)
    return _finish(fig, out)


def plot_wall_velocity(runs, steps, out):
    """Tangential wall velocity against x at the selected steps."""
    fig, ax = plt.subplots()
    labels = config_deltas(runs)
    for run in runs:
        if not run.wall_profiles:
            raise ArtifactError(f"no wall-velocity files in {run.path}")
        chosen = _select_steps(run, steps, set(run.wall_profiles))
        for step in chosen:
            prof = run.wall_profiles[step]
            t = step_time(run, step)
            suffix = f"t = {t:g}" if t is not None else f"step {step}"
            ax.plot(prof[:, 0], prof[:, 1], lw=1.2,
                    label=f"{labels[run.path]}, {suffix}")
    ax.set_xlabel("x (reduced units)")
    ax.set_ylabel("wall velocity (reduced units)")
    ax.legend(fontsize=8)
    return _finish(fig, out)


def step_time(run, step):
    idx = np.nonzero(run.steps == step)[0]
    if idx.size:
        return float(run.column("time")[idx[0]])
    return None
