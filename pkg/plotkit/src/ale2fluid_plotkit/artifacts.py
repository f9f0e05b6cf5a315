"""Loading and validation of run artifacts.

The energy CSV starts with an optional `#` comment, then a fixed header.
Interface files hold `x y` lines, one blank-separated block per chain.
Wall profiles hold `x u` lines.  All extraction is deterministic: loading
the same directory twice yields byte-identical arrays.
"""

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_SCHEMA = ["step", "time", "K", "W", "Pv", "sigma", "euler_diss", "balance",
              "eps_g", "eps_gamma", "friction_power", "contact_power"]
COUETTE_EXTRAS = ["cl_x", "cl_slip", "far_u", "theta_top", "theta_bottom"]


class ArtifactError(ValueError):
    pass


@dataclass
class RunArtifacts:
    path: Path
    columns: dict          # name -> float array (nan for missing cells)
    steps: np.ndarray
    interfaces: dict       # step -> list of (n, 2) polylines
    wall_profiles: dict    # step -> (n, 2) array of (x, u)
    config: dict           # resolved key -> string value

    def column(self, name):
        if name not in self.columns:
            raise ArtifactError(
                f"column {name!r} not in {sorted(self.columns)} ({self.path})")
        return self.columns[name]

    @property
    def label(self):
        return self.path.name


def _parse_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    rows = [ln for ln in lines if ln and not ln.startswith("#")]
    header = rows[0].split(",")
    if header[:len(CSV_SCHEMA)] != CSV_SCHEMA:
        raise ArtifactError(f"unexpected CSV header in {path}: {rows[0]!r}")
    data = {name: [] for name in header}
    for ln in rows[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise ArtifactError(f"ragged CSV row in {path}: {ln!r}")
        for name, cell in zip(header, cells):
            data[name].append(float(cell) if cell != "" else np.nan)
    cols = {name: np.asarray(vals, dtype=float) for name, vals in data.items()}
    steps = cols["step"].astype(int)
    if np.any(np.diff(steps) <= 0):
        raise ArtifactError(f"step column is not strictly increasing in {path}")
    return cols, steps


def _parse_blocks(path):
    blocks = path.read_text(encoding="utf-8").strip().split("\n\n")
    out = []
    for block in blocks:
        pts = np.array([[float(v) for v in ln.split()]
                        for ln in block.splitlines()])
        out.append(pts)
    return out


def _indexed_files(run_dir, stem):
    pattern = re.compile(rf"{stem}_(\d+)\.txt$")
    found = {}
    for p in sorted(Path(run_dir).iterdir()):
        m = pattern.match(p.name)
        if m:
            found[int(m.group(1))] = p
    return found


def load_run(run_dir):
    run_dir = Path(run_dir)
    csv_path = run_dir / "energy.csv"
    if not csv_path.exists():
        raise ArtifactError(f"no energy.csv under {run_dir}")
    columns, steps = _parse_csv(csv_path)
    interfaces = {step: _parse_blocks(p)
                  for step, p in _indexed_files(run_dir, "interface").items()}
    wall = {step: _parse_blocks(p)[0]
            for step, p in _indexed_files(run_dir, "wallvel").items()}
    config = {}
    resolved = run_dir / "config.resolved"
    if resolved.exists():
        for ln in resolved.read_text(encoding="utf-8").splitlines():
            if "=" in ln:
                key, _, val = ln.partition("=")
                config[key.strip()] = val.strip()
    return RunArtifacts(path=run_dir, columns=columns, steps=steps,
                        interfaces=interfaces, wall_profiles=wall,
                        config=config)


def config_deltas(runs):
    """Per-run labels built from the config keys that differ across runs."""
    if len(runs) == 1:
        return {runs[0].path: runs[0].label}
    keys = sorted(set().union(*(r.config.keys() for r in runs)) - {"out", "csv_path"})
    varying = [k for k in keys
               if len({r.config.get(k) for r in runs}) > 1]
    labels = {}
    for r in runs:
        parts = [f"{k}={r.config.get(k, '?')}" for k in varying]
        labels[r.path] = ", ".join(parts) if parts else r.label
    return labels


def domain_box(run):
    """Wall rectangle (x0, x1, y0, y1) from the resolved configuration."""
    scenario = run.config.get("scenario", "")
    if scenario == "couette_gnbc":
        H = float(run.config["H"])
        L = float(run.config["L"])
        return (0.0, 4.0 * L, 0.0, H)
    return (-2.0, 2.0, 0.0, 2.0)
