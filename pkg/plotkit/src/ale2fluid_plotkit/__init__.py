"""Post-processing for ale2fluid runs.

Reads only the published on-disk formats (energy CSV, interface polylines,
wall-velocity profiles, resolved config echo) and regenerates the standard
figure types; the solver package is never imported.
"""

from .artifacts import RunArtifacts, load_run
from .figures import plot_energy_balance, plot_interface_profiles, \
    plot_wall_velocity

__all__ = ["RunArtifacts", "load_run", "plot_energy_balance",
           "plot_interface_profiles", "plot_wall_velocity"]
