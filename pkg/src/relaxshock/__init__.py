"""relaxshock: a relaxation model for viscous compressible flow.

System assembly with its energy/entropy structure, a 1D finite-volume
solver exhibiting the Navier-Stokes relaxation limit, viscous and
relaxation shock profiles, Evans-function stability verification, and the
Godunov-variable / generating-potential machinery (Galilean and Lorentz
invariant) behind the model.
"""

__version__ = "0.1.0"

from . import thermo, model, sim1d, profiles, evans, lorentz, godunov  # noqa: F401
