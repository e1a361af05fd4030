"""Spatially resolved normal/superfluid density toolkit.

Five cross-validating computation routes (exact Fock oracle, condensate
closed form, boosted quasiparticle gas, winding-number path-integral Monte
Carlo, continuous matrix product states) plus a localized coherence theory
for superfluid distillation.  Natural units hbar = k_B = 1 throughout.
"""

__version__ = "0.1.0"

from .domain import Domain, NormalFluidField, VelocityField  # noqa: F401
from .errors import ToolkitError  # noqa: F401
