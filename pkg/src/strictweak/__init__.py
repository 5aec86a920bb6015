"""Numerical laboratory for the strict-weak lattice polymer.

Submodules: ``specfun`` (special functions), ``polymer`` (simulation),
``moments`` (exact moments), ``fredholm`` (determinants), ``asymptotics``
(critical point, free energy, fluctuations), ``qtasep`` (geometric q-TASEP),
``stationary`` (stationary boundary model) and ``cli``.
"""

__version__ = "0.1.0"

from .specfun import DomainError, GammaParams, QParams  # noqa: E402
from .moments import NumericalFailure  # noqa: E402

__all__ = ["DomainError", "GammaParams", "QParams", "NumericalFailure", "__version__"]
