"""Step paths on Skorokhod space: metrics, simple integrals, process
constructions and Monte Carlo diagnostics."""

from .errors import DomainError, SkolabError
from .paths import StepPath, make_step_path

__version__ = "0.1.0"

__all__ = ["StepPath", "make_step_path", "DomainError", "SkolabError", "__version__"]
