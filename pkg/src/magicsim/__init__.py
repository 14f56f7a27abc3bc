"""MAGIC stateful logic on a simulated 1T1R TaOx RRAM crossbar."""
from ._backend import NAME as BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
