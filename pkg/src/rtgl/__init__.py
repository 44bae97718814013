"""Run-time temporal graph learning toolkit."""
from ._backend import BACKEND_NAME
from .mm import Strategy, matmul, matmul_timed, transpose

__all__ = ["BACKEND_NAME", "Strategy", "matmul", "matmul_timed", "transpose"]
__version__ = "0.1.0"
