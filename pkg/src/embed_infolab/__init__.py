"""Information-theoretic analyses of LLM embedding tensors."""

from . import covdist, entropy, infogain, scaling_sim, tensor_io, token_select
from .errors import InfolabError

__all__ = [
    "covdist",
    "entropy",
    "infogain",
    "scaling_sim",
    "tensor_io",
    "token_select",
    "InfolabError",
]

__version__ = "0.1.0"
