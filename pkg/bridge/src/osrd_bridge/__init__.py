"""External denoiser server speaking the OSRD wire protocol."""

from .backends import DiffusionBackend, EchoBackend, make_backend
from .server import Server, serve

__version__ = "0.1.0"
__all__ = ["DiffusionBackend", "EchoBackend", "make_backend", "Server", "serve"]
