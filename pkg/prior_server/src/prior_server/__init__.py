"""Reference prior server for the stdio wire protocol.

Serves bundled test models (``echo``, ``blur``) and user-registered wrappers
around real consistency models.  See README.md for the protocol and the
extension hook.
"""

from .models import ServerModel, blur_consistency, get, known_models, register
from .main import serve

__version__ = "0.1.0"
