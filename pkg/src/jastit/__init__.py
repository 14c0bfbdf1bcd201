"""Parsing, model checking, proof checking and bounded model search for the
stit logic of justification announcements."""

from .model import *  # noqa: F401,F403
from .proofs import *  # noqa: F401,F403
from .search import *  # noqa: F401,F403
from .semantics import *  # noqa: F401,F403
from .syntax import *  # noqa: F401,F403
from . import model, proofs, search, semantics, syntax

__all__ = model.__all__ + proofs.__all__ + search.__all__ + semantics.__all__ + syntax.__all__
