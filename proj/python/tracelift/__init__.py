"""Tetrahedral finite element complexes and discrete trace extensions."""

from ._tracelift import *  # noqa: F401,F403
from ._tracelift import Error, ConfigError, StageError, MeshError  # noqa: F401

__version__ = "0.1.0"
