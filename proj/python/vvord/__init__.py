"""Volt/VAR rule simulation, equilibrium analysis and optimal rule design."""

from ._vvord import *  # noqa: F401,F403
from ._vvord import __version__  # noqa: F401
