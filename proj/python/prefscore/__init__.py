"""Instruction-conditioned, reference-less preference metric toolkit.

Thin python surface over the C++ core: preference datasets, the pairwise
ranking loss, the scoring model, training setups, and the evaluation suite.
"""

from ._core import *  # noqa: F401,F403

__version__ = "0.1.0"
