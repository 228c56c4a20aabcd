"""dagforge: compile natural-language workflows into typed, effect-aware DAGs and run them."""

__version__ = "0.1.0"

# The graph package must initialize before the expression language: its
# validators use the checker, while the checker only needs the type helpers
# in ``graph.model``.
from . import graph  # noqa: E402,F401
