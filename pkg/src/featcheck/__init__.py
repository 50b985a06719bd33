"""Compositional probabilistic model checking for dynamic software product lines.

Feature modules and feature controllers are written in a small guarded
command language, joined into an explicit MDP and analysed for extremal
reachability probabilities and expected accumulated costs.
"""

__version__ = "0.1.0"
