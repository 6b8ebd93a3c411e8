"""boxplain: abstraction-adjustable explanations of learned systems.

The engine answers questions about feed-forward networks and polynomial
regressors by propagating axis-aligned boxes through the model, keeping the
boxes that can satisfy the question, and covering the survivors with named
predicates from a domain pack.  Users steer the granularity of the answer
interactively (more / less abstract, ignore a predicate, travel back in
history); an HTTP service and a thin CLI client expose the loop.
"""

__version__ = "0.1.0"
