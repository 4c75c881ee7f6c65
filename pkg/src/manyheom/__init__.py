"""Open many-body quantum dynamics in structured environments.

Dense-operator toolbox, bath fitting, a full hierarchical-equations-of-motion
solver for small systems, and a reduced two-body hierarchy whose cost is
independent of the particle number.
"""

__version__ = "0.1.0"
