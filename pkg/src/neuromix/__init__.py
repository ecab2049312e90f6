"""Mixed-feedback neuron circuits.

Analysis and simulation of membrane models built from saturating feedback
elements acting on separated timescales: timescale-indexed I-V curves,
regime prediction, fixed-step simulation, conductance-model reduction,
small networks, and mapping to transconductor-based hardware.
"""

__version__ = "0.1.0"

from .core import (
    FeedbackElement,
    InvalidSpecError,
    NeuronSpec,
    PassiveElement,
    ValidationReport,
    mixed_feedback_spec,
)

__all__ = [
    "FeedbackElement",
    "InvalidSpecError",
    "NeuronSpec",
    "PassiveElement",
    "ValidationReport",
    "mixed_feedback_spec",
    "__version__",
]
