"""Privacy-preserving contact tracing on location histories.

Three classifiers are provided: an exact two-party computation baseline
(``mpc``), a geo-indistinguishability baseline (``geoi``), and the hybrid
ContactGuard pipeline (``cg``) that perturbs locations, lets the server pick
a randomized high-risk subset, and runs the secure predicate only on it.
"""

from .errors import (ClassificationError, FramingError, HandshakeError, ProtocolError,
                     TransportError)
from .geo import (PerturbedSet, lambert_w_minus1, laplace_radius, perturb_location_set,
                  planar_laplace_sample, randomized_response)
from .model import (ContactParams, Location, Metrics, TemporalMode, TimestampedLocation,
                    Trajectory, confusion_metrics, is_contact_exact)
from .protocols import (ClassificationResult, Method, NoisyIndexSet, ServerState,
                        classify_population, classify_user, contactguard_classify,
                        geoi_classify, mpc_baseline_classify)

__version__ = "0.1.0"

__all__ = [
    "ClassificationError", "FramingError", "HandshakeError", "ProtocolError", "TransportError",
    "PerturbedSet", "lambert_w_minus1", "laplace_radius", "perturb_location_set",
    "planar_laplace_sample", "randomized_response",
    "ContactParams", "Location", "Metrics", "TemporalMode", "TimestampedLocation", "Trajectory",
    "confusion_metrics", "is_contact_exact",
    "ClassificationResult", "Method", "NoisyIndexSet", "ServerState", "classify_population",
    "classify_user", "contactguard_classify", "geoi_classify", "mpc_baseline_classify",
]
