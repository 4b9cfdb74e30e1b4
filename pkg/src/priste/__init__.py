"""Release-time protection of spatiotemporal events in location streams.

A Markov mobility model is lifted into a two-world chain so event
probabilities become vector-matrix products; a release is committed only if
the likelihood ratio between the event and its negation stays within
``e^epsilon`` for every initial distribution an adversary might hold.
"""
from .checker import (CheckerConfig, CheckResult, Decision, EventState, FeasibleSet, QuadraticCondition,
                      assemble_conditions, build_check_vectors, check_all_events, check_privacy,
                      conditions_from_projected, exact_simplex_maximum)
from .events import Event, EventError, EventKind, GridMap, MissingTimestampError, Region, evaluate_event
from .lppm import (PlanarLaplace, compute_delta_set, plm_emission_matrix, plm_sample, posterior_update,
                   restricted_plm_emission, uniform_emission_matrix)
from .markov import (DegenerateEventError, InconsistentObservationError, complement_joint_probability,
                     forward_backward_posterior,
                     joint_probability, leakage_ratio, lift_transition, observation_likelihood,
                     prior_probability)
from .runtime import (PrivacySession, ReleaseRecord, SessionConfig, release_deltaloc, release_geoind,
                      replay_trace, run_session, summarize)

__version__ = "0.1.0"
