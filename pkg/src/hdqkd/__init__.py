"""Secure-key-rate bounds for time-energy entanglement high-dimensional QKD."""
from .config import RunConfig, builtin_config, load_config
from .channel import EventProbabilities, LinkParams, event_probabilities, postselect_probability
from .errors import DomainError, NumericalError
from .holevo import HolevoResult, holevo_given_gamma, holevo_upper_bound
from .interferometry import DetectorParams, InterferometerKind, InterferometerParams, VisibilityReading
from .pipeline import Scenario, build_scenario, evaluate_point, sweep
from .rate import ProtocolParams, RateBreakdown, secure_key_rate, shannon_information
from .source import SourceMoments, SourceParams, derive_moments, nominal_tfcm
from .tfcm import TFCM, FamilyParams, NoiseBounds, family_member, in_constraint_set, is_physical

__version__ = "0.1.0"
