"""Argument checks shared by the estimator wrappers and the CLI."""
import math
from numbers import Real

from .core import FieldState
from .errors import InvalidParameterError
from .linwave import RadiationProfile
from .nlsolve import SimulationRecord


def check_positive(value, name, strict=True):
    if not isinstance(value, Real) or not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be a finite real number, got {value!r}")
    if (value <= 0) if strict else (value < 0):
        raise InvalidParameterError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value!r}")
    return float(value)


def check_interval(pair, name):
    try:
        a, b = (float(x) for x in pair)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{name} must be a pair of numbers, got {pair!r}") from None
    if not a < b:
        raise InvalidParameterError(f"{name} must satisfy lower < upper, got {pair!r}")
    return a, b


def check_state(obj, name="state"):
    if not isinstance(obj, FieldState):
        raise InvalidParameterError(f"{name} must be a FieldState, got {type(obj).__name__}")
    return obj


def check_profile(obj, direction=None, name="profile"):
    if not isinstance(obj, RadiationProfile):
        raise InvalidParameterError(f"{name} must be a RadiationProfile, got {type(obj).__name__}")
    if direction is not None and obj.direction != direction:
        raise InvalidParameterError(f"{name} must have direction {direction!r}, got {obj.direction!r}")
    return obj


def check_record(obj, name="record"):
    if not isinstance(obj, SimulationRecord):
        raise InvalidParameterError(f"{name} must be a SimulationRecord, got {type(obj).__name__}")
    return obj


def check_is_fitted(est, attr):
    if not hasattr(est, attr):
        from sklearn.exceptions import NotFittedError

        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")
