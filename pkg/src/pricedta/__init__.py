"""Priced timed automata with nonlinear prices: models, exact replay, transforms and SMT-based cost queries."""

from .errors import (
    DecodeIntegrityError,
    EncodeError,
    InadmissibleStepError,
    ModelError,
    NegativePriceError,
    NonCanonicalRunError,
    ParseError,
    PtaError,
    RangeError,
    SolverError,
    TransformError,
    UnsupportedInstanceError,
)
from .model import (
    ClockValuation,
    ConstantRate,
    Edge,
    GuardAtom,
    Lipschitz,
    Location,
    Network,
    Piecewise,
    Polynomial,
    PricedAutomaton,
    PwlStructure,
    Query,
    price_eval,
    validate,
)
from .parser import ModelDocument, load_model, parse_model, save_model, serialize_model
from .semantics import Configuration, Delay, Handshake, Null, Run, Switch, replay

__version__ = "0.1.0"
