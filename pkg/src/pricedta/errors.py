"""Exception hierarchy shared by every module of the toolkit."""


class PtaError(Exception):
    """Base class for all toolkit errors."""


class ModelError(PtaError):
    """A model is structurally wrong or an operation received an invalid argument."""


class ParseError(ModelError):
    """Model or run file could not be read.

    Carries either a (line, column) pair for syntax errors or a JSON path for
    semantic ones.
    """

    def __init__(self, message, *, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        elif path is not None:
            where = f" at {path}"
        super().__init__(message + where)


class NegativePriceError(ModelError):
    """A price function evaluated to a negative value."""


class RangeError(ModelError):
    """An argument lies outside the declared domain of a Lipschitz price."""


class InadmissibleStepError(PtaError):
    """A run step violates a guard, invariant or synchronisation rule."""

    def __init__(self, message, index=None):
        self.index = index
        prefix = f"step {index}: " if index is not None else ""
        super().__init__(prefix + message)


class NonCanonicalRunError(PtaError):
    """Two delay steps follow each other."""


class TransformError(PtaError):
    """An automaton or run is outside the domain of the piecewise-to-linear transform."""


class EncodeError(PtaError):
    """The network/query pair cannot be compiled to SMT-LIB2."""


class DecodeIntegrityError(PtaError):
    """A solver model does not replay to the run it claims; signals an encoder bug."""


class SolverError(PtaError):
    """The external solver could not be started or answered garbage."""


class UnsupportedInstanceError(PtaError):
    """The exhaustive oracle was asked to solve an instance outside its class."""
