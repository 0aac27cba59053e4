"""Exception types shared across the package."""


class CbsError(Exception):
    """Base class for all package errors."""


class SizeLimitError(CbsError, ValueError):
    """An exhaustive routine was asked to work beyond its size cap."""


class DimacsError(CbsError, ValueError):
    """Malformed DIMACS input."""


class PromiseViolation(CbsError, ValueError):
    """An input falls outside the promise of a partial function or protocol."""


class IllegalMove(CbsError, ValueError):
    """A pebbling move violates the rules of the black pebble game."""


class TraceError(CbsError, ValueError):
    """A proof trace is malformed or unsound."""


class PatternNotFound(CbsError, ValueError):
    """No run of quadratic non-residues of the requested shape exists mod p."""
