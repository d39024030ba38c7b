"""Exception hierarchy.

Every failure mode the library promises to detect maps to one of these, so
callers (and the CLI exit-code logic) can distinguish bad input from
numerical trouble.
"""


class SympsturmError(Exception):
    """Base class for all library errors."""


class FrameError(SympsturmError):
    """A matrix does not satisfy the frame contract it was used as.

    Raised for wrong shapes, column-rank loss, isotropy violations and
    mismatched parent spaces.
    """


class TransversalityError(SympsturmError):
    """A chart or decomposition required transversality that does not hold."""


class DegenerateCrossingError(SympsturmError):
    """A degenerate crossing could not be resolved within the perturbation budget."""


class IdenticallyDegenerateError(DegenerateCrossingError):
    """The two legs coincide on the whole interval; no index is defined."""


class RefinementError(SympsturmError):
    """The requested grid/discretization is too coarse to be trusted.

    Covers indicator sign changes hiding inside one cell, symplectic-defect
    overruns and untrackable eigenvalue matchings.
    """


class ConvergenceError(SympsturmError):
    """An adaptively refined count failed to stabilize within the budget."""


class UnsupportedBoundaryError(SympsturmError):
    """Boundary condition outside the named cases (no general formula exists)."""


class PreconditionError(SympsturmError):
    """A theorem-checker hypothesis is violated by the supplied data."""


class SchemaError(SympsturmError):
    """A problem file does not match the documented schema."""


class CollisionError(SympsturmError):
    """An orbit integration left the admissible region (near-collision)."""
