"""Exception hierarchy shared by all solvers."""


class OccumaxError(Exception):
    """Base class for all package errors."""


class InvalidMdp(OccumaxError, ValueError):
    """The MDP (or a table shaped like it) is malformed."""


class InvalidWeights(OccumaxError, ValueError):
    """Entropy weights outside the domain of the requested solver."""


class DimensionMismatch(OccumaxError, ValueError):
    """An array does not match the shape implied by the MDP or grid."""


class DeterminismViolation(InvalidMdp):
    """A transition row is stochastic where a deterministic kernel is required."""


class NonzeroReward(InvalidMdp):
    """A reward is nonzero where the solver requires r == 0."""


class NotCommunicating(OccumaxError, ValueError):
    """The MDP is not communicating but the solver requires it."""


class TooLarge(OccumaxError, ValueError):
    """The problem exceeds the size guard of a brute-force routine."""


class BracketFailure(OccumaxError, RuntimeError):
    """No sign change was found in the root-finding bracket."""


class NonConvergence(OccumaxError, RuntimeError):
    """An iterative method failed to converge.

    ``result`` carries the best iterate available when the method gave up,
    or ``None`` if nothing meaningful can be returned.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
