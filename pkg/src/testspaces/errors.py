"""Shared exception types.

Exit-code mapping used by the CLI: ValidationError -> 2,
CapExceededError -> 3, UndecidedError -> 4.
"""


class TestspacesError(Exception):
    """Base class for all library errors."""


class ValidationError(TestspacesError):
    """Bad input: violated precondition, malformed file, inconsistent data."""


class CapExceededError(TestspacesError):
    """A configured enumeration/memory budget was exceeded."""


class UndecidedError(TestspacesError):
    """A numerical procedure ended without a definite answer."""


class DisconnectedGraphError(ValidationError):
    """Graph is not connected; carries one unreachable pair."""

    def __init__(self, u: int, v: int):
        self.pair = (u, v)
        super().__init__(f"graph is disconnected: no path between vertices {u} and {v}")


class CollapsedPairError(ValidationError):
    """Two distinct points share one image vector: infinite distortion."""

    def __init__(self, i: int, j: int):
        self.pair = (i, j)
        super().__init__(
            f"points {i} and {j} are distinct but mapped to identical vectors "
            "(infinite distortion)"
        )
