"""Exception types shared by both kernel backends and the public API."""


class BayesCTError(Exception):
    """Base class for errors raised by this package."""


class DataError(BayesCTError, ValueError):
    """Input data is malformed or inconsistent with the alphabet/depth."""


class ResourceCapError(BayesCTError):
    """A configured resource cap (nodes, enumeration size, k-BCT work) was hit."""


class NodeBudgetExceeded(ResourceCapError, MemoryError):
    """The context tree outgrew its node budget."""
