"""Exception types shared across the package."""


class DataError(ValueError):
    """A dataset is empty, too small, or internally inconsistent."""


class StateError(RuntimeError):
    """An operation was applied to an object in the wrong state."""
