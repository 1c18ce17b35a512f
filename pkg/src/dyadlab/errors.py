"""Exception types shared across the package."""


class SchemaError(ValueError):
    """An instance file violates the JSON schema.

    ``path`` locates the offending field, e.g. ``lambda['0/7']``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class GuardError(ValueError):
    """A numeric guard rejected the requested computation."""


class SizeLimitError(GuardError):
    """The (dimension, depth) combination exceeds the desk-scale memory guard."""


class PathError(ValueError):
    """A cube path string could not be parsed for this lattice."""
