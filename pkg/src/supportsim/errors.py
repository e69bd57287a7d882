"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific type that applies rather than bare ValueError.
"""


class ParseError(ValueError):
    """An input file (STL, OBJ, manifest, report CSV) could not be parsed."""


class GeometryError(ValueError):
    """Geometry violates a precondition (zero volume, not watertight, ...)."""


class DivergenceError(RuntimeError):
    """An optimization run produced non-finite values."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        detail = message or "optimization diverged"
        super().__init__(f"{detail} at step {step}")
