"""Exception types shared across the package."""


class PgcanError(Exception):
    """Base class for package-specific failures."""


class ConfigurationError(PgcanError):
    """A model, problem, or run was configured inconsistently."""


class OutOfDomainError(PgcanError):
    """A query point lies outside the problem domain beyond tolerance."""


class NonFiniteParameterError(PgcanError):
    """A trainable parameter block contains NaN or Inf values."""

    def __init__(self, block_name):
        self.block_name = block_name
        super().__init__(f"non-finite values in parameter block '{block_name}'")


class UnsupportedOrderError(PgcanError):
    """Derivatives were requested beyond second order."""


class TrainingDivergedError(PgcanError):
    """The training loss became non-finite."""

    def __init__(self, epoch, last_checkpoint=None):
        self.epoch = epoch
        self.last_checkpoint = last_checkpoint
        where = f" (last good checkpoint: {last_checkpoint})" if last_checkpoint else ""
        super().__init__(f"non-finite loss at epoch {epoch}{where}")


class GeometryError(PgcanError):
    """Domain sampling failed, e.g. rejection sampling accepts almost nothing."""


class UndefinedMetricError(PgcanError):
    """A metric is undefined for the given inputs (e.g. zero reference norm)."""


class CorruptReferenceError(PgcanError):
    """A reference-solution file is incomplete or malformed."""
