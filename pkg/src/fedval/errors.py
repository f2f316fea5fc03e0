"""Exception types raised across the simulator.

Two broad families matter to callers: configuration problems (bad config
files, unknown presets, schema mismatches) and runtime problems (infeasible
data operations, degenerate numerics).  The CLI maps the former to exit
code 2 and the latter to exit code 3.
"""


class FedValError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FedValError):
    """Invalid or inconsistent configuration."""


class SchemaError(ConfigError):
    """Dataset schema missing or contradicting the file it describes."""


class UnknownPresetError(ConfigError):
    """Requested preset name is not registered."""

    def __init__(self, name, known):
        self.name = name
        self.known = tuple(known)
        super().__init__(f"unknown preset {name!r}; known presets: {', '.join(self.known)}")


class DataError(FedValError):
    """Runtime problem with dataset contents."""


class RowParseError(DataError):
    """A CSV row could not be interpreted under the schema."""


class EmptyDatasetError(DataError):
    """An operation received no rows to work with."""


class InfeasibleSkewError(DataError):
    """Requested label-rate skew cannot be met by subsampling."""


class InvalidPartitionError(DataError):
    """Partition request inconsistent with the dataset (e.g. K > rows)."""


class InvalidValidationSplitError(DataError):
    """Validation split could not produce two usable sides."""


class MissingGroupError(DataError):
    """A group-conditioned metric found no rows for one group."""


class MissingPositivesError(DataError):
    """A positives-conditioned metric found no positive rows for one group."""


class ShapeError(FedValError):
    """Model/data dimensionality mismatch."""


class DegenerateWeightsError(FedValError):
    """Aggregation weights could not be normalized (zero total mass)."""


class NumericOverflowError(FedValError):
    """A computation left the representable float range."""
