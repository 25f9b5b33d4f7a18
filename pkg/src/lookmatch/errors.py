"""Exception taxonomy shared by all lookmatch modules.

Every error the pipeline can surface derives from LookmatchError so the CLI
can map failures to a stage name and a nonzero exit status in one place.
"""

from __future__ import annotations


class LookmatchError(Exception):
    """Base class for all lookmatch failures."""


# --- corpus ---------------------------------------------------------------

class MalformedManifest(LookmatchError):
    """A corpus manifest line or field does not follow the manifest format."""


class DuplicateId(LookmatchError):
    """Two records in one corpus share an id."""


# --- embedding blocks -----------------------------------------------------

class BlockError(LookmatchError):
    """Base class for embedding-block format violations."""


class IoFailure(BlockError):
    """Underlying I/O failed while reading or writing a block."""


class BadMagic(BlockError):
    """File does not start with the expected block magic."""


class DimMismatch(BlockError):
    """Declared dimensions disagree with the payload, or two blocks disagree."""


class NormViolation(BlockError):
    """A stored vector row is not unit-normalized within tolerance."""


class MalformedKeys(BlockError):
    """The row-key section does not match the block kind or row count."""


class ZeroVector(LookmatchError):
    """A row with (near-)zero norm cannot be normalized."""


# --- scoring / standardization --------------------------------------------

class DomainMismatch(LookmatchError):
    """Score tables cover different query/gallery corpora."""


class DegenerateDistribution(LookmatchError):
    """Calibration sample has (near-)zero variance."""


class ModelMismatch(LookmatchError):
    """Calibration stats belong to a different model than the table."""


# --- fusion -----------------------------------------------------------------

class MissingMember(LookmatchError):
    """An ensemble member named in the spec has no input table."""


class EmptyIntersection(LookmatchError):
    """No (query, gallery) pair is scored by every table."""


# --- retrieval --------------------------------------------------------------

class EmptyMask(LookmatchError):
    """A gallery mask excludes every row."""


# --- evaluation -------------------------------------------------------------

class MissingQuery(LookmatchError):
    """A ground-truth query has no ranking."""


class LengthMismatch(LookmatchError):
    """Paired vectors have different lengths."""


class ConstantVector(LookmatchError):
    """A rank-correlation input has zero rank variance."""


class UnknownProbe(LookmatchError):
    """An annotation references a probe index outside the configured probes."""


class DuplicateVerdict(LookmatchError):
    """Two verdicts exist for the same (pair, annotator)."""


# --- curation ---------------------------------------------------------------

class BadCutoffs(LookmatchError):
    """Tier cutoffs are not strictly increasing positive counts."""


# --- configuration ----------------------------------------------------------

class ConfigError(LookmatchError):
    """Run configuration is missing, malformed, or references absent paths."""
