"""Exception hierarchy shared across the engine.

The CLI maps these onto process exit codes: validation problems exit 2,
ledger integrity failures exit 3.
"""


class ProvenanceError(Exception):
    """Base class for all engine errors."""


class ValidationError(ProvenanceError):
    """Bad input data: malformed files, dimension mismatches, zero vectors."""


class NotDeterminableError(ValidationError):
    """A classification could not be made (e.g. empty reference namespace).

    This is an error state, deliberately distinct from any verdict.
    """


class LedgerCorruptError(ProvenanceError):
    """The on-disk hash ledger failed chain verification."""
