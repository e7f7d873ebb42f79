"""Exception hierarchy for fairaudit.

Every error carries a short machine-readable ``code`` so the CLI can emit a
JSON error document. Subclasses of :class:`ValidationError` map to exit code
2, everything else derived from :class:`FairAuditError` maps to exit code 3.
"""

from __future__ import annotations


class FairAuditError(Exception):
    code = "FairAuditError"
    exit_code = 3

    def __init__(self, message: str = "", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": str(self)}
        out.update({k: v for k, v in self.details.items() if v is not None})
        return out


class ValidationError(FairAuditError):
    code = "ValidationError"
    exit_code = 2


class SchemaError(ValidationError):
    code = "SchemaError"


class MissingColumn(ValidationError):
    code = "MissingColumn"


class UnparseableValue(ValidationError):
    code = "UnparseableValue"

    def __init__(self, message: str = "", row: int | None = None, column: str | None = None):
        super().__init__(message, row=row, column=column)
        self.row = row
        self.column = column


class EmptyDataset(ValidationError):
    code = "EmptyDataset"


class ValueOutOfRange(ValidationError):
    code = "ValueOutOfRange"


class NoProtectedAttributes(ValidationError):
    code = "NoProtectedAttributes"


class UnknownSubgroup(ValidationError):
    code = "UnknownSubgroup"


class InvalidAlpha(ValidationError):
    code = "InvalidAlpha"


class InvalidRange(ValidationError):
    code = "InvalidRange"


class TooFewRecords(ValidationError):
    code = "TooFewRecords"


class NoPredictions(FairAuditError):
    code = "NoPredictions"


class UndefinedRate(FairAuditError):
    """The group has no records of the class the rate is conditioned on."""

    code = "UndefinedRate"


class NoMeasurableGroups(FairAuditError):
    code = "NoMeasurableGroups"


class UndefinedRatio(FairAuditError):
    code = "UndefinedRatio"

    def __init__(self, message: str = "", key: str | None = None):
        super().__init__(message, key=key)
        self.key = key


class DegenerateTraining(FairAuditError):
    code = "DegenerateTraining"


class ClassVanishedEntirely(FairAuditError):
    code = "ClassVanishedEntirely"


class SubprocessFailure(FairAuditError):
    code = "SubprocessFailure"

    def __init__(self, message: str = "", exit_code_: int | None = None):
        super().__init__(message, returncode=exit_code_)
        self.returncode = exit_code_


class MalformedPredictionFile(FairAuditError):
    code = "MalformedPredictionFile"

    def __init__(self, message: str = "", row: int | None = None):
        super().__init__(message, row=row)
        self.row = row


class NoSmallSubgroups(FairAuditError):
    code = "NoSmallSubgroups"


class TooFewPoints(FairAuditError):
    code = "TooFewPoints"
