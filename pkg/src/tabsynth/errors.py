"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class TabsynthError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TabsynthError):
    """Bad input data or configuration (CLI exit code 1)."""


class IoOrEndpointError(TabsynthError):
    """I/O failure or endpoint exhaustion (CLI exit code 2)."""


# --- table model ---

class RaggedRowError(ValidationError):
    def __init__(self, line_number: int, expected: int, got: int):
        super().__init__(
            f"line {line_number}: expected {expected} cells, got {got}"
        )
        self.line_number = line_number
        self.expected = expected
        self.got = got


class DuplicateHeaderError(ValidationError):
    def __init__(self, name: str):
        super().__init__(f"duplicate column name: {name!r}")
        self.name = name


class IndexOutOfRangeError(ValidationError):
    pass


# --- instruction builder ---

class InsufficientRowsError(ValidationError):
    def __init__(self, n_rows: int, n_needed: int, dataset_id: str = ""):
        where = f" in dataset {dataset_id!r}" if dataset_id else ""
        super().__init__(
            f"table has {n_rows} rows{where} but disjoint sampling needs {n_needed}"
        )
        self.n_rows = n_rows
        self.n_needed = n_needed
        self.dataset_id = dataset_id


# --- metadata generator ---

class PromptTooLargeError(ValidationError):
    def __init__(self, estimated_tokens: int, budget: int):
        super().__init__(
            f"prompt estimated at {estimated_tokens} tokens exceeds budget {budget}"
        )
        self.estimated_tokens = estimated_tokens
        self.budget = budget


# --- llm client ---

class AuthError(IoOrEndpointError):
    def __init__(self, status: int):
        super().__init__(f"authentication failed with HTTP {status}")
        self.status = status


class ExhaustedRetriesError(IoOrEndpointError):
    def __init__(self, attempts: int, last_status: int | str):
        super().__init__(
            f"gave up after {attempts} attempts; last failure: {last_status}"
        )
        self.attempts = attempts
        self.last_status = last_status


class MalformedResponseError(IoOrEndpointError):
    pass


class SnapshotNotFoundError(ValidationError):
    pass


# --- metrics ---

class EmptySampleError(ValidationError):
    pass


class NoCommonColumnsError(ValidationError):
    pass


class DegenerateColumnError(ValidationError):
    pass


class NoPairsError(ValidationError):
    pass


class TargetMissingError(ValidationError):
    pass


class AllRowsDroppedError(ValidationError):
    pass


class UndefinedAUCError(ValidationError):
    pass


class ZeroVarianceError(ValidationError):
    pass


class AllZeroActualsError(ValidationError):
    pass


class SchemaMismatchError(ValidationError):
    pass
