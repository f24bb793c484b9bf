"""Exception types shared across the toolkit."""


class ChaintraceError(Exception):
    """Base class for all toolkit errors."""


# --- event model ---

class MalformedLine(ChaintraceError):
    """A raw log line does not match its source grammar."""


class DecodeError(ChaintraceError):
    """A canonical event record could not be decoded."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


# --- event store ---

class OutOfOrder(ChaintraceError):
    """Append violated the monotonic (ts, id) precondition."""


class IoFailure(ChaintraceError):
    """Underlying file operation failed."""


# --- pseudonymizer ---

class VaultSealed(ChaintraceError):
    """The vault was opened read-only; no new entries may be added."""


class TokenCollision(ChaintraceError):
    """Two distinct plaintexts produced the same truncated token."""


class UnknownToken(ChaintraceError):
    """Token not present in the vault."""


class InsufficientShares(ChaintraceError):
    """Fewer than the threshold number of shares supplied."""


class InconsistentShares(ChaintraceError):
    """Shares have duplicate x coordinates or mismatched lengths."""


class IntegrityFailure(ChaintraceError):
    """Decrypted plaintext does not reproduce the vault token."""


class BadParameters(ChaintraceError):
    """Invalid secret-sharing parameters."""


# --- simulator ---

class BadConfig(ChaintraceError):
    """Invalid simulation configuration."""


# --- graph engine ---

class UnsortedInput(ChaintraceError):
    """Event stream was not sorted by (ts, id)."""


class RuleCycle(ChaintraceError):
    """Sequence rules do not form a valid layer ordering."""


class UnknownInputKind(ChaintraceError):
    """A rule consumes an event type or sequence type that does not exist."""


# --- kill chain ---

class SchemaError(ChaintraceError):
    """Kill-chain model document violates the schema."""


class UnknownSequenceType(ChaintraceError):
    """Kill-chain element accepts a sequence type absent from the rule set."""


class NoNetworkElementMatched(ChaintraceError):
    """No matched element carries a network (dst_ip) group key."""


# --- anomaly svm ---

class EmptyTrainingSet(ChaintraceError):
    """Standardization or training requires at least one vector."""


class DimensionMismatch(ChaintraceError):
    """Vector dimensionality differs from the model's."""


class BadHyperparameters(ChaintraceError):
    """nu outside (0, 1) or gamma <= 0."""


class DidNotConverge(ChaintraceError):
    """Solver hit the pair-update cap before reaching tolerance."""


class LengthMismatch(ChaintraceError):
    """Predictions and labels differ in length."""


class EmptyInput(ChaintraceError):
    """Metric computation over zero samples."""
