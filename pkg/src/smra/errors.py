"""Exception hierarchy shared across the package."""


class SmraError(Exception):
    """Base class for every error raised by smra."""


class DomainError(SmraError, ValueError):
    """An argument lies outside the domain of a function."""


class UnsupportedChannelError(SmraError, ValueError):
    """The channel kind is not handled by the requested operation."""


class GraphError(SmraError, ValueError):
    pass


class ModelError(SmraError, KeyError):
    pass


class StorageInsufficient(SmraError):
    """Decoding never succeeds, even with the whole stored stream."""


class IntegrityError(SmraError):
    """Decoding a transmission failed: wrong side information or corrupt data."""


class RequestError(SmraError, KeyError):
    pass


class FormatError(SmraError, ValueError):
    """Malformed on-disk or wire data."""


class TruncatedStream(FormatError):
    pass


class ChecksumMismatch(FormatError):
    pass
