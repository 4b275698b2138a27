"""Exception hierarchy shared across the codec and the I/O layers."""


class DkfError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(DkfError):
    """Malformed input file; the message names the offending field."""


class UnsupportedFormatError(DkfError):
    """Input is syntactically valid but uses an unsupported feature."""


class FormatError(DkfError):
    """Bitstream header is not a valid .dkf header."""


class TruncatedStreamError(DkfError):
    """Entropy-coded payload ended before decoding finished."""


class DecodeError(DkfError):
    """Decoded symbols are inconsistent; the stream is corrupt."""


class NoOverlapError(DkfError):
    """RD curves share no metric range, BD-rate is undefined."""
