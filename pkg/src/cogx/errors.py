"""Exception hierarchy shared by all cogx modules."""


class CogxError(Exception):
    """Base class for all cogx errors."""


class ParseError(CogxError):
    """A file or payload could not be parsed."""


class ValidationError(CogxError):
    """A loaded artifact violates one of its invariants."""


class BlockedPath(CogxError):
    """A motion path crosses an occupied cell (reserved for dynamic worlds)."""


class NoCandidates(CogxError):
    """No candidate waypoints are available for a decision."""


class Unreachable(CogxError):
    """No free cell near the requested goal is reachable."""


class NoSurface(CogxError):
    """A projection ray exited camera range without hitting any surface."""


class MissingPlaceholder(CogxError):
    """A prompt template placeholder was left unsubstituted."""


class Unparseable(CogxError):
    """A model completion did not contain the expected structure."""


class Transport(CogxError):
    """Network-level failure talking to a chat endpoint."""


class RateLimited(CogxError):
    """Chat endpoint kept rejecting the request after all retries."""


class BadResponse(CogxError):
    """Chat endpoint answered with an unusable payload."""


class IoError(CogxError):
    """Failed to write an output artifact."""
