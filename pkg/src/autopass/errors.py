"""Exception types shared across the package."""


class AutopassError(Exception):
    """Base class for all autopass errors."""


class InvalidSite(AutopassError):
    """Raw site string could not be normalized."""


class InvalidParameter(AutopassError):
    """A numeric or structural parameter is out of range."""


class UnsatisfiablePolicy(AutopassError):
    """Policy admits no password (empty charset or impossible requirement)."""


class RetriesExhausted(AutopassError):
    """Bounded retry loop gave up (encode attempts or offset resampling)."""


class LengthMismatch(AutopassError):
    """Offset / password lengths disagree."""


class ModulusMismatch(AutopassError):
    """Offset modulus does not match charset size."""


class CharOutOfCharset(AutopassError):
    """A password character is not in the governing charset."""


class VaultExists(AutopassError):
    """Refusing to overwrite an existing vault without force."""


class VaultCorrupt(AutopassError):
    """Vault file is unreadable or fails structural checks."""


class AuthenticationFailed(AutopassError):
    """Wrong user password or tampered ciphertext (indistinguishable)."""


class NotFound(AutopassError):
    """Unknown site or record."""


class InvariantViolation(AutopassError):
    """A stored record violates its structural invariants."""


class MissingObject(AutopassError):
    """Site requires a digital object but none was supplied."""


class SignatureInvalid(AutopassError):
    """Envelope signature verification failed; never masked by caching."""


class Unavailable(AutopassError):
    """Service unreachable and no usable cache entry."""


class VersionConflict(AutopassError):
    """Compare-and-set failed against the stored record version."""


class MergeConflictUnresolved(AutopassError):
    """Push still conflicted after a pull-merge retry."""
