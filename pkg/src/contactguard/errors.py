class ProtocolError(RuntimeError):
    """A party deviated from the expected message sequence or ran out of dealer material."""


class TransportError(ConnectionError):
    """The underlying channel failed or was closed by the peer."""


class FramingError(TransportError):
    """Bytes on the wire do not form a valid frame."""


class HandshakeError(ProtocolError):
    """HELLO exchange failed (version or method mismatch)."""


class ClassificationError(RuntimeError):
    """Classifying one user failed; the message names the user."""
