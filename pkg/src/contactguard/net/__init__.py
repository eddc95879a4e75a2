"""Length-prefixed framing, channels and the TCP client/server."""
