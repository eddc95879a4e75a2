"""Two-party secret sharing over the 64-bit ring and the secure contact predicate."""
