"""falsify-kit-client: simulator-side reference client.

Pure standard library. Implements the falsify-kit socket protocol
(4-byte big-endian length prefix + UTF-8 JSON frames) so any Python
simulator can serve episodes to a running toolkit with one call:

    from falsify_client import connect_and_serve
    connect_and_serve(host, port, space_signature, callback)

where callback maps a {leaf-path: value} assignment dict to
(times, signals) arrays for one episode.
"""

from .client import (
    HandshakeRefused,
    ProtocolViolation,
    connect_and_serve,
    signature_from_domain_doc,
)
from .cartpole import cartpole_reference_callback

__version__ = "0.1.0"

__all__ = ["HandshakeRefused", "ProtocolViolation", "cartpole_reference_callback",
           "connect_and_serve", "signature_from_domain_doc"]
