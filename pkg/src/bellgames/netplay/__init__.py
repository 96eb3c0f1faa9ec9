"""Networked matches between a referee, player processes and an entanglement provider."""
from .client import PlayerClient, run_player_client
from .protocol import ProtocolError, WireMessage, decode_message, encode_message, message
from .provider import EntanglementProvider, ProviderError, ProviderServer, provider_for_game
from .server import MatchAborted, MatchConfig, MatchResult, RefereeServer, serve_referee, serve_referee_async

__all__ = [
    "EntanglementProvider",
    "MatchAborted",
    "MatchConfig",
    "MatchResult",
    "PlayerClient",
    "ProtocolError",
    "ProviderError",
    "ProviderServer",
    "RefereeServer",
    "WireMessage",
    "decode_message",
    "encode_message",
    "message",
    "provider_for_game",
    "run_player_client",
    "serve_referee",
    "serve_referee_async",
]
