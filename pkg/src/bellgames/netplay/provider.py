"""Entanglement provider: a service standing in for shared qubits held by separated players.

Separate processes cannot hold halves of one simulated state, so players ask the
provider to measure their qubit. The provider answers each call from the outcomes
already issued that round only: the first caller gets its marginal, later callers
the conditional law. It never tells one player anything about another.

The outcome uniforms for a registered session come from the same resource stream as
the in-process referee (see :mod:`bellgames.referee`), which makes networked quantum
matches replayable against in-process runs.
"""
from __future__ import annotations

import asyncio
import logging
import threading

from ..games import GameSpec
from ..quantum import MeasurementSetting, QuantumError, RoundSampler, StateVector
from ..referee import physics_stream
from ..strategies import QuantumStrategy
from . import protocol as wire

log = logging.getLogger(__name__)


class ProviderError(RuntimeError):
    pass


class _Session:
    def __init__(self, state: StateVector, seed: int, session_index: int):
        self.state = state
        self.rng = physics_stream(seed, session_index)
        self.next_round = 0
        self.pending: dict[int, RoundSampler] = {}

    def sampler(self, round_: int) -> RoundSampler:
        if round_ < 0:
            raise ProviderError(f"bad round {round_}")
        while self.next_round <= round_:
            self.pending[self.next_round] = RoundSampler(self.state, self.rng.random(self.state.num_qubits))
            self.next_round += 1
        try:
            return self.pending[round_]
        except KeyError:
            raise ProviderError(f"round {round_} is already complete") from None


class EntanglementProvider:
    def __init__(self):
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def register(self, session_id: str, state: StateVector, seed: int, session_index: int = 0) -> None:
        with self._lock:
            self._sessions[session_id] = _Session(state, seed, session_index)

    def register_strategy(self, session_id: str, strategy: QuantumStrategy, seed: int) -> None:
        self.register(session_id, strategy.shared_state, seed)

    def measure(self, session_id: str, round_: int, player: int, setting: MeasurementSetting) -> int:
        """Measure ``player``'s qubit (0-based) for ``round_``; at most once per round."""
        with self._lock:
            try:
                session = self._sessions[session_id]
            except KeyError:
                raise ProviderError(f"unknown session {session_id!r}") from None
            sampler = session.sampler(round_)
            try:
                outcome = sampler.measure(player, setting)
            except QuantumError as exc:
                raise ProviderError(str(exc)) from None
            if sampler.complete():
                del session.pending[round_]
            return outcome


def provider_for_game(spec: GameSpec, strategy: QuantumStrategy, seed: int, session_id: str = "match"):
    provider = EntanglementProvider()
    if strategy.num_players != spec.num_players:
        raise ProviderError("strategy does not fit the game")
    provider.register_strategy(session_id, strategy, seed)
    return provider


class ProviderServer:
    """Serves MEASURE requests over the wire protocol."""

    def __init__(self, provider: EntanglementProvider, host: str = "127.0.0.1", port: int = 0, once: bool = False):
        self.provider = provider
        self.host = host
        self.port = port
        self.once = once
        self._server = None
        self._clients = 0
        self._served_any = False
        self._idle = asyncio.Event()

    async def start(self) -> int:
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        return self.port

    async def serve(self) -> None:
        """Serve until cancelled, or with ``once`` until every client has left."""
        if self._server is None:
            await self.start()
        if self.once:
            await self._idle.wait()
            self.close()
            return
        async with self._server:
            await self._server.serve_forever()

    def close(self) -> None:
        if self._server is not None:
            self._server.close()

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self._clients += 1
        self._served_any = True
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                writer.write(wire.encode_message(self._respond(line)))
                await writer.drain()
        except ConnectionError:
            pass
        finally:
            writer.close()
            self._clients -= 1
            if self.once and self._clients == 0:
                self._idle.set()

    def _respond(self, line: bytes) -> wire.WireMessage:
        try:
            msg = wire.decode_message(line)
            if msg.type == wire.HELLO:
                return wire.message(wire.HELLO, role="provider")
            if msg.type != wire.MEASURE:
                raise wire.ProtocolError(f"provider does not accept {msg.type}")
            setting = MeasurementSetting.parse(msg["setting"])
            outcome = self.provider.measure(msg["session"], msg.round, msg["player"] - 1, setting)
            return wire.message(wire.OUTCOME, msg.round, outcome=outcome)
        except (wire.ProtocolError, ProviderError, QuantumError) as exc:
            log.warning("provider rejected request: %s", exc)
            return wire.message(wire.ERROR, text=str(exc))
