"""Player client: answers the referee's questions from its own strategy alone.

The client talks to exactly two endpoints, the referee and (for quantum strategies)
the entanglement provider. Its answer for a round is computed from its own question
and its own qubit handle, nothing else.
"""
from __future__ import annotations

import logging
import socket
import sys
import time

from ..games import make_spec, parse_question
from ..strategies import QuantumStrategy, SharedRandomClassical, StrategyProfile, check_profile, local_players
from . import protocol as wire

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 3


class ClientError(RuntimeError):
    pass


class _LineConnection:
    def __init__(self, endpoint: tuple[str, int], timeout: float | None = None):
        self.sock = socket.create_connection(endpoint, timeout=10)
        self.sock.settimeout(timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.rfile = self.sock.makefile("rb")

    def send(self, msg: wire.WireMessage) -> None:
        self.sock.sendall(wire.encode_message(msg))

    def recv(self) -> wire.WireMessage | None:
        line = self.rfile.readline()
        if not line:
            return None
        return wire.decode_message(line)

    def close(self) -> None:
        self.rfile.close()
        self.sock.close()


class RemoteQubit:
    """This player's half of the shared state, measured through the provider."""

    def __init__(self, conn: _LineConnection, session: str, player: int, round_: int):
        self._conn = conn
        self._session = session
        self._player = player
        self._round = round_

    def measure(self, setting) -> int:
        self._conn.send(
            wire.message(wire.MEASURE, self._round, session=self._session, player=self._player, setting=setting.encode())
        )
        reply = self._conn.recv()
        if reply is None:
            raise ClientError("provider closed the connection")
        if reply.type == wire.ERROR:
            raise ClientError(f"provider error: {reply['text']}")
        if reply.type != wire.OUTCOME or reply.round != self._round:
            raise ClientError(f"unexpected provider reply {reply.type} for round {reply.round}")
        return reply["outcome"]


class PlayerClient:
    def __init__(
        self,
        referee: tuple[str, int],
        strategy: StrategyProfile,
        player: int,
        game: str,
        n: int | None = None,
        provider: tuple[str, int] | None = None,
        session: str = "match",
        delay_ms: float = 0,
    ):
        spec = make_spec(game, n)
        check_profile(spec, strategy)
        if isinstance(strategy, SharedRandomClassical):
            raise ClientError("shared-randomness strategies cannot be played over the network")
        if not 1 <= player <= spec.num_players:
            raise ClientError(f"player must be in 1..{spec.num_players}")
        if isinstance(strategy, QuantumStrategy) and provider is None:
            raise ClientError("quantum strategies need a provider endpoint")
        self.referee = referee
        self.agent = local_players(strategy)[player - 1]
        self.quantum = isinstance(strategy, QuantumStrategy)
        self.player = player
        self.game = game
        self.n = n
        self.provider = provider
        self.session = session
        self.delay = delay_ms / 1000
        self.results: list[bool] = []
        self.summary: dict | None = None

    def run(self) -> int:
        ref = _LineConnection(self.referee)
        prov = _LineConnection(self.provider) if self.quantum else None
        try:
            ref.send(wire.message(wire.HELLO, role="player", player=self.player, game=self.game, n=self.n))
            hello = ref.recv()
            if hello is None or hello.type != wire.HELLO:
                text = hello["text"] if hello is not None and hello.type == wire.ERROR else "no HELLO from referee"
                raise ClientError(f"referee refused: {text}")
            self.session = hello.get("session", self.session)
            while True:
                msg = ref.recv()
                if msg is None:
                    raise ClientError("referee closed the connection")
                if msg.type == wire.QUESTION:
                    answer = self._answer(msg, prov)
                    try:
                        ref.send(wire.message(wire.ANSWER, msg.round, a=answer))
                    except (BrokenPipeError, ConnectionResetError):
                        # referee already finished; scoring late answers is its business
                        log.info("answer for round %d not delivered", msg.round)
                elif msg.type == wire.RESULT:
                    self.results.append(msg["win"])
                elif msg.type == wire.SUMMARY:
                    self.summary = msg["stats"]
                    return EXIT_OK
                elif msg.type == wire.ERROR:
                    raise ClientError(f"referee error: {msg['text']}")
                else:
                    raise ClientError(f"unexpected {msg.type} from referee")
        finally:
            ref.close()
            if prov is not None:
                prov.close()

    def _answer(self, msg: wire.WireMessage, prov) -> int:
        question = parse_question(msg["q"])
        resource = RemoteQubit(prov, self.session, self.player, msg.round) if self.quantum else None
        if self.delay:
            time.sleep(self.delay)
        return int(self.agent.answer(question, resource))


def run_player_client(referee, strategy: StrategyProfile, player: int, game: str, n=None, **kwargs) -> int:
    """Play a match as ``player`` (1-based); returns a process exit status."""
    try:
        return PlayerClient(referee, strategy, player, game, n, **kwargs).run()
    except (ClientError, wire.ProtocolError, OSError) as exc:
        print(f"player {player}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
