"""Referee server: interrogates connected player processes round by round."""
from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass

import numpy as np

from ..games import GameError, format_question, judge, make_spec, question_index_from_uniform
from ..referee import RunStats, Transcript, make_stats, session_streams
from . import protocol as wire

log = logging.getLogger(__name__)

_EOF = object()


@dataclass(frozen=True)
class MatchConfig:
    game: str
    n: int | None = None
    rounds: int = 100
    deadline_ms: int = 1000
    host: str = "127.0.0.1"
    port: int = 0
    seed: int = 0
    session: str = "match"

    def __post_init__(self):
        if self.deadline_ms < 1:
            raise ValueError("deadline_ms must be at least 1")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        make_spec(self.game, self.n)

    @property
    def spec(self):
        return make_spec(self.game, self.n)


class MatchAborted(RuntimeError):
    pass


@dataclass
class MatchResult:
    stats: RunStats
    transcript: Transcript


class _Seat:
    def __init__(self, player: int, reader, writer):
        self.player = player
        self.reader = reader
        self.writer = writer
        self.inbox: asyncio.Queue = asyncio.Queue()
        self.alive = True
        self.task = asyncio.ensure_future(self._pump())

    async def _pump(self):
        try:
            while True:
                line = await self.reader.readline()
                if not line:
                    break
                try:
                    msg = wire.decode_message(line)
                except wire.ProtocolError as exc:
                    msg = exc
                await self.inbox.put(msg)
        except ConnectionError:
            pass
        await self.inbox.put(_EOF)

    def send(self, msg: wire.WireMessage):
        if self.alive:
            self.writer.write(wire.encode_message(msg))

    async def flush(self):
        if self.alive:
            try:
                await self.writer.drain()
            except ConnectionError:
                self.alive = False

    def close(self):
        self.task.cancel()
        self.writer.close()


class RefereeServer:
    """Runs one match. Players join with HELLO, then are asked questions under a deadline.

    A missing or late answer loses the round. Answers left over from earlier rounds are
    dropped as late; any other out-of-sequence message aborts the match with ERROR.
    If a player disconnects, the remaining rounds are scored as losses.
    """

    def __init__(self, cfg: MatchConfig):
        self.cfg = cfg
        self.spec = cfg.spec
        self.port = cfg.port
        self.seats: dict[int, _Seat] = {}
        self._server = None
        self._full = asyncio.Event()

    async def start(self) -> int:
        self._server = await asyncio.start_server(self._on_connect, self.cfg.host, self.cfg.port)
        self.port = self._server.sockets[0].getsockname()[1]
        return self.port

    async def _on_connect(self, reader, writer):
        try:
            line = await reader.readline()
            hello = wire.decode_message(line)
            player = self._admit(hello)
        except (wire.ProtocolError, GameError) as exc:
            writer.write(wire.encode_message(wire.message(wire.ERROR, text=str(exc))))
            try:
                await writer.drain()
            except ConnectionError:
                pass
            writer.close()
            return
        seat = _Seat(player, reader, writer)
        self.seats[player] = seat
        seat.send(
            wire.message(
                wire.HELLO,
                role="referee",
                player=player,
                game=self.cfg.game,
                n=self.cfg.n,
                session=self.cfg.session,
                rounds=self.cfg.rounds,
            )
        )
        await seat.flush()
        if len(self.seats) == self.spec.num_players:
            self._full.set()

    def _admit(self, hello: wire.WireMessage) -> int:
        if hello.type != wire.HELLO or hello["role"] != "player":
            raise wire.ProtocolError("expected HELLO from a player")
        if hello.get("game") != self.cfg.game or hello.get("n") != self.cfg.n:
            raise GameError(
                f"game mismatch: referee runs {self.spec.describe()}, "
                f"player asked for {{'game': {hello.get('game')!r}, 'n': {hello.get('n')!r}}}"
            )
        player = hello.get("player")
        if player is None or not 1 <= player <= self.spec.num_players:
            raise wire.ProtocolError(f"player number must be in 1..{self.spec.num_players}")
        if player in self.seats or self._full.is_set():
            raise wire.ProtocolError(f"player {player} is already connected")
        return player

    async def run_match(self) -> MatchResult:
        if self._server is None:
            await self.start()
        await self._full.wait()
        try:
            return await self._play()
        finally:
            for seat in self.seats.values():
                seat.close()
            self._server.close()

    async def _play(self) -> MatchResult:
        spec, cfg = self.spec, self.cfg
        m = spec.num_players
        seats = [self.seats[k + 1] for k in range(m)]
        rng = session_streams(cfg.seed, 0)
        q_index = np.zeros(cfg.rounds, dtype=np.int32)
        answers = np.zeros((cfg.rounds, m), dtype=np.int8)
        wins = np.zeros(cfg.rounds, dtype=bool)
        broken = False
        for r in range(cfg.rounds):
            t = int(question_index_from_uniform(spec, rng.questions.random()))
            q_index[r] = t
            if broken:
                continue
            questions = spec.legal_tuples[t]
            for seat, q in zip(seats, questions):
                seat.send(wire.message(wire.QUESTION, r, q=format_question(q), deadline_ms=cfg.deadline_ms))
            await asyncio.gather(*(seat.flush() for seat in seats))
            deadline = asyncio.get_running_loop().time() + cfg.deadline_ms / 1000
            try:
                got = await asyncio.gather(*(self._await_answer(seat, r, deadline) for seat in seats))
            except MatchAborted as exc:
                for seat in seats:
                    seat.send(wire.message(wire.ERROR, r, text=str(exc)))
                    await seat.flush()
                raise
            if all(a is not None for a in got):
                answers[r] = got
                wins[r] = judge(spec, questions, got)
            else:
                answers[r] = [a or 0 for a in got]
            for seat in seats:
                seat.send(wire.message(wire.RESULT, r, win=bool(wins[r])))
            await asyncio.gather(*(seat.flush() for seat in seats))
            if not all(seat.alive for seat in seats):
                log.warning("a player disconnected in round %d; remaining rounds are lost", r)
                broken = True
        stats = make_stats(wins.reshape(1, -1), cfg.rounds)
        for seat in seats:
            seat.send(wire.message(wire.SUMMARY, cfg.rounds, stats=stats.to_document()))
            await seat.flush()
        transcript = Transcript(
            spec=spec,
            session=np.zeros(cfg.rounds, dtype=np.int64),
            round=np.arange(cfg.rounds),
            question_index=q_index,
            answers=answers,
            wins=wins,
        )
        return MatchResult(stats, transcript)

    async def _await_answer(self, seat: _Seat, r: int, deadline: float):
        loop = asyncio.get_running_loop()
        while seat.alive:
            remaining = deadline - loop.time()
            if remaining <= 0:
                return None
            try:
                msg = await asyncio.wait_for(seat.inbox.get(), remaining)
            except asyncio.TimeoutError:
                return None
            if msg is _EOF:
                seat.alive = False
                return None
            if isinstance(msg, wire.ProtocolError):
                raise MatchAborted(f"player {seat.player}: {msg}")
            if msg.type == wire.ANSWER and msg.round < r:
                continue
            if msg.type != wire.ANSWER or msg.round != r:
                raise MatchAborted(f"player {seat.player}: unexpected {msg.type} for round {msg.round} in round {r}")
            return msg["a"]
        return None


async def serve_referee_async(cfg: MatchConfig, on_ready=None) -> MatchResult:
    server = RefereeServer(cfg)
    port = await server.start()
    if on_ready is not None:
        on_ready(cfg.host, port)
    return await server.run_match()


def serve_referee(cfg: MatchConfig, on_ready=None) -> MatchResult:
    """Host one match and return its statistics and transcript."""
    return asyncio.run(serve_referee_async(cfg, on_ready))
