import asyncio
import math
import threading

import pytest

from bellgames.netplay import ProviderServer, RefereeServer, provider_for_game, run_player_client


def within_sigmas(observed, p, n, k=4.0):
    sigma = math.sqrt(p * (1 - p) / n)
    return abs(observed - p) <= k * sigma


class LocalMatch:
    """Referee (and optional provider) on a background event loop, players on threads."""

    def __init__(self, cfg, profile, quantum=False, delays_ms=None):
        self.cfg = cfg
        self.spec = cfg.spec
        self.profile = profile
        self.quantum = quantum
        self.delays = delays_ms or [0] * self.spec.num_players
        self.codes = [None] * self.spec.num_players

    def run(self):
        ready = threading.Event()
        ports = {}
        outcome = {}

        async def host():
            referee = RefereeServer(self.cfg)
            ports["referee"] = await referee.start()
            provider = None
            if self.quantum:
                provider = ProviderServer(provider_for_game(self.spec, self.profile, self.cfg.seed, self.cfg.session))
                ports["provider"] = await provider.start()
            ready.set()
            try:
                return await referee.run_match()
            finally:
                if provider is not None:
                    provider.close()

        def loop():
            try:
                outcome["result"] = asyncio.run(host())
            except BaseException as exc:
                outcome["error"] = exc
                ready.set()

        hosting = threading.Thread(target=loop, daemon=True)
        hosting.start()
        ready.wait(10)

        def play(k):
            self.codes[k] = run_player_client(
                ("127.0.0.1", ports["referee"]),
                self.profile,
                k + 1,
                self.cfg.game,
                self.cfg.n,
                provider=("127.0.0.1", ports["provider"]) if self.quantum else None,
                delay_ms=self.delays[k],
            )

        players = [threading.Thread(target=play, args=(k,), daemon=True) for k in range(self.spec.num_players)]
        for t in players:
            t.start()
        for t in players:
            t.join(300)
        hosting.join(300)
        if "error" in outcome:
            raise outcome["error"]
        return outcome["result"]


@pytest.fixture
def local_match():
    def run(cfg, profile, **kwargs):
        match = LocalMatch(cfg, profile, **kwargs)
        result = match.run()
        return result, match.codes

    return run


# acceptance reporting: one line per criterion in the terminal summary

_criteria: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    status = "PASS" if report.passed else "FAIL"
    if number not in _criteria or status == "FAIL":
        _criteria[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        status, title, detail = _criteria[number]
        line = f"criterion {number:2d} {status}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
