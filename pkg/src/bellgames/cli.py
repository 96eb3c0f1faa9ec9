"""Command-line driver.

Exit codes: 0 success, 2 usage or validation error, 3 runtime or protocol error.
Every command that writes to ``--out`` also writes ``manifest.json``; ``replay``
re-runs a manifest and reproduces the result files byte for byte.
"""
from __future__ import annotations

import argparse
import asyncio
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .games import GameError, GameSpec, check_necklace_size, make_spec
from .netplay import protocol as wire
from .netplay.client import ClientError, run_player_client
from .netplay.provider import ProviderServer, provider_for_game
from .netplay.server import MatchAborted, MatchConfig, serve_referee
from .referee import SessionConfig, run_experiment
from .strategies import (
    DEFAULT_CAP,
    StrategyError,
    best_classical_profile,
    brute_force_classical_optimum,
    canonical_quantum_ghz,
    canonical_quantum_necklace,
    closed_form_curves,
    exact_win_probability,
    format_strategy_text,
    load_strategy_file,
    profile_count,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
DIGITS = 12

log = logging.getLogger("bellgames")


class UsageError(ValueError):
    pass


def fmt(x):
    """Round a probability to 12 significant digits for output."""
    if x is None:
        return None
    return float(f"{float(x):.{DIGITS}g}")


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _spec_from(cfg: dict) -> GameSpec:
    return make_spec(cfg["game"], cfg.get("n"))


def _strategy_from(spec: GameSpec, source: str, cap: int = DEFAULT_CAP):
    if source == "quantum":
        return canonical_quantum_ghz() if spec.name == "ghz" else canonical_quantum_necklace(spec.n)
    if source == "classical-best":
        return best_classical_profile(spec, cap)
    if source.startswith("file:"):
        return load_strategy_file(spec, source[5:])
    raise UsageError(f"unknown strategy source {source!r} (use quantum, classical-best or file:PATH)")


def _file_digest(source: str) -> str | None:
    if not source.startswith("file:"):
        return None
    return hashlib.sha256(Path(source[5:]).read_bytes()).hexdigest()


# commands --------------------------------------------------------------------


def cmd_exact(cfg: dict) -> dict[str, str]:
    spec = _spec_from(cfg)
    cap = cfg["cap"]
    quantum = canonical_quantum_ghz() if spec.name == "ghz" else canonical_quantum_necklace(spec.n)
    q_value = exact_win_probability(spec, quantum)
    doc = {"game": spec.name, "n": spec.n, "quantum_value": fmt(q_value), "per_round_fail": fmt(round(1 - q_value, DIGITS))}
    count = profile_count(spec)
    if count <= cap:
        value, _ = brute_force_classical_optimum(spec, cap)
        doc["classical_optimum"] = fmt(value)
        doc["classical_optimum_fraction"] = str(value)
    else:
        doc["classical_optimum"] = None
        doc["notice"] = f"classical optimum omitted: 2^{count.bit_length() - 1} profiles exceed the cap of {cap}"
    if spec.name == "necklace":
        curves = closed_form_curves(spec.n)
        doc.update(
            classical_round_win=fmt(curves.classical_round_win),
            per_round_fail=fmt(curves.quantum_round_fail),
            classical_session_pass=fmt(curves.classical_session_pass),
            quantum_session_pass=fmt(curves.quantum_session_pass),
            session_rounds=spec.session_rounds_default,
        )
    else:
        doc.update(classical_session_pass=None, quantum_session_pass=None)
    return {"exact.json": dump_json(doc)}


def cmd_optimize(cfg: dict) -> dict[str, str]:
    spec = _spec_from(cfg)
    value, witness = brute_force_classical_optimum(spec, cfg["cap"])
    text = format_strategy_text(spec, witness)
    doc = {
        "game": spec.name,
        "n": spec.n,
        "optimum": fmt(value),
        "optimum_fraction": str(value),
        "profiles_searched": profile_count(spec),
        "witness": text.splitlines(),
    }
    return {"optimize.json": dump_json(doc), "witness.txt": text}


def cmd_simulate(cfg: dict) -> dict[str, str]:
    spec = _spec_from(cfg)
    profile = _strategy_from(spec, cfg["strategy"], cfg["cap"])
    session_cfg = SessionConfig(cfg["rounds"], cfg["sessions"], cfg["seed"])
    result = run_experiment(spec, profile, session_cfg, keep_transcript=cfg["transcript"])
    stats = {"game": spec.name, "n": spec.n, "strategy": cfg["strategy"], **result.stats.to_document(DIGITS)}
    stats["exact_win_probability"] = fmt(exact_win_probability(spec, profile))
    files = {"stats.json": dump_json(stats)}
    if result.transcript is not None:
        files["transcript.csv"] = result.transcript.to_csv()
    return files


def cmd_sweep(cfg: dict) -> dict[str, str]:
    lo, hi = cfg["n_min"], cfg["n_max"]
    check_necklace_size(lo)
    if hi < lo:
        raise UsageError("--n-max must not be below --n-min")
    rows = [[
        "n", "classical_round_win", "quantum_round_win", "quantum_round_fail",
        "classical_session_pass", "quantum_session_pass", "quantum_advantage",
    ]]
    for n in range(lo, hi + 1, 2):
        c = closed_form_curves(n)
        q_win = 1 - c.quantum_round_fail
        values = (c.classical_round_win, q_win, c.quantum_round_fail, c.classical_session_pass, c.quantum_session_pass)
        rows.append([n, *(repr(fmt(x)) for x in values), int(q_win > c.classical_round_win)])
    return {"sweep.csv": "".join(",".join(str(x) for x in row) + "\n" for row in rows)}


OFFLINE = {"exact": cmd_exact, "optimize": cmd_optimize, "simulate": cmd_simulate, "sweep": cmd_sweep}
PRIMARY_OUTPUT = {"exact": "exact.json", "optimize": "optimize.json", "simulate": "stats.json", "sweep": "sweep.csv"}


def manifest(command: str, cfg: dict) -> dict:
    return {"tool": "bellgames", "version": __version__, "command": command, "config": cfg}


def write_outputs(out: Path, files: dict[str, str], man: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8", newline="")
    (out / "manifest.json").write_text(dump_json(man), encoding="utf-8", newline="")


def run_offline(command: str, cfg: dict, out: str | None) -> int:
    files = OFFLINE[command](cfg)
    sys.stdout.write(files[PRIMARY_OUTPUT[command]])
    if out:
        write_outputs(Path(out), files, manifest(command, cfg))
    return EXIT_OK


# network roles ------------------------------------------------------------------


def _endpoint(text: str) -> tuple[str, int]:
    try:
        return wire.parse_endpoint(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_serve(cfg: dict, out: str | None) -> int:
    host, port = _endpoint(cfg["listen"])
    match = MatchConfig(
        game=cfg["game"], n=cfg.get("n"), rounds=cfg["rounds"], deadline_ms=cfg["deadline_ms"],
        host=host, port=port, seed=cfg["seed"], session=cfg["session"],
    )

    def ready(h, p):
        print(f"listening on {h}:{p}", flush=True)

    result = serve_referee(match, on_ready=ready)
    stats = {"game": cfg["game"], "n": cfg.get("n"), **result.stats.to_document(DIGITS)}
    sys.stdout.write(dump_json(stats))
    if out:
        files = {"stats.json": dump_json(stats), "transcript.csv": result.transcript.to_csv()}
        write_outputs(Path(out), files, manifest("serve", cfg))
    return EXIT_OK


def cmd_provide(cfg: dict) -> int:
    spec = _spec_from(cfg)
    host, port = _endpoint(cfg["listen"])
    strategy = _strategy_from(spec, "quantum")
    provider = provider_for_game(spec, strategy, cfg["seed"], cfg["session"])

    async def main():
        server = ProviderServer(provider, host, port, once=cfg["once"])
        bound = await server.start()
        print(f"provider listening on {host}:{bound}", flush=True)
        await server.serve()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_play(cfg: dict) -> int:
    spec = _spec_from(cfg)
    profile = _strategy_from(spec, cfg["strategy"], cfg["cap"])
    provider = _endpoint(cfg["provider"]) if cfg.get("provider") else None
    return run_player_client(
        _endpoint(cfg["connect"]), profile, cfg["player"], cfg["game"], cfg.get("n"),
        provider=provider, session=cfg["session"], delay_ms=cfg["delay_ms"],
    )


def cmd_replay(path: str, out: str | None) -> int:
    man = json.loads(Path(path).read_text(encoding="utf-8"))
    command, cfg = man.get("command"), man.get("config")
    if command not in OFFLINE:
        raise UsageError(f"cannot replay {command!r}; only {sorted(OFFLINE)} are replayable offline")
    digest = cfg.get("strategy_sha256")
    if digest is not None and _file_digest(cfg["strategy"]) != digest:
        raise UsageError("strategy file changed since the manifest was written")
    return run_offline(command, cfg, out or str(Path(path).parent))


# argument parsing ----------------------------------------------------------------


def _game_args(p, strategy=False):
    p.add_argument("--game", choices=["ghz", "necklace"], required=True)
    p.add_argument("--n", type=int, help="number of beads (necklace only)")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="brute-force profile cap")
    if strategy:
        p.add_argument("--strategy", default="quantum", help="quantum | classical-best | file:PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellgames", description="GHZ and impossible-necklace nonlocal games")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact classical and quantum values")
    _game_args(p)
    p.add_argument("--out")

    p = sub.add_parser("optimize", help="brute-force best classical strategy")
    _game_args(p)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="seeded Monte Carlo sessions")
    _game_args(p, strategy=True)
    p.add_argument("--rounds", type=int, help="rounds per session (default 5N, or 1000 for GHZ)")
    p.add_argument("--sessions", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-transcript", dest="transcript", action="store_false")
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="closed-form necklace curves over a range of N")
    p.add_argument("--n-min", type=int, default=4)
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--out")

    p = sub.add_parser("serve", help="host a networked match as referee")
    _game_args(p)
    p.add_argument("--listen", default="127.0.0.1:0")
    p.add_argument("--rounds", type=int)
    p.add_argument("--deadline-ms", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--session", default="match")
    p.add_argument("--out")

    p = sub.add_parser("play", help="join a networked match as a player")
    _game_args(p, strategy=True)
    p.add_argument("--connect", required=True)
    p.add_argument("--player", type=int, required=True, help="1-based player number")
    p.add_argument("--provider", help="entanglement provider HOST:PORT (quantum strategies)")
    p.add_argument("--session", default="match")
    p.add_argument("--delay-ms", type=float, default=0, help="sleep before each answer (testing deadlines)")

    p = sub.add_parser("provide", help="run the entanglement provider")
    _game_args(p)
    p.add_argument("--listen", default="127.0.0.1:0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--session", default="match")
    p.add_argument("--once", action="store_true", help="exit after the last player disconnects")

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest")
    p.add_argument("--out")
    return parser


def _config(args) -> dict:
    skip = {"command", "verbose", "out", "manifest"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    if "game" in cfg:
        # validate early so usage errors exit with status 2
        spec = make_spec(cfg["game"], cfg.get("n"))
        if args.command in ("simulate", "serve"):
            if cfg["rounds"] is None:
                cfg["rounds"] = spec.session_rounds_default
    if "strategy" in cfg:
        cfg["strategy_sha256"] = _file_digest(cfg["strategy"])
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "replay":
            return cmd_replay(args.manifest, args.out)
        cfg = _config(args)
        if args.command in OFFLINE:
            return run_offline(args.command, cfg, args.out)
        if args.command == "serve":
            return cmd_serve(cfg, args.out)
        if args.command == "provide":
            return cmd_provide(cfg)
        return cmd_play(cfg)
    except (UsageError, GameError, StrategyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MatchAborted, ClientError, wire.ProtocolError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
