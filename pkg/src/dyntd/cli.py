"""Command-line driver: replay or generate update traces with oracle checks.

Every command produces one JSON record on stdout. Exit codes: 0 success,
1 verification failure, 2 configuration error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, TextIO

from .dynamic import WORK_C1, Counters, DynamicDecomposition, build_catalog
from .errors import BudgetExceeded, DyntdError, InvariantViolation, TooLarge
from .graph import DynamicGraph
from .minimal import LabelCatalog
from .mso import Formula, build_gamma, constants_used, evaluate, parse
from .static import is_valid_decomposition, tree_depth

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

BUILTINS = {
    "gamma": build_gamma,
    "dominating": lambda: parse("exists x . forall y . (x = y or edge(x,y))"),
}

_ARITY = {"addv": 1, "delv": 1, "adde": 2, "dele": 2, "query": 0, "checkpoint": 0}


class ConfigError(Exception):
    pass


class VerificationFailure(Exception):
    def __init__(self, index: int, reason: str, digest: str):
        super().__init__(f"command {index}: {reason} (state {digest})")
        self.index = index
        self.reason = reason
        self.digest = digest


@dataclass
class Command:
    op: str
    args: tuple[int, ...] = ()

    def __str__(self) -> str:
        return " ".join([self.op, *map(str, self.args)])


def parse_command(line: str, lineno: int = 0) -> Command:
    parts = line.split()
    op = parts[0]
    if op not in _ARITY:
        raise ConfigError(f"line {lineno}: unknown command {op!r}")
    if len(parts) - 1 != _ARITY[op]:
        raise ConfigError(f"line {lineno}: {op} takes {_ARITY[op]} argument(s)")
    try:
        args = tuple(int(x) for x in parts[1:])
    except ValueError:
        raise ConfigError(f"line {lineno}: ids must be integers") from None
    if any(a < 0 for a in args):
        raise ConfigError(f"line {lineno}: ids must be nonnegative")
    return Command(op, args)


def _lines(path: Path) -> Iterator[tuple[int, str]]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield i, line


def read_trace(path: Path) -> list[Command]:
    return [parse_command(line, i) for i, line in _lines(path)]


def read_graph(path: Optional[Path]) -> DynamicGraph:
    g = DynamicGraph()
    if path is None:
        return g
    for i, line in _lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"{path}:{i}: expected 'u v'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(f"{path}:{i}: ids must be integers") from None
        if u < 0 or v < 0 or u == v:
            raise ConfigError(f"{path}:{i}: bad edge {u} {v}")
        g.ensure_vertex(u)
        g.ensure_vertex(v)
        g.set_edge(u, v, True)
    return g


def read_formula(path: Optional[str], builtin: Optional[str]) -> Optional[Formula]:
    if path is not None and builtin is not None:
        raise ConfigError("give either --formula or --builtin")
    if builtin is not None:
        return BUILTINS[builtin]()
    if path is None:
        return None
    try:
        phi = parse(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    except DyntdError as e:
        raise ConfigError(f"{path}: {e}") from None
    if constants_used(phi):
        raise ConfigError(f"{path}: query formulas may not use the constants a, b")
    return phi


def load_catalog(args, phi: Optional[Formula]) -> LabelCatalog:
    path = Path(args.catalog_cache) if args.catalog_cache else None
    if path is not None and path.exists():
        try:
            cat = LabelCatalog.load(path, phi, args.budget_eval, budget=args.budget_catalog)
            if cat.D == args.depth:
                return cat
        except (ValueError, KeyError):
            pass  # stale or foreign cache: rebuild
    return build_catalog(args.depth, phi, eval_cap=args.budget_eval, budget=args.budget_catalog)


class Runner:
    """Applies commands to the structure and checks them against the oracle."""

    def __init__(self, dd: DynamicDecomposition, phi: Optional[Formula], verify: bool, eval_cap: int, out: TextIO):
        self.dd = dd
        self.phi = phi
        self.verify = verify
        self.eval_cap = eval_cap
        self.out = out
        self.index = 0

    def apply(self, cmd: Command) -> dict:
        dd = self.dd
        rec: dict = {"i": self.index, "cmd": str(cmd), "outcome": "ok"}
        before = dd.state_digest() if self.verify else None
        rejected = False
        try:
            if cmd.op == "addv":
                dd.add_isolated_vertex(cmd.args[0])
            elif cmd.op == "delv":
                dd.remove_isolated_vertex(cmd.args[0])
            elif cmd.op == "adde":
                dd.insert_edge(*cmd.args)
            elif cmd.op == "dele":
                dd.delete_edge(*cmd.args)
            elif cmd.op == "query":
                rec["query"] = dd.query()
            else:
                dd.last = Counters()
        except (InvariantViolation, BudgetExceeded, TooLarge):
            raise
        except DyntdError as e:
            rec["outcome"] = e.kind
            rejected = True
        rec["counters"] = dd.last.as_dict()
        if cmd.op == "checkpoint" or self.verify:
            self.check(cmd, rec, before if rejected else None)
        if cmd.op == "checkpoint":
            rec["digest"] = dd.state_digest()
        self.out.write(json.dumps(rec, sort_keys=True) + "\n")
        self.index += 1
        return rec

    def fail(self, reason: str):
        raise VerificationFailure(self.index, reason, self.dd.state_digest())

    def check(self, cmd: Command, rec: dict, before: Optional[str]) -> None:
        dd = self.dd
        try:
            dd.check_invariants()
        except InvariantViolation as e:
            self.fail(str(e))
        if not is_valid_decomposition(dd.graph, dd.decompression(), dd.D):
            self.fail("decompression is not a valid decomposition")
        if before is not None and dd.state_digest() != before:
            self.fail("rejected command changed the state")
        c = dd.last
        if cmd.op == "dele" and c.cabinets_touched > WORK_C1 * dd.D:
            self.fail(f"delete touched {c.cabinets_touched} cabinets")
        if c.reroot_depth > dd.D:
            self.fail(f"reroot depth {c.reroot_depth}")
        if cmd.op == "query" and c.cabinets_touched:
            self.fail("query touched cabinets")
        if self.phi is not None:
            want = evaluate(dd.graph, self.phi, cap=self.eval_cap)
            got = rec["query"] if "query" in rec else dd.query()
            rec["oracle"] = "agree" if got == want else "mismatch"
            if got != want:
                self.fail(f"query returned {got}, brute force says {want}")

    def run(self, commands: Iterable[Command]) -> None:
        for cmd in commands:
            self.apply(cmd)


def fuzz_commands(dd: DynamicDecomposition, rng: random.Random, steps: int, max_vertices: int) -> Iterator[Command]:
    """Random valid commands; insertions are kept only if td(G + e) <= D."""
    made = 0
    while made < steps:
        g = dd.graph
        vs = g.vertices()
        roll = rng.random()
        if roll < 0.12 and len(vs) < max_vertices:
            cmd = Command("addv", (g.next_id,))
        elif roll < 0.17:
            iso = [v for v in vs if g.degree(v) == 0]
            if not iso:
                continue
            cmd = Command("delv", (rng.choice(iso),))
        elif roll < 0.55:
            if len(vs) < 2:
                continue
            u, v = rng.sample(vs, 2)
            if g.has_edge(u, v):
                continue
            h = g.copy()
            h.set_edge(u, v, True)
            if tree_depth(h) > dd.D:
                continue
            cmd = Command("adde", (u, v))
        elif roll < 0.85:
            es = g.edges()
            if not es:
                continue
            cmd = Command("dele", rng.choice(es))
        elif roll < 0.98:
            cmd = Command("query")
        else:
            cmd = Command("checkpoint")
        made += 1
        yield cmd


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--depth", type=int, required=True, help="depth bound D")
    common.add_argument("--formula", help="file with the query formula")
    common.add_argument("--builtin", choices=sorted(BUILTINS), help="use a built-in query formula")
    common.add_argument("--graph", help="initial edge list")
    common.add_argument("--verify", action="store_true", help="cross-check every command")
    common.add_argument("--catalog-cache", help="JSON file to load/store the label catalog")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget-catalog", type=int, default=None, help="max catalog labels")
    common.add_argument("--budget-eval", type=int, default=32, help="max vertices for brute-force evaluation")

    p = argparse.ArgumentParser(prog="dyntd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="mode", required=True)
    run = sub.add_parser("run", parents=[common], help="replay a trace file")
    run.add_argument("--trace", help="trace file (empty trace if omitted)")
    fz = sub.add_parser("fuzz", parents=[common], help="generate and check a random trace")
    fz.add_argument("--steps", type=int, default=500)
    fz.add_argument("--vertices", type=int, default=10, help="vertex cap")
    return p


def main(argv: Optional[list[str]] = None, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.depth < 1:
            raise ConfigError("--depth must be positive")
        phi = read_formula(args.formula, args.builtin)
        graph = read_graph(Path(args.graph) if args.graph else None)
        commands = read_trace(Path(args.trace)) if getattr(args, "trace", None) else []
    except ConfigError as e:
        err.write(f"config error: {e}\n")
        return EXIT_CONFIG
    dd = runner = None
    try:
        catalog = load_catalog(args, phi)
        dd = DynamicDecomposition.initialize(graph, args.depth, phi, catalog)
        runner = Runner(dd, phi, args.verify or args.mode == "fuzz", args.budget_eval, out)
        if args.mode == "fuzz":
            commands = fuzz_commands(dd, random.Random(args.seed), args.steps, args.vertices)
        runner.run(commands)
    except VerificationFailure as e:
        err.write(json.dumps({"failure": e.reason, "index": e.index, "digest": e.digest}) + "\n")
        return EXIT_VERIFY
    except InvariantViolation as e:
        where = {"index": runner.index, "digest": dd.state_digest()} if runner else {}
        err.write(json.dumps({"failure": str(e), **where}) + "\n")
        return EXIT_VERIFY
    except (BudgetExceeded, TooLarge) as e:
        err.write(f"budget exceeded: {e}\n")
        return EXIT_BUDGET
    except DyntdError as e:
        err.write(f"config error: {e}\n")
        return EXIT_CONFIG
    if args.catalog_cache:
        catalog.save(Path(args.catalog_cache))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
