"""Command line entry point: generation, lifting, verification and simulation."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core_csp import canonical_search, csp_to_cnf, read_dimacs, write_dimacs
from .errors import CbsError
from .formulas import (assignment_with_violations, layered_pebbling_strategy, pebbling_formula,
                       tseitin_formula)
from .gadgets import Pbp, broken_flip, gadget_by_name, verify_versatility
from .graphs import cycle_graph, default_ell, grid_graph, hxp_graph, pyramid, triangle

SCHEMA_VERSION = 1


@dataclass
class RunReport:
    command: list
    seed: int
    checks: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)

    def check(self, name: str, passed: bool, counterexample=None, detail: str = "") -> None:
        self.checks.append({"name": name, "passed": bool(passed),
                            "counterexample": counterexample, "detail": detail})

    def output(self, path: Path) -> None:
        self.outputs[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "version": __version__, "command": self.command,
                "seed": self.seed, "wall_time": round(time.perf_counter() - self.started, 6),
                "passed": self.passed, "checks": self.checks, "outputs": self.outputs,
                "data": self.data}


class UsageError(Exception):
    pass


def _load_pbp(path: str) -> Pbp:
    return Pbp.from_json(json.loads(Path(path).read_text()))


def _gadget(name: str):
    return gadget_by_name(name, _load_pbp)


def _write_cnf(csp, out: str | None, comments, report: RunReport) -> None:
    if out is None:
        write_dimacs(csp, sys.stdout.buffer, comments)
        sys.stdout.flush()
        return
    path = Path(out)
    with path.open("wb") as fh:
        write_dimacs(csp, fh, comments)
    report.output(path)


def _write_json(obj, out: str | None, report: RunReport) -> None:
    if out is None:
        return
    path = Path(out)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    report.output(path)


def _tseitin_graph(args):
    if args.graph == "grid":
        return grid_graph(args.rows, args.cols, args.charge_node)
    if args.graph == "cycle":
        return cycle_graph(args.n, args.charge_node)
    if args.graph == "triangle":
        return triangle(args.charge_node)
    raise UsageError(f"unknown graph family {args.graph!r}")


def _pebbling_dag(args, rng):
    if args.graph == "pyramid":
        return pyramid(args.height)
    if args.graph == "hxp":
        ell = args.ell if args.ell is not None else default_ell(args.r, rng, trials=args.trials)
        return hxp_graph(args.r, ell)
    raise UsageError(f"unknown graph family {args.graph!r}")


def cmd_gen(args, report, rng) -> None:
    if args.family == "tseitin":
        g = _tseitin_graph(args)
        csp = tseitin_formula(g).csp
        meta = {"family": "tseitin", "graph": g.to_json()}
    else:
        dag = _pebbling_dag(args, rng)
        csp = pebbling_formula(dag).csp
        meta = {"family": "pebbling", "graph": dag.to_json()}
    cnf = csp_to_cnf(csp)
    meta.update({"n_vars": cnf.n_vars, "n_clauses": cnf.m, "width": cnf.degree})
    _write_cnf(cnf, args.out, [f"{args.family} formula"], report)
    _write_json(meta, args.meta, report)
    report.data["formula"] = {k: meta[k] for k in ("n_vars", "n_clauses", "width")}


def cmd_lift(args, report, rng) -> None:
    from .lifting import lift
    base = read_dimacs(Path(args.cnf).read_bytes())
    lc = lift(base, _gadget(args.gadget))
    _write_cnf(lc.csp, args.out, [f"lifted with {lc.gadget.name}"], report)
    meta = lc.to_json()
    _write_json(meta, args.meta, report)
    report.check("parameters", lc.params_hold(), None, json.dumps(lc.params(), sort_keys=True))
    report.data["params"] = lc.params()


def cmd_verify(args, report, rng) -> None:
    g = _gadget(args.name)
    if args.break_ == "flip":
        g = broken_flip(g)
    rep = verify_versatility(g, args.mode, seed=args.seed, samples=args.samples,
                             significance=args.significance)
    for name, c in {**rep.clauses, **rep.extras}.items():
        j = c.to_json()
        report.check(name, j["passed"], j["counterexample"], j["detail"])
    report.data["gadget"] = g.name
    report.data["mode"] = rep.mode


def cmd_sensitivity(args, report, rng) -> None:
    from .sensitivity import critical_block_sensitivity, decision_tree_depth
    if args.problem == "tseitin":
        csp = tseitin_formula(_tseitin_graph(args)).csp
    else:
        csp = pebbling_formula(_pebbling_dag(args, rng)).csp
    S = canonical_search(csp)
    rep = critical_block_sensitivity(S)
    report.data["bscrit"] = rep.to_json()
    if args.exact:
        report.check("exact", rep.exact, None, "selector space within the enumeration cap")
    if args.dt:
        depth = decision_tree_depth(S)
        report.data["decision_tree_depth"] = depth
        report.check("bscrit<=dt", rep.value <= depth, None, f"{rep.value} <= {depth}")


def cmd_simulate(args, report, rng) -> None:
    if args.what == "reduction":
        _simulate_reduction(args, report, rng)
    else:
        _simulate_proofsearch(args, report, rng)


def _simulate_reduction(args, report, rng) -> None:
    from .reduction import (all_promise_instances, check_reduction_exact, compose, corrupted,
                            exact_solver, wrapped_protocol)
    from .sensitivity import block_sensitivity, lowest_selector
    g = _gadget(args.gadget)
    tf = tseitin_formula(triangle() if args.problem == "tseitin" else grid_graph(2, 2, 0))
    S = canonical_search(tf.csp)
    alpha = assignment_with_violations(tf, {0})
    sel = lowest_selector(S)
    blocks = block_sensitivity(sel, alpha).witness_blocks[: args.bs]
    report.data.update({"alpha": list(alpha), "blocks": [list(b) for b in blocks]})
    if args.mode == "exact":
        for inst in all_promise_instances(g.k, len(blocks)):
            ok, detail = check_reduction_exact(inst, alpha, blocks, g)
            report.check(f"rows={inst.rows}", ok, None if ok else [list(r) for r in inst.rows], detail)
        return
    problem = compose(S, g)
    proto = corrupted(exact_solver(problem, sel), args.corruption, list(range(tf.csp.m)))
    decide = wrapped_protocol(proto, sel(alpha), alpha, blocks, g)
    errs = {0: 0, 1: 0}
    counts = {0: 0, 1: 0}
    insts = all_promise_instances(g.k, len(blocks))
    for _ in range(args.trials):
        inst = insts[int(rng.integers(len(insts)))]
        v = inst.value()
        counts[v] += 1
        errs[v] += decide(inst, rng) != v
    eps = args.corruption
    for v, bound in ((0, 1 - (1 - eps) ** 2), (1, 0.25)):
        n = max(counts[v], 1)
        rate = errs[v] / n
        sigma = (bound * (1 - bound) / n) ** 0.5
        report.check(f"error_{v}", rate <= bound + 3 * sigma, None, f"rate {rate:.4f}, bound {bound:.4f}")


def _simulate_proofsearch(args, report, rng) -> None:
    from .proofsim import (ProofTrace, binary_search_protocol, check_trace, lifted_refutation,
                           max_probes, resolution_refutation_pebbling)
    if args.trace:
        trace = ProofTrace.from_json(json.loads(Path(args.trace).read_text()))
        if args.cnf:
            check_trace(trace, read_dimacs(Path(args.cnf).read_bytes()))
            report.check("trace_valid", True)
    else:
        pf = pebbling_formula(pyramid(args.height))
        moves = layered_pebbling_strategy(pf.dag)
        if args.lift:
            from .lifting import lift
            lc = lift(pf.csp, _gadget(args.lift))
            trace = lifted_refutation(lc, pf, moves)
            cnf = lc.csp
        else:
            trace = resolution_refutation_pebbling(pf, moves)
            cnf = pf.csp
        report.data["trace"] = check_trace(trace, cnf)
        report.check("trace_valid", True)
        _write_json(trace.to_json(), args.trace_out, report)
    if args.assignment is not None:
        bits = [int(c) for c in args.assignment.strip()]
        if len(bits) != trace.n_vars:
            raise UsageError(f"assignment needs {trace.n_vars} bits")
        clause, tr = binary_search_protocol(trace, bits)
        line_clause = next(l.clause for l in trace.lines if l.kind == "download" and l.source == clause)
        falsified = not any((bits[abs(t) - 1] == 1) == (t > 0) for t in line_clause)
        report.data["clause"] = clause
        report.data["probes"] = [p.index for p in tr.probes]
        report.check("violated", falsified, None, f"clause {clause}")
        report.check("probes", len(tr.probes) <= max_probes(trace), None, f"{len(tr.probes)} probes")


def cmd_monotone(args, report, rng) -> None:
    import itertools
    from .monotone import (alice_map, bob_map, composed_assignment, kw_translate, rm_eval,
                           rm_function)
    base = read_dimacs(Path(args.cnf).read_bytes())
    f = rm_function(base, _gadget(args.gadget))
    report.data["N"] = f.N
    if args.eval:
        z = [int(c) for c in Path(args.eval).read_text().split()[0]]
        report.data["value"] = rm_eval(f, z)
    if args.check_maps:
        n = base.n_vars
        ok_a = ok_b = ok_kw = True
        bad = None
        for x in itertools.product(range(f.nx), repeat=n):
            if rm_eval(f, alice_map(f, x)) != 1:
                ok_a, bad = False, list(x)
                break
        for y in itertools.product(range(f.ny), repeat=n):
            if rm_eval(f, bob_map(f, y)) != 0:
                ok_b, bad = False, list(y)
                break
        for x in itertools.product(range(f.nx), repeat=n):
            for y in itertools.product(range(f.ny), repeat=n):
                if base.constraints[kw_translate(f, x, y)](composed_assignment(f, x, y)):
                    ok_kw, bad = False, [list(x), list(y)]
        report.check("alice_map", ok_a, None if ok_a else bad)
        report.check("bob_map", ok_b, None if ok_b else bad)
        report.check("kw_translation", ok_kw, None if ok_kw else bad)


def _add_graph_flags(p):
    p.add_argument("--graph", default="grid")
    p.add_argument("--rows", type=int, default=3)
    p.add_argument("--cols", type=int, default=3)
    p.add_argument("--n", type=int, default=4, help="cycle length")
    p.add_argument("--charge-node", type=int, default=0)
    p.add_argument("--height", type=int, default=2)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--trials", type=int, default=1000, help="random walks for the default ell")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cbslift", description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--report", help="write the JSON run report here (default: stdout)")
    # the same flags are accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--report", default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="generate a formula as DIMACS")
    gen.add_argument("family", choices=["tseitin", "pebbling"])
    _add_graph_flags(gen)
    gen.add_argument("--out")
    gen.add_argument("--meta")
    gen.set_defaults(func=cmd_gen)

    lf = sub.add_parser("lift", parents=[common], help="lift a DIMACS CNF through a gadget")
    lf.add_argument("--cnf", required=True)
    lf.add_argument("--gadget", default="ver")
    lf.add_argument("--out")
    lf.add_argument("--meta")
    lf.set_defaults(func=cmd_lift)

    ver = sub.add_parser("verify", parents=[common], help="verify gadget versatility")
    ver.add_argument("what", choices=["gadget"])
    ver.add_argument("--name", required=True)
    ver.add_argument("--mode", choices=["exact", "stat"], default="exact")
    ver.add_argument("--break", dest="break_", choices=["flip"], help="plant a broken witness")
    ver.add_argument("--samples", type=int, default=10 ** 5)
    ver.add_argument("--significance", type=float, default=1e-3)
    ver.set_defaults(func=cmd_verify)

    sen = sub.add_parser("sensitivity", parents=[common], help="critical block sensitivity")
    sen.add_argument("what", choices=["bscrit"])
    sen.add_argument("--problem", choices=["tseitin", "pebbling"], default="tseitin")
    _add_graph_flags(sen)
    sen.add_argument("--exact", action="store_true", help="fail unless the value is exact")
    sen.add_argument("--dt", action="store_true", help="also compute decision-tree depth")
    sen.set_defaults(func=cmd_sensitivity)

    sim = sub.add_parser("simulate", parents=[common], help="run the reduction or the proof search")
    sim.add_argument("what", choices=["reduction", "proofsearch"])
    sim.add_argument("--gadget", default="ver")
    sim.add_argument("--problem", choices=["tseitin", "grid"], default="tseitin")
    sim.add_argument("--mode", choices=["exact", "mc"], default="exact")
    sim.add_argument("--bs", type=int, default=2, help="number of blocks to use")
    sim.add_argument("--trials", type=int, default=10 ** 4)
    sim.add_argument("--corruption", type=float, default=0.1)
    sim.add_argument("--trace")
    sim.add_argument("--cnf")
    sim.add_argument("--height", type=int, default=1)
    sim.add_argument("--lift", help="gadget to lift the pebbling formula with")
    sim.add_argument("--trace-out")
    sim.add_argument("--assignment")
    sim.set_defaults(func=cmd_simulate)

    mono = sub.add_parser("monotone", parents=[common], help="monotone function from a CNF and a gadget")
    mono.add_argument("what", choices=["rm"])
    mono.add_argument("--cnf", required=True)
    mono.add_argument("--gadget", default="ver")
    mono.add_argument("--eval", help="file holding z as a bitstring")
    mono.add_argument("--check-maps", action="store_true")
    mono.set_defaults(func=cmd_monotone)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    report = RunReport(argv, args.seed)
    rng = np.random.default_rng(args.seed)
    try:
        args.func(args, report, rng)
    except (UsageError, CbsError, ValueError, OSError) as e:
        print(f"cbslift: error: {e}", file=sys.stderr)
        return 2
    text = json.dumps(report.to_json(), indent=2, sort_keys=True, default=str) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    elif not (args.command in ("gen", "lift") and args.out is None):
        sys.stdout.write(text)
    for c in report.checks:
        if not c["passed"]:
            print(f"FAIL {c['name']}: counterexample {c['counterexample']} {c['detail']}", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
