"""Acceptance suite: one printed PASS/FAIL line per criterion, at the stated tolerances."""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from cbslift.core_csp import Csp, canonical_search, csp_to_cnf, dimacs_bytes, is_unsatisfiable
from cbslift.formulas import (assignment_with_violations, enumerate_paired_paths,
                              layered_pebbling_strategy, pebbling_decision_tree, pebbling_formula,
                              pebbling_number_exact, replay_strategy, tseitin_decision_tree,
                              tseitin_formula, viol)
from cbslift.gadgets import (barrington_and, evaluate_pbp, find_pattern, first_pattern_prime,
                             jump_gadget, pbp_to_gadget, qcs_gadget, ver_gadget, verify_versatility)
from cbslift.graphs import Dag, grid_graph, hxp_graph, pyramid, triangle
from cbslift import perms as P
from cbslift.lifting import lift, lifted_clause_for, translate_solution
from cbslift.monotone import (alice_map, average_case_protocol, bob_map, composed_assignment,
                              exact_kw_oracle, is_monotone_exhaustive, kw_translate,
                              planted_approximation, rm_eval, rm_function)
from cbslift.proofsim import (binary_search_all, binary_search_protocol, check_trace,
                              lifted_refutation, max_probes, resolution_refutation_pebbling)
from cbslift.reduction import (all_promise_instances, check_reduction_exact, compose, corrupted,
                               exact_solver, wrapped_protocol)
from cbslift.sensitivity import (block_sensitivity, critical_block_sensitivity,
                                 decision_tree_depth, lowest_selector, path_pair_sensitivity_check)

from oracles import (clause_sat, cnf_unsat, naive_cbs, pebbling_clauses, pebbling_number_minimax,
                     semantic_trace_check, tseitin_violations, ver_table)

pytestmark = pytest.mark.acceptance


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_c01_ver_versatility(criterion):
    c = criterion(1, "VER versatility")
    rep, dt = _timed(lambda: verify_versatility(ver_gadget(), "exact"))
    for name in ("and_embed", "flip", "rsr"):
        c.check(f"{name} exact", rep.clauses[name].passed)
    # independent count: every outcome of the 8-point space, every one of the 16 inputs
    g, tab = ver_gadget(), ver_table()
    classes = {z: [(x, y) for x in range(4) for y in range(4) if tab[x][y] == z] for z in (0, 1)}
    uniform = True
    for x, y in itertools.product(range(4), repeat=2):
        counts = {}
        for j in range(8):
            img = g.rsr.map_input(g.rsr.outcome(j), (x, y))
            counts[img] = counts.get(img, 0) + 1
        want = classes[tab[x][y]]
        uniform &= set(counts) == set(want) and all(Fraction(v, 8) == Fraction(1, 8) for v in counts.values())
    c.check("rsr uniform on all 16 inputs by direct count", uniform)
    c.check(f"runtime {dt:.3f}s < 1s", dt < 1.0)
    c.finish()


def test_c02_jump_versatility(criterion):
    c = criterion(2, "Jump gadget versatility")
    g2 = jump_gadget(2)
    c.check(f"Jump2 outcome space {g2.rsr.n_outcomes}", g2.rsr.n_outcomes == 576)
    rep, dt = _timed(lambda: verify_versatility(g2, "exact"))
    for name in ("and_embed", "flip", "rsr"):
        c.check(f"Jump2 {name} exact", rep.clauses[name].passed)
    c.check(f"Jump2 runtime {dt:.2f}s < 10s", dt < 10.0)
    rep3 = verify_versatility(jump_gadget(3), "stat", seed=0, significance=1e-3)
    c.check(f"Jump3 statistical ({rep3.clauses['rsr'].detail})", rep3.passed)
    c.finish()


def test_c03_qcs(criterion):
    c = criterion(3, "QCS gadget")
    for k in (1, 2, 3):
        p, a = first_pattern_prime(k)
        g = qcs_gadget(k, p)
        exact = g.rsr.n_outcomes <= 10 ** 6 and g.size <= 10 ** 6
        rep = verify_versatility(g, "exact" if exact else "stat", seed=0)
        c.check(f"k={k} first prime p={p} a={a} ({'exact' if exact else 'stat'})", rep.passed)
    a11 = find_pattern(11, 2)
    chi = {(v * v) % 11 for v in range(1, 11)}
    c.check(f"pattern for k=2 at p=11 (a={a11})",
            a11 not in chi and a11 + 1 not in chi and a11 + 2 in chi)
    rep11 = verify_versatility(qcs_gadget(2, 11), "exact")
    c.check("qcs p=11 k=2 exact", rep11.passed)
    c.finish()


def test_c04_barrington(criterion):
    c = criterion(4, "Barrington AND programs")
    ok = True
    for k in range(1, 7):
        pbp = barrington_and(k)
        ok &= pbp.width == 5
        for y in itertools.product((0, 1), repeat=k):
            ok &= evaluate_pbp(pbp, y) == (pbp.gamma if all(y) else P.identity(5))
    c.check("k=1..6 agree with AND on all inputs, width 5", ok)
    ratios = [barrington_and(k).length / k ** 2 for k in range(1, 65)]
    C = max(ratios)
    c.check(f"length <= C*k^2 with C={C:.4f} for k<=64", all(r <= C for r in ratios) and C <= 1.25)
    early, late = max(ratios[:32]), max(ratios[32:])
    c.check(f"C stable (k<=32: {early:.4f}, 33..64: {late:.4f})", abs(late - early) <= 0.01)
    rep = verify_versatility(pbp_to_gadget(barrington_and(2), 2), "stat", seed=0)
    c.check("pbp_to_gadget(barrington_and(2)) versatile", rep.passed)
    c.finish()


def test_c05_tseitin_invariants(criterion):
    c = criterion(5, "Tseitin invariants")
    rng = np.random.default_rng(0)
    for name, g in (("triangle", triangle()), ("2x2", grid_graph(2, 2)), ("3x3", grid_graph(3, 3))):
        tf = tseitin_formula(g)
        cnf = csp_to_cnf(tf.csp)
        c.check(f"{name} unsat", is_unsatisfiable(tf.csp) and cnf_unsat(cnf.n_vars, cnf.clauses()))
        odd = all(len(viol(tf, a)) % 2 == 1 and viol(tf, a) == tseitin_violations(g.edges, g.charge, a)
                  for a in itertools.product((0, 1), repeat=len(g.edges)))
        c.check(f"{name} odd violations", odd)
        rt = True
        for _ in range(50):
            size = int(rng.choice(np.arange(1, g.n_nodes + 1, 2)))
            U = frozenset(rng.choice(g.n_nodes, size=size, replace=False).tolist())
            rt &= tseitin_violations(g.edges, g.charge, assignment_with_violations(tf, U)) == U
        c.check(f"{name} 50 round trips", rt)
    c.finish()


def test_c06_tseitin_decision_tree(criterion):
    c = criterion(6, "Tseitin decision tree")
    g = grid_graph(2, 2)
    tf = tseitin_formula(g)
    feasible = all(tseitin_decision_tree(tf, a)[0] in tseitin_violations(g.edges, g.charge, a)
                   for a in itertools.product((0, 1), repeat=len(g.edges)))
    c.check("2x2 exhaustive feasibility", feasible)
    worst = {}
    for side in (2, 3, 4, 5):
        tf = tseitin_formula(grid_graph(side, side))
        # the query path depends only on which node ends up found, so single violations are worst cases
        worst[side * side] = max(tseitin_decision_tree(tf, assignment_with_violations(tf, {v}))[1]
                                 for v in range(side * side))
    rng = np.random.default_rng(0)
    tf5 = tseitin_formula(grid_graph(5, 5))
    sampled = max(tseitin_decision_tree(tf5, rng.integers(0, 2, 40).tolist())[1] for _ in range(2000))
    c.check(f"random inputs never exceed the measured worst case ({sampled} <= {worst[25]})",
            sampled <= worst[25])
    const = max(q / math.sqrt(n) for n, q in worst.items())
    c.check(f"worst queries {worst} <= c*sqrt(n) with c={const:.3f} <= 4",
            all(q <= const * math.sqrt(n) for n, q in worst.items()) and const <= 4)
    c.finish()


def test_c07_pebbling(criterion):
    c = criterion(7, "Pebbling")
    nums = {}
    for h in range(1, 5):
        d = pyramid(h)
        a, b = pebbling_number_exact(d), pebbling_number_minimax(d.n_nodes, d.edges, d.sink)
        nums[h] = a
        c.check(f"pyramid({h}) pebbling number {a} == oracle {b}", a == b)
    for ell in (2, 3, 4):
        d = hxp_graph(3, ell)
        peak, final = replay_strategy(d, layered_pebbling_strategy(d))
        c.check(f"hxp(3,{ell}) layered strategy legal, peak {peak} <= 54", peak <= 54 and d.sink in final)
    d = pyramid(2)
    pf = pebbling_formula(d)
    clauses = pebbling_clauses(d.n_nodes, d.edges, d.sink)
    ok = all(not clause_sat(clauses[pebbling_decision_tree(pf, a)[0]], a)
             for a in itertools.product((0, 1), repeat=d.n_nodes))
    c.check("pyramid(2) decision tree exhaustive", ok)
    c.finish()


def test_c08_pairing(criterion):
    c = criterion(8, "Path pairing")
    t0 = time.perf_counter()
    for ell in (2, 3, 4, 5):
        d = hxp_graph(3, ell)
        pairing = enumerate_paired_paths(d)
        bound = all(len(pairing.pairs[p]) >= len(pairing.paths[p].projection) - 1
                    for p in range(len(pairing.paths)))
        rep = path_pair_sensitivity_check(d)
        c.check(f"ell={ell}: {len(pairing.paths)} paths meet the pair bound", bound)
        c.check(f"ell={ell}: {rep.value} blocks of the max-outdegree path disjoint and sensitive",
                rep.disjoint and rep.sensitive and rep.critical)
    dt = time.perf_counter() - t0
    c.check(f"runtime {dt:.2f}s < 60s", dt < 60)
    c.finish()


def test_c09_critical_block_sensitivity(criterion):
    c = criterion(9, "Critical block sensitivity")
    cases = (("Tseitin triangle", tseitin_formula(triangle()).csp),
             ("pebbling pyramid(1)", pebbling_formula(pyramid(1)).csp))
    for name, csp in cases:
        S = canonical_search(csp)
        cnf = [c_.literals() for c_ in csp.constraints] if csp.is_clausal() else None
        rep = critical_block_sensitivity(S)
        # the naive enumerator gets feasible sets straight from the constraint tables
        sets = []
        for m in range(1 << csp.n_vars):
            a = [(m >> j) & 1 for j in range(csp.n_vars)]
            sets.append(frozenset(i for i, con in enumerate(csp.constraints)
                                  if not con.table[sum(a[v] << j for j, v in enumerate(con.var_ids))]))
        naive = naive_cbs(csp.n_vars, sets)
        c.check(f"{name}: exact {rep.value} == naive {naive}", rep.exact and rep.value == naive)
        depth = decision_tree_depth(S)
        c.check(f"{name}: bs_crit {rep.value} <= optimal tree depth {depth}", rep.value <= depth)
        if cnf is not None and name.startswith("pebbling"):
            pf = pebbling_formula(pyramid(1))
            measured = max(pebbling_decision_tree(pf, a)[1] for a in itertools.product((0, 1), repeat=3))
            c.check(f"{name}: bs_crit <= measured walk-down queries {measured}", rep.value <= measured)
        else:
            c.check(f"{name}: bs_crit <= query-all tree {csp.n_vars}", rep.value <= csp.n_vars)
    c.finish()


def _block_families(n):
    subsets = [s for r in range(1, n + 1) for s in itertools.combinations(range(n), r)]
    out = [[s] for s in subsets]
    out += [[a, b] for a, b in itertools.combinations(subsets, 2) if not set(a) & set(b)]
    return out


def test_c10_reduction(criterion):
    c = criterion(10, "UDISJ reduction")
    g = ver_gadget()
    cases = ok = 0
    for n in (1, 2, 3):
        for alpha in itertools.product((0, 1), repeat=n):
            for blocks in _block_families(n):
                for inst in all_promise_instances(2, len(blocks)):
                    cases += 1
                    ok += check_reduction_exact(inst, alpha, blocks, g)[0]
    c.check(f"exact law equality on {ok}/{cases} (n<=3, bs<=2, alpha, blocks, promise input)", ok == cases)

    tf = tseitin_formula(triangle())
    S = canonical_search(tf.csp)
    sel = lowest_selector(S)
    alpha = assignment_with_violations(tf, {0})
    blocks = block_sensitivity(sel, alpha).witness_blocks[:2]
    eps = 0.1
    proto = corrupted(exact_solver(compose(S, g), sel), eps, list(range(tf.csp.m)))
    decide = wrapped_protocol(proto, sel(alpha), alpha, blocks, g, epsilon=eps)
    rng = np.random.default_rng(0)
    insts = all_promise_instances(2, len(blocks))
    errs, counts = {0: 0, 1: 0}, {0: 0, 1: 0}
    for _ in range(10 ** 4):
        inst = insts[int(rng.integers(len(insts)))]
        v = inst.value()
        counts[v] += 1
        errs[v] += decide(inst, rng) != v
    for v, bound in ((0, 1 - (1 - eps) ** 2), (1, 0.25)):
        rate = errs[v] / counts[v]
        sigma = math.sqrt(bound * (1 - bound) / counts[v])
        c.check(f"{v}-side error {rate:.4f} <= {bound:.4f} + 3sigma ({counts[v]} trials)",
                rate <= bound + 3 * sigma)
    c.finish()


def _decode_ver(beta, n):
    tab = ver_table()
    return tuple(tab[beta[4 * v] + 2 * beta[4 * v + 1]][beta[4 * v + 2] + 2 * beta[4 * v + 3]]
                 for v in range(n))


def test_c11_lifting(criterion):
    c = criterion(11, "Lifting")
    bases = (("{(x),(~x)}", Csp.from_clauses(1, [[1], [-1]])),
             ("triangle Tseitin CNF", csp_to_cnf(tseitin_formula(triangle()).csp)))
    for name, base in bases:
        lc = lift(base, ver_gadget())
        n, d, m = base.n_vars, base.degree, base.m
        N, D, M = lc.csp.n_vars, lc.csp.degree, lc.csp.m
        c.check(f"{name}: N={N}=n*k*l, D={D}=d*k*l, M={M}<=m*2^(dkl)={m * 2 ** (d * 4)}",
                N == n * 4 and D == d * 4 and M <= m * 2 ** (d * 4))
        clauses, base_clauses = lc.csp.clauses(), base.clauses()
        equiv = True
        for beta in itertools.product((0, 1), repeat=N):
            alpha = _decode_ver(beta, n)
            lifted_sat = all(clause_sat(cl, beta) for cl in clauses)
            equiv &= lifted_sat == all(clause_sat(cl, alpha) for cl in base_clauses)
            if not lifted_sat:
                for ci, cl in enumerate(base_clauses):
                    if not clause_sat(cl, alpha):
                        li = lifted_clause_for(lc, ci, beta)
                        equiv &= translate_solution(lc, li) == ci and not clause_sat(clauses[li], beta)
        c.check(f"{name}: semantic equivalence over 2^{N} lifted assignments", equiv)
        c.check(f"{name}: unsat preserved", is_unsatisfiable(lc.csp) and cnf_unsat(N, clauses))
        runs = {dimacs_bytes(lift(base, ver_gadget()).csp) for _ in range(3)}
        c.check(f"{name}: DIMACS byte-stable", len(runs) == 1)
    c.finish()


def test_c12_raz_mckenzie(criterion):
    c = criterion(12, "Raz-McKenzie transformation")
    tab = ver_table()
    bases = (("1-var {(x),(~x)}", Csp.from_clauses(1, [[1], [-1]])),
             ("2-var pebbling path", pebbling_formula(Dag(2, ((0, 1),), 1)).csp),
             ("3-var Tseitin triangle", tseitin_formula(triangle()).csp))
    for name, base in bases:
        f = rm_function(base, ver_gadget())
        n = base.n_vars
        labs = list(itertools.product(range(4), repeat=n))
        c.check(f"{name}: alice_map in f^-1(1)", all(rm_eval(f, alice_map(f, x)) == 1 for x in labs))
        c.check(f"{name}: bob_map in f^-1(0)", all(rm_eval(f, bob_map(f, y)) == 0 for y in labs))
        kw = all(not base.constraints[kw_translate(f, x, y)](
                     tuple(tab[a][b] for a, b in zip(x, y)))
                 for x in labs for y in labs)
        c.check(f"{name}: KW translation on all {len(labs) ** 2} (x,y)", kw)
        if f.N <= 24:
            ok, witness = is_monotone_exhaustive(f)
            c.check(f"{name}: f monotone over all 2^{f.N} inputs", ok)
    c.finish()


def test_c13_average_case(criterion):
    c = criterion(13, "Average-case protocol")
    base = tseitin_formula(grid_graph(2, 2)).csp
    f = rm_function(base, ver_gadget())
    oracle = exact_kw_oracle(f)
    for rho in (0.0, 0.1, 0.2):
        rng = np.random.default_rng(int(rho * 100))
        approx, mass = planted_approximation(f, rho, rng)
        runs = restarts = 0
        feasible = True
        for _ in range(10 ** 4):
            x = tuple(int(v) for v in rng.integers(4, size=base.n_vars))
            y = tuple(int(v) for v in rng.integers(4, size=base.n_vars))
            res = average_case_protocol(f, approx, oracle, x, y, rng)
            runs += res.iterations
            restarts += res.iterations - 1
            feasible &= not base.constraints[res.constraint](composed_assignment(f, x, y))
        rate = restarts / runs
        target = 2 * rho
        sigma = math.sqrt(max(target * (1 - target), 1e-12) / runs)
        c.check(f"rho={rho}: restart rate {rate:.4f} vs {target:.2f} (3sigma={3 * sigma:.4f})",
                abs(rate - target) <= 3 * sigma)
        c.check(f"rho={rho}: every answer violated", feasible)
    c.finish()


def test_c14_proof_simulation(criterion):
    c = criterion(14, "Proof simulation")
    pf = pebbling_formula(pyramid(2))
    moves = layered_pebbling_strategy(pf.dag)
    base = resolution_refutation_pebbling(pf, moves)
    lc = lift(pf.csp, ver_gadget())
    lifted = lifted_refutation(lc, pf, moves)
    for name, tr, cnf in (("pyramid(2)", base, pf.csp), ("VER-lifted pyramid(2)", lifted, lc.csp)):
        check_trace(tr, cnf)
        semantic_trace_check(tr.steps, [(l.clause, l.kind, l.source, l.premises) for l in tr.lines],
                             cnf.clauses())
        c.check(f"{name}: trace accepted by both replay checkers (length {tr.length}, space {tr.space})",
                True)
    clauses = pf.csp.clauses()
    configs = base.configurations()
    ok = True
    for a in itertools.product((0, 1), repeat=6):
        ci, t = binary_search_protocol(base, a, configs=configs)
        ok &= not clause_sat(clauses[ci], a) and len(t.probes) <= max_probes(base)
    c.check(f"pyramid(2): all 64 assignments find a violated clause, probes <= {max_probes(base)}", ok)

    found, probes = binary_search_all(lifted, lc.csp.n_vars, return_probes=True)
    nv = lc.csp.n_vars
    masks = np.array([(sum(1 << (t - 1) for t in cl if t > 0), sum(1 << (-t - 1) for t in cl if t < 0))
                      for cl in lc.csp.clauses()], dtype=np.int64)
    a = np.arange(1 << nv, dtype=np.int64)
    pos, neg = masks[found, 0], masks[found, 1]
    violated = (found >= 0) & ((a & pos) == 0) & ((~a & neg) == 0)
    bound = math.ceil(math.log2(lifted.length))
    c.check(f"lifted: all 2^{nv} assignments find a violated clause, probes <= {bound}",
            bool(violated.all()) and int(probes.max()) <= bound)
    rng = np.random.default_rng(0)
    lconfigs = lifted.configurations()
    agree = all(binary_search_protocol(lifted, [(m >> j) & 1 for j in range(nv)], configs=lconfigs)[0]
                == found[m] for m in rng.integers(0, 1 << nv, 300).tolist())
    c.check("vectorised search agrees with the per-assignment protocol on 300 samples", agree)
    d, k, l = pf.csp.degree, lc.k, lc.l
    ratio = lifted.length / (base.length * 2 ** (d * k * l))
    c.check(f"lifted length {lifted.length} <= base {base.length} * 2^{d * k * l} * c, c={ratio:.4f} <= 1",
            ratio <= 1)
    c.finish()
