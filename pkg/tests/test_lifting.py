import itertools

import pytest

from cbslift.core_csp import Csp, csp_to_cnf, dimacs_bytes, is_unsatisfiable
from cbslift.errors import PromiseViolation
from cbslift.formulas import tseitin_formula
from cbslift.gadgets import hn_gadget, qcs_gadget, ver_gadget
from cbslift.graphs import triangle
from cbslift.lifting import lift, lifted_clause_for, translate_solution

from oracles import clause_sat, cnf_unsat, ver_table

UNIT = Csp.from_clauses(1, [[1], [-1]])
TRI_CNF = csp_to_cnf(tseitin_formula(triangle()).csp)


def _decode_by_hand(beta, n):
    """VER lift: variable v owns bits 4v..4v+3, Alice's code then Bob's, LSB first."""
    tab = ver_table()
    out = []
    for v in range(n):
        x = beta[4 * v] + 2 * beta[4 * v + 1]
        y = beta[4 * v + 2] + 2 * beta[4 * v + 3]
        out.append(tab[x][y])
    return tuple(out)


@pytest.mark.parametrize("base,N,D,M", [(UNIT, 4, 4, 16), (TRI_CNF, 12, 8, 384)])
def test_parameters(base, N, D, M):
    lc = lift(base, ver_gadget())
    p = lc.params()
    assert (p["N"], p["D"], p["M"]) == (N, D, M)
    assert p["N"] == base.n_vars * 2 * 2
    assert p["D"] == base.degree * 2 * 2
    assert p["M"] <= base.m * 2 ** (base.degree * 4)
    assert lc.params_hold() and not lc.dead_codes


@pytest.mark.parametrize("base", [UNIT, TRI_CNF], ids=["unit", "triangle"])
def test_semantic_equivalence(base):
    lc = lift(base, ver_gadget())
    clauses = lc.csp.clauses()
    base_clauses = base.clauses()
    for beta in itertools.product((0, 1), repeat=lc.csp.n_vars):
        alpha = _decode_by_hand(beta, base.n_vars)
        assert lc.decode(beta) == alpha
        sat_lifted = all(clause_sat(c, beta) for c in clauses)
        sat_base = all(clause_sat(c, alpha) for c in base_clauses)
        assert sat_lifted == sat_base
        for ci, c in enumerate(base_clauses):
            if not clause_sat(c, alpha):
                li = lifted_clause_for(lc, ci, beta)
                assert translate_solution(lc, li) == ci
                assert not clause_sat(clauses[li], beta)


def test_unsat_preserved():
    for base in (UNIT, TRI_CNF):
        lc = lift(base, ver_gadget())
        assert is_unsatisfiable(lc.csp)
        assert cnf_unsat(lc.csp.n_vars, lc.csp.clauses())


def test_encode_decode_roundtrip():
    lc = lift(TRI_CNF, ver_gadget())
    g = ver_gadget()
    for xs in itertools.product(list(g.inputs()), repeat=3):
        beta = lc.encode(xs)
        assert lc.decode_inputs(beta) == xs
        assert lc.decode(beta) == tuple(g(x) for x in xs)


def test_partition_covers_variables():
    lc = lift(TRI_CNF, ver_gadget())
    parts = lc.partition()
    assert sorted(v for p in parts for v in p) == list(range(lc.csp.n_vars))
    # each lifted clause touches at most the bits of its base clause's variables
    for c, origin in zip(lc.csp.clauses(), lc.clause_origin):
        base_vars = {abs(t) - 1 for t in TRI_CNF.clauses()[origin[0]]}
        assert {(abs(t) - 1) // 4 for t in c} == base_vars


def test_dead_codes_with_hn():
    lc = lift(UNIT, hn_gadget())
    # Alice has 3 values on 3 bits (5 unused codes), Bob 6 values on 3 bits (2 unused)
    assert lc.l == 3 and lc.dead_codes
    assert lc.params()["dead_code_clauses"] == 5 + 2
    assert lc.csp.m == 9 + 9 + 7
    assert is_unsatisfiable(lc.csp)
    beta = [1] * lc.csp.n_vars
    assert lc.decode(beta) is None
    dead = [i for i, o in enumerate(lc.clause_origin) if o is None]
    assert any(not clause_sat(lc.csp.clauses()[i], beta) for i in dead)
    assert translate_solution(lc, dead[0]) is None


def test_dimacs_byte_stable():
    a = dimacs_bytes(lift(TRI_CNF, ver_gadget()).csp)
    b = dimacs_bytes(lift(TRI_CNF, ver_gadget()).csp)
    assert a == b


def test_rejects_promise_and_non_clausal():
    with pytest.raises(PromiseViolation):
        lift(UNIT, qcs_gadget(2, 5))
    with pytest.raises(ValueError):
        lift(tseitin_formula(triangle()).csp, ver_gadget())


def test_lifted_clause_for_requires_violation():
    lc = lift(UNIT, ver_gadget())
    beta = lc.encode([(2, 0)])  # VER(2, 0) = 1 satisfies (x)
    with pytest.raises(ValueError):
        lifted_clause_for(lc, 0, beta)
    assert translate_solution(lc, lifted_clause_for(lc, 1, beta)) == 1
