import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbslift.core_csp import (Constraint, Csp, bits_to_mask, canonical_search, csp_from_json,
                              csp_to_cnf, csp_to_cnf_with_origin, csp_to_json, dimacs_bytes,
                              is_unsatisfiable, mask_to_bits, read_dimacs, write_dimacs)
from cbslift.errors import DimacsError, SizeLimitError

from oracles import assignments, clause_sat, cnf_unsat


@st.composite
def cnfs(draw, max_vars=6, max_clauses=8):
    n = draw(st.integers(1, max_vars))
    m = draw(st.integers(0, max_clauses))
    clauses = []
    for _ in range(m):
        vs = draw(st.lists(st.integers(1, n), min_size=1, max_size=n, unique=True))
        signs = draw(st.lists(st.booleans(), min_size=len(vs), max_size=len(vs)))
        clauses.append([v if s else -v for v, s in zip(vs, signs)])
    return n, clauses


def test_mask_roundtrip():
    for m in range(32):
        assert bits_to_mask(mask_to_bits(m, 5)) == m
    assert mask_to_bits(6, 3) == (0, 1, 1)


def test_clause_table_matches_literals():
    c = Constraint.clause([1, -3])
    assert c.literals() == (1, -3)
    for a in assignments(3):
        assert c(a) == int(clause_sat([1, -3], a))


def test_constraint_validation():
    with pytest.raises(ValueError):
        Constraint((0, 0), (1, 1, 1, 1))
    with pytest.raises(ValueError):
        Constraint((0,), (1, 1, 1))
    with pytest.raises(ValueError):
        Constraint((0,), (1, 2))
    with pytest.raises(ValueError):
        Csp(1, (Constraint((3,), (0, 1)),))


def test_is_minimal():
    assert Constraint((0, 1), (0, 1, 1, 0)).is_minimal()
    # table ignores variable 1
    assert not Constraint((0, 1), (0, 1, 0, 1)).is_minimal()


def test_declared_degree_enforced():
    with pytest.raises(ValueError):
        Csp(3, (Constraint.clause([1, 2, 3]),), declared_degree=2)


@settings(max_examples=60, deadline=None)
@given(cnfs())
def test_unsat_agrees_with_brute_force(data):
    n, clauses = data
    assert is_unsatisfiable(Csp.from_clauses(n, clauses)) == cnf_unsat(n, clauses)


@settings(max_examples=40, deadline=None)
@given(cnfs(max_vars=5))
def test_canonical_search_feasible_sets(data):
    n, clauses = data
    S = canonical_search(Csp.from_clauses(n, clauses))
    fast = S.all_feasible_sets
    for a in assignments(n):
        # itertools.product is MSB-first, masks are LSB-first
        mask = bits_to_mask(a)
        want = frozenset(i for i, c in enumerate(clauses) if not clause_sat(c, a))
        assert fast[mask] == want == S.feasible_set(a)


@settings(max_examples=100, deadline=None)
@given(cnfs(max_vars=8, max_clauses=10))
def test_dimacs_roundtrip(data):
    n, clauses = data
    csp = Csp.from_clauses(n, clauses)
    raw = dimacs_bytes(csp, ["roundtrip"])
    back = read_dimacs(raw)
    assert back == csp
    assert dimacs_bytes(back, ["roundtrip"]) == raw


def test_dimacs_streams():
    csp = Csp.from_clauses(2, [[1, 2], [-1]])
    buf = io.BytesIO()
    write_dimacs(csp, buf)
    assert read_dimacs(io.BytesIO(buf.getvalue())) == csp
    assert read_dimacs(io.StringIO(buf.getvalue().decode())) == csp
    assert read_dimacs(buf.getvalue().decode()) == csp


@pytest.mark.parametrize("text", [
    "1 2 0\n",
    "p cnf 2\n1 0\n",
    "p cnf 2 1\n1 x 0\n",
    "p cnf 2 1\n3 0\n",
    "p cnf 2 1\n1 2\n",
    "p cnf 2 2\n1 0\n",
    "p cnf 2 1\n1 -1 0\n",
    "p cnf 2 1\np cnf 2 1\n1 0\n",
    "p dnf 2 1\n1 0\n",
    "",
])
def test_dimacs_errors(text):
    with pytest.raises(DimacsError):
        read_dimacs(text)


def test_dimacs_comments_and_duplicates():
    csp = read_dimacs("c hello\np cnf 3 2\n1 1 -2 0\n% trailer\n3\n0\n")
    assert csp.clauses() == [(1, -2), (3,)]


def test_cnf_conversion_preserves_semantics():
    xor = Constraint((0, 1, 2), tuple(int(bin(r).count("1") % 2 == 1) for r in range(8)))
    csp = Csp(3, (xor, Constraint.clause([1])))
    cnf, origin = csp_to_cnf_with_origin(csp)
    assert cnf.is_clausal()
    assert origin == (0, 0, 0, 0, 1)
    for a in assignments(3):
        assert csp.satisfies(a) == cnf.satisfies(a)
    assert csp_to_cnf(cnf) == cnf


def test_json_roundtrip():
    csp = Csp(3, (Constraint((0, 2), (0, 1, 1, 0)), Constraint.clause([-2])))
    obj = csp_to_json(csp)
    assert csp_from_json(obj) == csp
    assert csp_from_json(json.dumps(obj)) == csp


def test_non_clausal_rejected_by_writer():
    csp = Csp(2, (Constraint((0, 1), (0, 1, 1, 0)),))
    with pytest.raises(ValueError):
        dimacs_bytes(csp)


def test_unsat_size_cap():
    with pytest.raises(SizeLimitError):
        is_unsatisfiable(Csp(30, ()))


def test_violation_matrix():
    csp = Csp.from_clauses(2, [[1], [2], [-1, -2]])
    mat = csp.violation_matrix(np.arange(4))
    assert mat.tolist() == [[True, True, False], [False, True, False],
                            [True, False, False], [False, False, True]]
