"""Versatile gadgets and their witnesses.

A gadget is a k-party function. Party ``i`` holds a value from a finite domain
indexed by ``range(domain_sizes[i])``; ``element``/``index`` convert between a
value and its index. Each versatile gadget carries three witnesses:

* ``and_embed[i] = (value for bit 0, value for bit 1)`` so that
  ``g(embed(y)) = AND(y)``;
* ``flip[i]``, a per-party map with ``g(flip(x)) = 1 - g(x)``;
* ``rsr``, a random self-reduction: shared randomness picks an outcome and each
  party maps its own value, sending every z-input to a uniform z-input.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.stats import chi2_contingency

from . import perms as P
from .errors import PatternNotFound, PromiseViolation, SizeLimitError

MAX_ENUM = 10 ** 6


@dataclass(frozen=True)
class RandomSelfReduction:
    """Outcome ``o`` maps party ``i``'s value ``v`` to ``apply(o, i, v)``.

    ``outcome(j)`` decodes outcome number ``j`` when the space is small enough
    to enumerate; ``sample(rng)`` draws a uniform outcome.
    """

    n_outcomes: int
    apply: Callable[[object, int, object], object]
    sample: Callable[[np.random.Generator], object]
    outcome: Callable[[int], object] | None = None

    @property
    def enumerable(self) -> bool:
        return self.outcome is not None and self.n_outcomes <= MAX_ENUM

    def outcomes(self) -> Iterator[object]:
        if not self.enumerable:
            raise SizeLimitError(f"{self.n_outcomes} outcomes cannot be enumerated")
        for j in range(self.n_outcomes):
            yield self.outcome(j)

    def map_input(self, o, x: Sequence) -> tuple:
        return tuple(self.apply(o, i, xi) for i, xi in enumerate(x))


@dataclass(frozen=True)
class Gadget:
    name: str
    k: int
    domain_sizes: tuple[int, ...]
    evaluate: Callable[[tuple], int | None]
    element: Callable[[int, int], object]
    index: Callable[[int, object], int]
    and_embed: tuple[tuple[object, object], ...] | None = None
    flip: tuple[Callable[[object], object], ...] | None = None
    rsr: RandomSelfReduction | None = None
    promise: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, x: Sequence) -> int | None:
        return self.evaluate(tuple(x))

    @property
    def size(self) -> int:
        return math.prod(self.domain_sizes)

    @property
    def bits_per_party(self) -> tuple[int, ...]:
        return tuple(max(1, math.ceil(math.log2(s))) if s > 1 else 0 for s in self.domain_sizes)

    @property
    def is_versatile_candidate(self) -> bool:
        return self.and_embed is not None and self.flip is not None and self.rsr is not None

    def domain(self, i: int) -> list:
        if self.domain_sizes[i] > MAX_ENUM:
            raise SizeLimitError(f"party {i} domain has {self.domain_sizes[i]} values")
        return [self.element(i, j) for j in range(self.domain_sizes[i])]

    def inputs(self) -> Iterator[tuple]:
        if self.size > MAX_ENUM:
            raise SizeLimitError(f"{self.size} inputs cannot be enumerated")
        return itertools.product(*(self.domain(i) for i in range(self.k)))

    def embed(self, y: Sequence[int]) -> tuple:
        return tuple(self.and_embed[i][b] for i, b in enumerate(y))

    def flip_input(self, x: Sequence) -> tuple:
        return tuple(f(xi) for f, xi in zip(self.flip, x))

    def random_input(self, rng: np.random.Generator) -> tuple:
        return tuple(self.element(i, int(rng.integers(s))) for i, s in enumerate(self.domain_sizes))

    def preimage(self, z: int) -> list[tuple]:
        return [x for x in self.inputs() if self(x) == z]

    def input_key(self, x: Sequence) -> tuple[int, ...]:
        return tuple(self.index(i, xi) for i, xi in enumerate(x))

    def to_json(self) -> dict:
        out = {"name": self.name, "k": self.k, "domain_sizes": list(self.domain_sizes),
               "bits_per_party": list(self.bits_per_party), "promise": self.promise}
        if self.size <= 4096:
            out["table"] = [self(x) for x in self.inputs()]
        out["witnesses"] = {
            "and_embed": None if self.and_embed is None else
            [[self.index(i, v) for v in pair] for i, pair in enumerate(self.and_embed)],
            "flip": self.flip is not None,
            "rsr_outcomes": None if self.rsr is None else self.rsr.n_outcomes,
        }
        out.update({k: v for k, v in self.meta.items() if isinstance(v, (int, str, list, bool))})
        return out


def _int_domain(i: int, j: int) -> int:
    return j


def _int_index(i: int, v: int) -> int:
    return int(v)


# --------------------------------------------------------------------------- VER


def ver(x: int, y: int) -> int:
    return int((x + y) % 4 in (2, 3))


def ver_gadget() -> Gadget:
    def apply(o, i, v):
        c, a = o
        if i == 0:
            return (a + (1 - v if c else v)) % 4
        return (-a + (-v if c else v)) % 4

    def sample(rng):
        return int(rng.integers(2)), int(rng.integers(4))

    rsr = RandomSelfReduction(8, apply, sample, outcome=lambda j: divmod(j, 4))
    return Gadget(
        name="ver", k=2, domain_sizes=(4, 4),
        evaluate=lambda x: ver(*x),
        element=_int_domain, index=_int_index,
        and_embed=((0, 1), (0, 1)),
        flip=(lambda v: (v + 2) % 4, lambda v: v),
        rsr=rsr,
    )


# --------------------------------------------------------------------------- HN

HN_TABLE = (
    (1, 0, 0, 0, 1, 1),
    (0, 1, 0, 1, 0, 1),
    (0, 0, 1, 1, 1, 0),
)


def hn_gadget() -> Gadget:
    """Three-row comparison gadget; carries no versatility witnesses."""
    return Gadget(name="hn", k=2, domain_sizes=(3, 6),
                  evaluate=lambda x: HN_TABLE[x[0]][x[1]],
                  element=_int_domain, index=_int_index)


def two_party_matrix(g: Gadget) -> list[list[int | None]]:
    a, b = g.domain_sizes
    return [[g((g.element(0, i), g.element(1, j))) for j in range(b)] for i in range(a)]


def find_reduction(g: Sequence[Sequence], h: Sequence[Sequence], injective: bool = True):
    """Maps ``(a, b)`` with ``g[x][y] = h[a[x]][b[y]]``, or None.

    Rows of ``g`` go to rows of ``h`` (tried exhaustively); each column of
    ``g`` then picks a matching column of ``h`` independently, subject to
    injectivity when requested.
    """
    rg, cg = len(g), len(g[0])
    rh, ch = len(h), len(h[0])
    if injective and (rg > rh or cg > ch):
        return None
    rows = itertools.permutations(range(rh), rg) if injective else itertools.product(range(rh), repeat=rg)
    for a in rows:
        options = []
        for y in range(cg):
            col = [g[x][y] for x in range(rg)]
            options.append([c for c in range(ch) if all(h[a[x]][c] == col[x] for x in range(rg))])
        b = _pick_columns(options, injective)
        if b is not None:
            return tuple(a), b
    return None


def _pick_columns(options, injective):
    if not injective:
        return tuple(o[0] for o in options) if all(options) else None

    def rec(j, used):
        if j == len(options):
            return ()
        for c in options[j]:
            if c not in used:
                rest = rec(j + 1, used | {c})
                if rest is not None:
                    return (c,) + rest
        return None

    return rec(0, frozenset())


def reduces_to(g: Sequence[Sequence], h: Sequence[Sequence], injective: bool = True) -> bool:
    """``g <= h`` with the parties of ``h`` in either order."""
    ht = [list(col) for col in zip(*h)]
    return find_reduction(g, h, injective) is not None or find_reduction(g, ht, injective) is not None


# --------------------------------------------------------------------------- QCS


def quadratic_character(p: int) -> list[int]:
    """``chi[v] = 1`` iff ``v`` is a nonzero square mod ``p``."""
    chi = [0] * p
    for v in range(1, p):
        chi[v * v % p] = 1
    return chi


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, math.isqrt(p) + 1))


def find_pattern(p: int, k: int) -> int:
    """Smallest ``a`` with ``chi(a..a+k-1) = 0`` and ``chi(a+k) = 1``."""
    chi = quadratic_character(p)
    for a in range(1, p - k):
        if not any(chi[a:a + k]) and chi[a + k]:
            return a
    raise PatternNotFound(f"no run of {k} non-residues followed by a residue mod {p}; try a larger prime")


def first_pattern_prime(k: int, start: int = 3) -> tuple[int, int]:
    p = start
    while True:
        if _is_prime(p) and p > 2:
            try:
                return p, find_pattern(p, k)
            except PatternNotFound:
                pass
        p += 1


def qcs_gadget(k: int, p: int | None = None) -> Gadget:
    if p is None:
        p, a = first_pattern_prime(k)
    else:
        if not _is_prime(p) or p == 2:
            raise ValueError(f"{p} is not an odd prime")
        a = find_pattern(p, k)
    chi = quadratic_character(p)
    s = next(v for v in range(1, p) if not chi[v])
    residues = [v for v in range(1, p) if chi[v]]

    def evaluate(x):
        t = sum(x) % p
        return None if t == 0 else chi[t]

    def shifts(j):
        free = []
        for _ in range(k - 1):
            j, d = divmod(j, p)
            free.append(d)
        return tuple(free) + ((-sum(free)) % p,)

    def outcome(j):
        ri, rest = divmod(j, p ** (k - 1))
        return residues[ri], shifts(rest)

    def sample(rng):
        free = tuple(int(v) for v in rng.integers(p, size=k - 1))
        return residues[int(rng.integers(len(residues)))], free + ((-sum(free)) % p,)

    rsr = RandomSelfReduction(len(residues) * p ** (k - 1),
                              lambda o, i, v: (o[0] * v + o[1][i]) % p, sample, outcome)
    embed = ((a, (a + 1) % p),) + ((0, 1),) * (k - 1)
    return Gadget(
        name=f"qcs:{p},{k}", k=k, domain_sizes=(p,) * k,
        evaluate=evaluate, element=_int_domain, index=_int_index,
        and_embed=embed,
        flip=tuple((lambda v: s * v % p) for _ in range(k)),
        rsr=rsr, promise=True,
        meta={"p": p, "pattern_start": a, "nonresidue": s},
    )


# --------------------------------------------------------------------------- permutation chains


@dataclass(frozen=True)
class Pbp:
    """Permutation branching program; instructions ``(var, pi, tau)`` act first to last."""

    width: int
    n_vars: int
    instructions: tuple[tuple[int, P.Perm, P.Perm], ...]
    gamma: P.Perm

    def __post_init__(self):
        for i, pi, tau in self.instructions:
            if not 0 <= i < self.n_vars:
                raise ValueError(f"instruction reads unknown variable {i}")
            if len(pi) != self.width or len(tau) != self.width or not (P.is_perm(pi) and P.is_perm(tau)):
                raise ValueError("instruction permutations must be permutations of the width")
        if self.gamma == P.identity(self.width):
            raise ValueError("gamma must not be the identity")

    @property
    def length(self) -> int:
        return len(self.instructions)

    def to_json(self) -> dict:
        return {"width": self.width, "n_vars": self.n_vars, "gamma": list(self.gamma),
                "instructions": [[i, list(pi), list(tau)] for i, pi, tau in self.instructions]}

    @classmethod
    def from_json(cls, obj: dict) -> "Pbp":
        ins = tuple((int(i), tuple(pi), tuple(tau)) for i, pi, tau in obj["instructions"])
        return cls(int(obj["width"]), int(obj["n_vars"]), ins, tuple(obj["gamma"]))


def evaluate_pbp(pbp: Pbp, x: Sequence[int]) -> P.Perm:
    return P.compose_all([tau if x[i] else pi for i, pi, tau in pbp.instructions], pbp.width)


def gamma_computes_and(pbp: Pbp, k: int) -> bool:
    e = P.identity(pbp.width)
    for y in itertools.product((0, 1), repeat=k):
        if evaluate_pbp(pbp, y) != (pbp.gamma if all(y) else e):
            return False
    return True


# two 5-cycles whose commutator is again a 5-cycle
_ALPHA = P.cycle(5, (0, 1, 2, 3, 4))
_BETA = P.cycle(5, (0, 2, 1, 4, 3))


def _commutator(a: P.Perm, b: P.Perm) -> P.Perm:
    # the program runs a, b, a^-1, b^-1 in that order
    return P.compose_all([a, b, P.inverse(a), P.inverse(b)], len(a))


def _conjugator(src: P.Perm, dst: P.Perm) -> P.Perm:
    """theta with ``theta o src o theta^-1 = dst`` for two full cycles."""
    theta = [0] * len(src)
    u, v = 0, 0
    for _ in range(len(src)):
        theta[u] = v
        u, v = src[u], dst[v]
    return tuple(theta)


def _conjugate_program(ins: list, theta: P.Perm) -> list:
    out = list(ins)
    th_inv = P.inverse(theta)
    i, pi, tau = out[0]
    out[0] = (i, P.compose(pi, th_inv), P.compose(tau, th_inv))
    i, pi, tau = out[-1]
    out[-1] = (i, P.compose(theta, pi), P.compose(theta, tau))
    return out


def _invert_program(ins: list) -> list:
    return [(i, P.inverse(pi), P.inverse(tau)) for i, pi, tau in reversed(ins)]


def _and_program(vars_: Sequence[int], gamma: P.Perm) -> list:
    e = P.identity(5)
    if len(vars_) == 1:
        return [(vars_[0], e, gamma)]
    mid = (len(vars_) + 1) // 2
    pa = _and_program(vars_[:mid], _ALPHA)
    pb = _and_program(vars_[mid:], _BETA)
    prog = pa + pb + _invert_program(pa) + _invert_program(pb)
    return _conjugate_program(prog, _conjugator(_commutator(_ALPHA, _BETA), gamma))


def barrington_and(k: int) -> Pbp:
    """Width-5 program that evaluates to a 5-cycle on the all-ones input and to the identity elsewhere."""
    if k < 1:
        raise ValueError("k must be positive")
    assert P.is_full_cycle(_commutator(_ALPHA, _BETA))
    gamma = _ALPHA
    return Pbp(5, k, tuple(_and_program(list(range(k)), gamma)), gamma)


def _pad_and_relabel(pbp: Pbp) -> Pbp:
    """Make the width even and move gamma(0) into the upper half."""
    w = pbp.width
    ins = list(pbp.instructions)
    gamma = pbp.gamma
    if w % 2:
        ins = [(i, pi + (w,), tau + (w,)) for i, pi, tau in ins]
        gamma = gamma + (w,)
        w += 1
    g0 = gamma[0]
    if g0 < w // 2:
        if g0 == 0:
            raise ValueError("gamma fixes 0; the pointer value cannot separate the outputs")
        sigma = P.cycle(w, (g0, w // 2))

        def conj(p):
            return P.compose(sigma, P.compose(p, sigma))

        ins = [(i, conj(pi), conj(tau)) for i, pi, tau in ins]
        gamma = conj(gamma)
    return Pbp(w, pbp.n_vars, tuple(ins), gamma)


def _perm_chain_gadget(name: str, k: int, w: int, owners: Sequence[int],
                       and_pairs: Sequence[tuple[P.Perm, P.Perm]] | None,
                       single: bool, meta: dict | None = None) -> Gadget:
    """Pointer-chasing gadget over permutations of ``range(w)``.

    Layer ``l`` is owned by party ``owners[l]``. The value is 0 iff
    ``(x_L o ... o x_1)(0) < w/2``. With ``single`` each party owns exactly one
    layer and its value is a bare permutation rather than a tuple.
    """
    L = len(owners)
    layers = [[l for l in range(L) if owners[l] == i] for i in range(k)]
    wf = math.factorial(w)
    half = w // 2
    last = L - 1
    shift = tuple((j + half) % w for j in range(w))

    def unpack(i, v):
        return (v,) if single else v

    def pack(vs):
        return vs[0] if single else tuple(vs)

    def evaluate(x):
        chain = [None] * L
        for i, v in enumerate(x):
            for l, p in zip(layers[i], unpack(i, v)):
                chain[l] = p
        ptr = 0
        for p in chain:
            ptr = p[ptr]
        return int(ptr >= half)

    def element(i, j):
        vs = []
        for _ in layers[i]:
            j, r = divmod(j, wf)
            vs.append(P.unrank(r, w))
        return pack(vs)

    def index(i, v):
        j = 0
        for p in reversed(unpack(i, v)):
            j = j * wf + P.rank(p)
        return j

    embed = None
    if and_pairs is not None:
        embed = tuple(tuple(pack([and_pairs[l][b] for l in layers[i]]) for b in (0, 1)) for i in range(k))

    owner_last = owners[last]

    def make_flip(i):
        if i != owner_last:
            return lambda v: v

        def f(v):
            vs = list(unpack(i, v))
            vs[-1] = P.compose(shift, vs[-1])
            return pack(vs)
        return f

    # outcome = (pi_1, ..., pi_{L+1}); pi_1 fixes 0, pi_{L+1} fixes range(half) setwise
    def apply(o, i, v):
        return pack([P.compose(o[l + 1], P.compose(p, P.inverse(o[l])))
                     for l, p in zip(layers[i], unpack(i, v))])

    first_n = math.factorial(w - 1)
    half_n = math.factorial(half)

    def first_perm(j):
        return (0,) + tuple(1 + t for t in P.unrank(j, w - 1))

    def last_perm(j):
        lo, hi = divmod(j, half_n)
        return P.unrank(lo, half) + tuple(half + t for t in P.unrank(hi, w - half))

    def outcome(j):
        j, a = divmod(j, first_n)
        mids = []
        for _ in range(L - 1):
            j, r = divmod(j, wf)
            mids.append(P.unrank(r, w))
        return (first_perm(a), *mids, last_perm(j))

    def sample(rng):
        return (first_perm(int(rng.integers(first_n))),
                *(P.random_perm(w, rng) for _ in range(L - 1)),
                last_perm(int(rng.integers(half_n * half_n))))

    n_out = first_n * wf ** (L - 1) * half_n * half_n
    rsr = RandomSelfReduction(n_out, apply, sample, outcome if n_out <= MAX_ENUM else None)
    sizes = tuple(wf ** len(layers[i]) for i in range(k))
    info = {"width": w, "length": L, "layers": [list(ls) for ls in layers],
            "bits": [len(ls) * math.ceil(math.log2(wf)) for ls in layers]}
    info.update(meta or {})
    return Gadget(name=name, k=k, domain_sizes=sizes, evaluate=evaluate,
                  element=element, index=index, and_embed=embed,
                  flip=tuple(make_flip(i) for i in range(k)), rsr=rsr, meta=info)


def jump_gadget(k: int) -> Gadget:
    if k < 1:
        raise ValueError("k must be positive")
    w = 2 * k
    e = P.identity(w)
    step = tuple((j + 1) % w for j in range(w))
    return _perm_chain_gadget(f"jump:{k}", k, w, list(range(k)), [(e, step)] * k, single=True)


def pbp_to_gadget(pbp: Pbp, k: int) -> Gadget:
    if pbp.n_vars != k:
        raise ValueError(f"program has {pbp.n_vars} variables, expected {k}")
    if k <= 16 and not gamma_computes_and(pbp, k):
        raise PromiseViolation("program does not gamma-compute AND")
    prog = _pad_and_relabel(pbp)
    owners = [i for i, _, _ in prog.instructions]
    if set(owners) != set(range(k)):
        raise ValueError("every variable must be read at least once")
    pairs = [(pi, tau) for _, pi, tau in prog.instructions]
    reads = [owners.count(i) for i in range(k)]
    g = _perm_chain_gadget(f"pbp:{k}x{prog.length}", k, prog.width, owners, pairs, single=False,
                           meta={"balanced_reads": len(set(reads)) == 1})
    return g


def gadget_by_name(spec: str, pbp_loader: Callable[[str], Pbp] | None = None) -> Gadget:
    """``ver``, ``hn``, ``qcs:p,k``, ``jump:k`` or ``pbp:<path>``."""
    name, _, arg = spec.partition(":")
    if name == "ver":
        return ver_gadget()
    if name == "hn":
        return hn_gadget()
    if name == "qcs":
        p, k = (int(t) for t in arg.split(","))
        return qcs_gadget(k, p)
    if name == "jump":
        return jump_gadget(int(arg))
    if name == "pbp":
        if pbp_loader is None:
            raise ValueError("pbp gadgets need a loader")
        pbp = pbp_loader(arg)
        return pbp_to_gadget(pbp, pbp.n_vars)
    raise ValueError(f"unknown gadget {spec!r}")


# --------------------------------------------------------------------------- verification


@dataclass
class ClauseResult:
    passed: bool
    counterexample: object = None
    detail: str = ""

    def to_json(self) -> dict:
        ce = self.counterexample
        return {"passed": self.passed, "counterexample": _jsonable(ce), "detail": self.detail}


def _jsonable(v):
    if isinstance(v, (tuple, list)):
        return [_jsonable(t) for t in v]
    if isinstance(v, Fraction):
        return str(v)
    return v


@dataclass
class VersatilityReport:
    gadget: str
    mode: str
    clauses: dict
    extras: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses.values()) and all(c.passed for c in self.extras.values())

    def to_json(self) -> dict:
        return {"gadget": self.gadget, "mode": self.mode, "passed": self.passed,
                "clauses": {k: v.to_json() for k, v in self.clauses.items()},
                "extras": {k: v.to_json() for k, v in self.extras.items()}}


def _check_and_embed(g: Gadget) -> ClauseResult:
    for i, (a, b) in enumerate(g.and_embed):
        if g.index(i, a) == g.index(i, b):
            return ClauseResult(False, i, "embedding of party is not injective")
    for y in itertools.product((0, 1), repeat=g.k):
        if g(g.embed(y)) != int(all(y)):
            return ClauseResult(False, y, "g(embed(y)) != AND(y)")
    return ClauseResult(True, detail=f"{2 ** g.k} inputs")


def _check_not_and(g: Gadget) -> ClauseResult:
    for y in itertools.product((0, 1), repeat=g.k):
        if g(g.flip_input(g.embed(y))) != 1 - int(all(y)):
            return ClauseResult(False, y, "flip(embed(y)) does not compute NOT AND")
    return ClauseResult(True)


def _flip_order(g: Gadget, xs: list) -> list:
    # 1-inputs first, so a planted failure reports the earliest 1-input
    return [x for x in xs if g(x) == 1] + [x for x in xs if g(x) == 0]


def verify_versatility(g: Gadget, mode: str = "exact", seed: int = 0, samples: int = 10 ** 5,
                       significance: float = 1e-3, flip_samples: int = 10 ** 4) -> VersatilityReport:
    if not g.is_versatile_candidate:
        raise ValueError(f"gadget {g.name} carries no versatility witnesses")
    if mode == "exact":
        return _verify_exact(g)
    if mode in ("stat", "statistical"):
        return _verify_statistical(g, np.random.default_rng(seed), samples, significance, flip_samples)
    raise ValueError(f"unknown mode {mode!r}")


def _verify_exact(g: Gadget) -> VersatilityReport:
    if g.size > MAX_ENUM or not g.rsr.enumerable:
        raise SizeLimitError(f"exact verification of {g.name} is too large; use statistical mode")
    xs = list(g.inputs())
    vals = {x: g(x) for x in xs}
    defined = [x for x in xs if vals[x] is not None]
    clauses, extras = {}, {}
    clauses["and_embed"] = _check_and_embed(g)

    flip = ClauseResult(True, detail=f"{len(defined)} defined inputs")
    for x in _flip_order(g, defined):
        fx = g.flip_input(x)
        if g(fx) is None or g(fx) != 1 - vals[x]:
            flip = ClauseResult(False, x, "g(flip(x)) != 1 - g(x)")
            break
    clauses["flip"] = flip

    rsr = g.rsr
    outcomes = list(rsr.outcomes())
    classes = {z: [x for x in defined if vals[x] == z] for z in (0, 1)}
    result = ClauseResult(True, detail=f"{len(outcomes)} outcomes, exact counts")
    for x in defined:
        z = vals[x]
        counts: dict = {}
        for o in outcomes:
            img = rsr.map_input(o, x)
            if vals.get(img) != z:
                result = ClauseResult(False, (x, img), "rsr changed the value")
                break
            counts[img] = counts.get(img, 0) + 1
        if not result.passed:
            break
        target = Fraction(1, len(classes[z]))
        bad = [y for y in classes[z] if Fraction(counts.get(y, 0), len(outcomes)) != target]
        if bad:
            result = ClauseResult(False, (x, bad[0]),
                                  f"probability {Fraction(counts.get(bad[0], 0), len(outcomes))} != {target}")
            break
    clauses["rsr"] = result

    # injectivity of every per-party map
    inj = ClauseResult(True)
    for i in range(g.k):
        dom = g.domain(i)
        if len({g.index(i, g.flip[i](v)) for v in dom}) != len(dom):
            inj = ClauseResult(False, ("flip", i), "flip map not injective")
            break
        for j, o in enumerate(outcomes):
            if len({g.index(i, rsr.apply(o, i, v)) for v in dom}) != len(dom):
                inj = ClauseResult(False, ("rsr", i, j), "rsr map not injective")
                break
        if not inj.passed:
            break
    extras["injective"] = inj
    if flip.passed:
        ones = len(classes[1])
        extras["balanced"] = ClauseResult(ones == len(classes[0]), None, f"{ones} ones, {len(classes[0])} zeros")
    if clauses["and_embed"].passed and flip.passed:
        extras["not_and"] = _check_not_and(g)
    return VersatilityReport(g.name, "exact", clauses, extras)


N_BUCKETS = 32


def _features(g: Gadget, xs: list) -> list[list[int]]:
    """Bucketed views of the inputs: the whole tuple, then each party on its own."""
    keys = [g.input_key(x) for x in xs]
    out = [[hash(kk) % N_BUCKETS for kk in keys]]
    for i in range(g.k):
        out.append([kk[i] % N_BUCKETS for kk in keys])
    return out


def _two_sample_pvalue(a: list[int], b: list[int]) -> float:
    ta = np.bincount(a, minlength=N_BUCKETS)
    tb = np.bincount(b, minlength=N_BUCKETS)
    keep = (ta + tb) > 0
    table = np.vstack([ta[keep], tb[keep]])
    if table.shape[1] < 2:
        return 1.0
    return float(chi2_contingency(table)[1])


def _verify_statistical(g: Gadget, rng, samples: int, significance: float,
                        flip_samples: int) -> VersatilityReport:
    clauses, extras = {}, {}
    clauses["and_embed"] = _check_and_embed(g)

    flip = ClauseResult(True, detail=f"{flip_samples} sampled inputs")
    for _ in range(flip_samples):
        x = g.random_input(rng)
        v = g(x)
        if v is None:
            continue
        if g(g.flip_input(x)) != 1 - v:
            flip = ClauseResult(False, x, "g(flip(x)) != 1 - g(x)")
            break
    clauses["flip"] = flip
    if clauses["and_embed"].passed and flip.passed:
        extras["not_and"] = _check_not_and(g)

    n_tests = 2 * (g.k + 1)
    alpha = significance / n_tests
    rsr = ClauseResult(True)
    pvals = []
    for z in (0, 1):
        start = g.embed((z,) * g.k) if z == 1 else g.embed((0,) * g.k)
        images = []
        for _ in range(samples):
            o = g.rsr.sample(rng)
            img = g.rsr.map_input(o, start)
            if g(img) != z:
                rsr = ClauseResult(False, (start, img), "rsr changed the value")
                break
            images.append(img)
        if not rsr.passed:
            break
        ref = []
        while len(ref) < samples:
            x = g.random_input(rng)
            if g(x) == z:
                ref.append(x)
        for fa, fb in zip(_features(g, images), _features(g, ref)):
            pvals.append(_two_sample_pvalue(fa, fb))
        if min(pvals) < alpha:
            rsr = ClauseResult(False, z, f"chi-square p={min(pvals):.3g} < {alpha:.3g}")
            break
    if rsr.passed:
        rsr.detail = f"min p-value {min(pvals):.4g} over {len(pvals)} tests, threshold {alpha:.3g}"
    clauses["rsr"] = rsr
    return VersatilityReport(g.name, "statistical", clauses, extras)


def broken_flip(g: Gadget) -> Gadget:
    """Copy of ``g`` whose flip maps are the identity (a planted failure)."""
    return replace(g, flip=tuple((lambda v: v) for _ in range(g.k)))
