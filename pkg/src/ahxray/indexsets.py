"""Exact arithmetic of polyhomogeneous index sets.

An index set is a set of pairs ``(s, p)`` with ``p`` a nonnegative integer,
closed under ``(s, p) -> (s + m, p - l)`` for integers ``m >= 0`` and
``0 <= l <= p``.  Within a truncation order ``s_max`` it is determined by
its largest log power at every exponent, which is how it is stored.
Exponents are exact rationals.
"""

import ast
import random
from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "IndexSet",
    "IndexTriple",
    "closure",
    "index_sum",
    "extended_union",
    "compose",
    "map_phg",
    "nullspace_index",
    "inclusion_check",
    "random_inclusion_trials",
    "normal_operator_triple",
    "inverse_triple",
    "identity_triple",
    "remainder_triple",
    "evaluate",
    "render",
    "Composition",
    "random_index_set",
    "MAX_DENOMINATOR",
    "DEFAULT_S_MAX",
]

MAX_DENOMINATOR = 64
DEFAULT_S_MAX = Fraction(6)


def _frac(s):
    if isinstance(s, float):
        f = Fraction(s).limit_denominator(MAX_DENOMINATOR)
        if float(f) != s:
            raise ValueError(f"exponent {s} is not a rational with denominator <= {MAX_DENOMINATOR}")
    else:
        f = Fraction(s)
    if f.denominator > MAX_DENOMINATOR:
        raise ValueError(f"exponent {f} has denominator above {MAX_DENOMINATOR}")
    return f


def _fill(powers, s_max):
    """Close a map ``s -> p`` upward in ``s`` within ``s_max``."""
    out = {}
    for s, p in powers.items():
        t = s
        while t <= s_max:
            if out.get(t, -1) < p:
                out[t] = p
            t += 1
    return out


@dataclass(frozen=True)
class IndexSet:
    """A closed index set truncated at ``s_max``; ``powers`` maps each exponent to its largest log power."""

    powers: tuple
    s_max: Fraction = DEFAULT_S_MAX
    _lookup: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        d = dict(self.powers)
        object.__setattr__(self, "_lookup", d)
        for s, p in d.items():
            if s + 1 <= self.s_max and d.get(s + 1, -1) < p:
                raise ValueError("index set violates the closure axiom")

    @classmethod
    def from_map(cls, powers, s_max=DEFAULT_S_MAX):
        s_max = _frac(s_max)
        full = _fill({_frac(s): int(p) for s, p in powers.items() if _frac(s) <= s_max}, s_max)
        return cls(tuple(sorted(full.items())), s_max)

    @classmethod
    def empty(cls, s_max=DEFAULT_S_MAX):
        return cls((), _frac(s_max))

    def __contains__(self, item):
        s, p = item
        s = Fraction(s)
        return s <= self.s_max and 0 <= p <= self._lookup.get(s, -1)

    def power(self, s):
        return self._lookup.get(Fraction(s), -1)

    @property
    def exponents(self):
        return tuple(s for s, _ in self.powers)

    def is_empty(self):
        return not self.powers

    def minimum(self):
        """Smallest exponent, ``None`` for the empty set."""
        return self.powers[0][0] if self.powers else None

    def generators(self):
        """Minimal generating pairs: the canonical form."""
        best = {}
        out = []
        for s, p in self.powers:
            key = s - (s.numerator // s.denominator)
            if p > best.get(key, -1):
                out.append((s, p))
                best[key] = p
        return tuple(out)

    def elements(self):
        return tuple((s, q) for s, p in self.powers for q in range(p + 1))

    def truncate(self, s_max):
        s_max = min(self.s_max, _frac(s_max))
        return IndexSet(tuple((s, p) for s, p in self.powers if s <= s_max), s_max)

    def issubset(self, other):
        return all(p <= other.power(s) for s, p in self.powers if s <= other.s_max)

    def same_within(self, other):
        m = min(self.s_max, other.s_max)
        return self.truncate(m).powers == other.truncate(m).powers

    def __add__(self, other):
        return index_sum(self, other)

    def __or__(self, other):
        return extended_union(self, other)

    def notation(self):
        """Written as a union of closures, e.g. ``{(1,0)}‾ ∪ {(3,1)}‾``."""
        gens = self.generators()
        if not gens:
            return "∅"
        return " ∪ ".join(f"{{({_fmt(s)},{p})}}‾" for s, p in gens)

    def __str__(self):
        return self.notation()


def _fmt(s):
    return str(s.numerator) if s.denominator == 1 else f"{s.numerator}/{s.denominator}"


def closure(generators, s_max=DEFAULT_S_MAX):
    """Smallest index set containing the given pairs, truncated at ``s_max``."""
    s_max = _frac(s_max)
    powers = {}
    for s, p in generators:
        s = _frac(s)
        if p < 0 or int(p) != p:
            raise ValueError("log powers are nonnegative integers")
        if s <= s_max and powers.get(s, -1) < p:
            powers[s] = int(p)
    return IndexSet.from_map(powers, s_max)


def index_sum(E, F):
    """``E + F``: pairwise sums of exponents and of log powers."""
    s_max = min(E.s_max, F.s_max)
    out = {}
    for s, p in E.powers:
        for t, q in F.powers:
            u = s + t
            if u <= s_max and out.get(u, -1) < p + q:
                out[u] = p + q
    return IndexSet.from_map(out, s_max)


def extended_union(E, F):
    """``E ∪̄ F``: the union plus ``(s, p + p' + 1)`` at every shared exponent."""
    s_max = min(E.s_max, F.s_max)
    out = {}
    for s, p in E.powers:
        if s <= s_max:
            out[s] = p
    for t, q in F.powers:
        if t <= s_max:
            p = out.get(t, -1)
            out[t] = p + q + 1 if p >= 0 else q
    return IndexSet.from_map(out, s_max)


def _multiple(F, j):
    out = closure([(0, 0)], F.s_max)
    for _ in range(j):
        out = index_sum(out, F)
    return out


@dataclass(frozen=True)
class IndexTriple:
    """Index sets at the left face, right face and front face of the stretched product."""

    left: IndexSet
    right: IndexSet
    front: IndexSet

    def notation(self):
        return f"left: {self.left}\nright: {self.right}\nfront: {self.front}"

    def __str__(self):
        return self.notation()


@dataclass(frozen=True)
class Composition:
    triple: IndexTriple
    admissible: bool


def _exceeds(a, b, n):
    """``Re(a + b) > n``, vacuous when either set is empty."""
    if a.is_empty() or b.is_empty():
        return True
    return a.minimum() + b.minimum() > n


def compose(P, Q, n=1):
    """Index sets of ``P Q`` with the admissibility verdict ``Re(E_r + F_l) > n``."""
    W_l = extended_union(index_sum(Q.left, P.front), P.left)
    W_r = extended_union(index_sum(P.right, Q.front), Q.right)
    W_f = extended_union(index_sum(P.left, Q.right), index_sum(P.front, Q.front))
    return Composition(IndexTriple(W_l, W_r, W_f), _exceeds(P.right, Q.left, n))


def map_phg(P, F, n=1):
    """Index set of ``P u`` for ``u`` polyhomogeneous with index set ``F``; returns ``(set, admissible)``."""
    out = extended_union(P.left, index_sum(P.front, F))
    return out, _exceeds(P.right, F, n)


def nullspace_index(F_l, F_f, j_max=None, n=1):
    """``∪̄_{j <= j_max} (F_l + j F_f)``; the default ``j_max`` is ``s_max - n``."""
    if not F_l.is_empty() and F_l.minimum() < n:
        raise ValueError("F_l must start at n or above")
    if not F_f.is_empty() and F_f.minimum() < 1:
        raise ValueError("F_f must start at 1 or above")
    s_max = min(F_l.s_max, F_f.s_max)
    if j_max is None:
        j_max = int(s_max - n)
    out = F_l.truncate(s_max)
    for j in range(1, j_max + 1):
        out = extended_union(out, index_sum(F_l, _multiple(F_f, j)))
    return out


def inclusion_check(E1, E2, F):
    """``(E1 ∪̄ E2) + F ⊂ (E1 + F) ∪̄ (E2 + F)`` within truncation."""
    lhs = index_sum(extended_union(E1, E2), F)
    rhs = extended_union(index_sum(E1, F), index_sum(E2, F))
    return lhs.issubset(rhs)


def random_index_set(rng, s_max=DEFAULT_S_MAX, max_gen=3, max_power=3, top=Fraction(3)):
    k = rng.randint(0, max_gen)
    steps = int(top * 2)
    gens = [(Fraction(rng.randint(0, steps), 2), rng.randint(0, max_power)) for _ in range(k)]
    return closure(gens, s_max)


def random_inclusion_trials(count=1000, seed=0):
    """Number of random triples (exponents in ½Z, log powers <= 3) for which the inclusion holds."""
    rng = random.Random(seed)
    ok = 0
    for _ in range(count):
        E1, E2, F = (random_index_set(rng) for _ in range(3))
        ok += inclusion_check(E1, E2, F)
    return ok


def normal_operator_triple(n=1, s_max=DEFAULT_S_MAX):
    """``N_g``: side faces ``{(n,0)}‾``, smooth at the front face."""
    return IndexTriple(closure([(n, 0)], s_max), closure([(n, 0)], s_max), closure([(0, 0)], s_max))


def inverse_triple(n=1, s_max=DEFAULT_S_MAX):
    """Hyperbolic inverse: side faces ``{(n+1,0)}‾``, smooth at the front face."""
    return IndexTriple(closure([(n + 1, 0)], s_max), closure([(n + 1, 0)], s_max), closure([(0, 0)], s_max))


def identity_triple(s_max=DEFAULT_S_MAX):
    return IndexTriple(IndexSet.empty(s_max), IndexSet.empty(s_max), closure([(0, 0)], s_max))


def remainder_triple(W):
    """Index sets of ``Id - W`` when the leading front term of ``W`` is that of the identity.

    The ``(0, 0)`` term cancels, so exponent 0 leaves the front set and the
    rest of its closure stays.
    """
    front = W.front
    if front.power(0) != 0:
        raise ValueError("front face does not start with the identity term (0, 0)")
    kept = IndexSet(tuple((s, p) for s, p in front.powers if s != 0), front.s_max)
    return IndexTriple(W.left, W.right, kept)


# --- expression language ---------------------------------------------------

_NAMED = {
    "Ng": normal_operator_triple,
    "B": inverse_triple,
}


class _Evaluator:
    def __init__(self, n, s_max):
        self.n = n
        self.s_max = s_max

    def number(self, node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return _frac(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -self.number(node.operand)
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Div, ast.Add, ast.Sub, ast.Mult)):
            a, b = self.number(node.left), self.number(node.right)
            if isinstance(node.op, ast.Div) and b == 0:
                raise ValueError("division by zero in an exponent")
            return {ast.Div: a / b if b else 0, ast.Add: a + b, ast.Sub: a - b, ast.Mult: a * b}[type(node.op)]
        if isinstance(node, ast.Name) and node.id == "n":
            return Fraction(self.n)
        raise ValueError(f"expected a number, got {ast.dump(node)}")

    def pairs(self, node):
        out = []
        for elt in node.elts:
            if not (isinstance(elt, ast.Tuple) and len(elt.elts) == 2):
                raise ValueError("index set literals hold (s, p) pairs")
            s, p = self.number(elt.elts[0]), self.number(elt.elts[1])
            if p.denominator != 1:
                raise ValueError("log powers are integers")
            out.append((s, int(p)))
        return out

    def __call__(self, node):
        if isinstance(node, (ast.Set, ast.List)):
            return closure(self.pairs(node), self.s_max)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "set":
            return IndexSet.empty(self.s_max)
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Add):
            return index_sum(self(node.left), self(node.right))
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.BitOr):
            return extended_union(self(node.left), self(node.right))
        if isinstance(node, ast.Name):
            if node.id in _NAMED:
                return _NAMED[node.id](self.n, self.s_max)
            if node.id == "Id":
                return identity_triple(self.s_max)
            raise ValueError(f"unknown name {node.id}")
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            kw = {k.arg: self.number(k.value) for k in node.keywords}
            sub = _Evaluator(int(kw.pop("n", self.n)), kw.pop("s_max", self.s_max))
            args = [sub(a) for a in node.args]
            name = node.func.id
            if name == "compose":
                return compose(args[0], args[1], sub.n)
            if name == "map_phg":
                return map_phg(args[0], args[1], sub.n)
            if name == "nullspace":
                if not args:
                    K = remainder_triple(compose(inverse_triple(sub.n, sub.s_max),
                                                 normal_operator_triple(sub.n, sub.s_max), sub.n).triple)
                    args = [K.left, K.front]
                j = kw.pop("j_max", None)
                return nullspace_index(args[0], args[1], None if j is None else int(j), sub.n)
            if name == "remainder":
                t = args[0].triple if isinstance(args[0], Composition) else args[0]
                return remainder_triple(t)
            if name == "closure":
                return args[0]
            if name in _NAMED:
                return _NAMED[name](sub.n, sub.s_max)
            raise ValueError(f"unknown function {name}")
        raise ValueError(f"unsupported expression: {ast.dump(node)}")


def evaluate(expression, n=1, s_max=DEFAULT_S_MAX):
    """Evaluate an index-set expression.

    ``{(1,0),(3/2,2)}`` is the closure of its pairs, ``+`` the sum, ``|``
    the extended union, ``set()`` the empty set; ``B`` and ``Ng`` are the
    inverse and normal operator triples; functions ``compose``,
    ``map_phg``, ``nullspace`` and ``remainder`` take keywords ``n`` and
    ``s_max``.
    """
    tree = ast.parse(expression.replace("∪̄", "|").replace("∅", "set()"), mode="eval")
    return _Evaluator(n, _frac(s_max))(tree.body)


def render(value):
    """Text form of an evaluation result."""
    if isinstance(value, Composition):
        K = None
        try:
            K = remainder_triple(value.triple)
        except ValueError:
            pass
        lines = [str(value.triple), f"admissible: {value.admissible}"]
        if K is not None:
            lines += ["remainder Id - composition:", str(K)]
        return "\n".join(lines)
    if isinstance(value, tuple):
        return f"{value[0]}\nadmissible: {value[1]}"
    return str(value)
