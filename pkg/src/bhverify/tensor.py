"""Canonical contraction-graph form for tensor monomials and expressions.

A monomial is an integer power of the positive function u times a product of
derivative/curvature factors whose index slots are either paired with each
other (contracted) or free.  Supported factors:

    Du      gradient of u                    1 slot
    D2u     Hessian of u                     2 slots, symmetric
    D3u     derivative of the Hessian        3 slots, symmetric in the last two
    Lap     trace of the Hessian             0 slots
    DLap    gradient of Lap                  1 slot
    Bilap   Laplacian of Lap                 0 slots
    Ric     Ricci tensor                     2 slots, symmetric
    g       metric                           2 slots, symmetric
    Etf     trace-free second-order tensor   2 slots, symmetric, traceless
    Fvec    first-order invariant vector     1 slot
    Gscal   zeroth-order invariant scalar    0 slots

Canonicalization first applies structural rewrites (metric elimination,
self-traces of D2u/D3u, vanishing traces of Etf) and then minimizes an
explicit serialization over all relabelings allowed by factor multiplicities
and slot symmetries.  Monomials stay tiny (at most 6 factors in practice), so
the exhaustive search is cheap and fully deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .coeffs import ONE, ParamScalar, N, ps
from .errors import MalformedMonomialError, UnsupportedCurvatureError, ValenceError


@dataclass(frozen=True)
class FactorInfo:
    arity: int
    # Permutations of local slot positions leaving the factor invariant.
    sym: tuple[tuple[int, ...], ...]
    # Degree in u under the scaling u -> t*u (curvature and metric carry none).
    u_degree: int
    traceless: bool = False


FACTORS: dict[str, FactorInfo] = {
    "Du": FactorInfo(1, ((0,),), 1),
    "D2u": FactorInfo(2, ((0, 1), (1, 0)), 1),
    "D3u": FactorInfo(3, ((0, 1, 2), (0, 2, 1)), 1),
    "Lap": FactorInfo(0, ((),), 1),
    "DLap": FactorInfo(1, ((0,),), 1),
    "Bilap": FactorInfo(0, ((),), 1),
    "Ric": FactorInfo(2, ((0, 1), (1, 0)), 0),
    "g": FactorInfo(2, ((0, 1), (1, 0)), 0),
    "Etf": FactorInfo(2, ((0, 1), (1, 0)), 1, traceless=True),
    "Fvec": FactorInfo(1, ((0,),), 1),
    "Gscal": FactorInfo(0, ((),), 1),
}

_ORDER = {name: i for i, name in enumerate(FACTORS)}


class TensorMonomial:
    """Immutable product of a u-power and contracted derivative factors.

    ``symbols`` lists the factor kinds; factor k occupies the global slots
    ``offset(k) .. offset(k)+arity-1`` in listing order.  ``pairs`` is the
    contraction matching and ``free`` the ordered dangling slots (none for a
    scalar, one for a vector, two for a symmetric 2-tensor).
    """

    __slots__ = ("u_power", "symbols", "pairs", "free", "_hash")

    def __init__(self, u_power: int, symbols: Sequence[str],
                 pairs: Iterable[tuple[int, int]], free: Sequence[int]):
        object.__setattr__(self, "u_power", int(u_power))
        object.__setattr__(self, "symbols", tuple(symbols))
        object.__setattr__(self, "pairs",
                           tuple(sorted(tuple(sorted(p)) for p in pairs)))
        object.__setattr__(self, "free", tuple(free))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, *args):
        raise AttributeError("TensorMonomial is immutable")

    # -- structure -----------------------------------------------------------

    @property
    def slot_count(self) -> int:
        return sum(FACTORS[s].arity for s in self.symbols)

    @property
    def valence(self) -> int:
        return len(self.free)

    def offsets(self) -> list[int]:
        out, off = [], 0
        for s in self.symbols:
            out.append(off)
            off += FACTORS[s].arity
        return out

    def owner(self, slot: int) -> int:
        off = 0
        for i, s in enumerate(self.symbols):
            off += FACTORS[s].arity
            if slot < off:
                return i
        raise MalformedMonomialError(f"slot {slot} out of range")

    def validate(self):
        total = self.slot_count
        seen = {}
        for p in self.pairs:
            for s in p:
                if not (0 <= s < total):
                    raise MalformedMonomialError(f"slot {s} out of range")
                if s in seen:
                    raise MalformedMonomialError(f"slot {s} used twice")
                seen[s] = True
            if p[0] == p[1]:
                raise MalformedMonomialError("slot paired with itself")
        for s in self.free:
            if not (0 <= s < total):
                raise MalformedMonomialError(f"free slot {s} out of range")
            if s in seen:
                raise MalformedMonomialError(f"slot {s} both free and paired")
            seen[s] = True
        if len(seen) != total:
            raise MalformedMonomialError("dangling slot: not paired and not declared free")
        if len(self.free) > 3:
            raise MalformedMonomialError(f"{len(self.free)} free slots unsupported")

    def u_degree(self) -> int:
        """Homogeneity degree under u -> t*u jets."""
        return self.u_power + sum(FACTORS[s].u_degree for s in self.symbols)

    # -- identity ------------------------------------------------------------

    def key(self):
        return (self.u_power, self.symbols, self.pairs, self.free)

    def __eq__(self, other):
        return isinstance(other, TensorMonomial) and self.key() == other.key()

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(self.key())
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        return f"TensorMonomial({self.render()})"

    def render(self) -> str:
        """Deterministic text form with named indices."""
        names = {}
        for i, p in enumerate(sorted(self.pairs)):
            names[p[0]] = names[p[1]] = f"i{i + 1}"
        for i, s in enumerate(self.free):
            names[s] = ("x", "y")[i]
        parts = []
        if self.u_power:
            parts.append(f"u^{self.u_power}")
        off = 0
        for sym in self.symbols:
            k = FACTORS[sym].arity
            idx = ",".join(names[off + j] for j in range(k))
            parts.append(f"{sym}({idx})" if k else sym)
            off += k
        return " ".join(parts) if parts else "1"


def mono(u: int, *factors, free: Sequence[str] = ()) -> TensorMonomial:
    """Build a monomial from factors with string index labels.

    Each factor is ``(name, label, ...)``; a label used twice is a
    contraction, a label used once must be listed (in order) in ``free``.
    """
    symbols, slots_by_label = [], {}
    slot = 0
    for fac in factors:
        name, labels = fac[0], fac[1:]
        if name not in FACTORS:
            raise MalformedMonomialError(f"unknown factor {name!r}")
        if len(labels) != FACTORS[name].arity:
            raise MalformedMonomialError(f"{name} takes {FACTORS[name].arity} indices")
        symbols.append(name)
        for lab in labels:
            slots_by_label.setdefault(lab, []).append(slot)
            slot += 1
    pairs, free_slots = [], {}
    for lab, ss in slots_by_label.items():
        if len(ss) == 2:
            pairs.append((ss[0], ss[1]))
        elif len(ss) == 1:
            free_slots[lab] = ss[0]
        else:
            raise MalformedMonomialError(f"label {lab!r} used {len(ss)} times")
    if set(free_slots) != set(free):
        raise MalformedMonomialError(
            f"free labels {sorted(free_slots)} do not match declaration {list(free)}")
    m = TensorMonomial(u, symbols, pairs, [free_slots[lab] for lab in free])
    m.validate()
    return m


# -- canonicalization --------------------------------------------------------


def _drop_factor(m: TensorMonomial, idx: int,
                 rewire: dict[int, int]) -> TensorMonomial:
    """Remove factor idx, renumbering slots; ``rewire`` maps old slots of the
    removed factor's partners onto each other (used by metric elimination)."""
    offs = m.offsets()
    k = FACTORS[m.symbols[idx]].arity
    removed = set(range(offs[idx], offs[idx] + k))

    def newslot(s: int) -> int:
        if s in removed:
            raise MalformedMonomialError("dangling reference to removed slot")
        return s - k if s > offs[idx] else s

    pairs = []
    for a, b in m.pairs:
        if a in removed or b in removed:
            continue
        pairs.append((newslot(a), newslot(b)))
    for a, b in rewire.items():
        pairs.append((newslot(a), newslot(b)))
    if any(s in removed for s in m.free):
        raise MalformedMonomialError("cannot drop a factor carrying a free slot")
    free = [newslot(s) for s in m.free]
    symbols = m.symbols[:idx] + m.symbols[idx + 1:]
    return TensorMonomial(m.u_power, symbols, pairs, free)


def _replace_symbol(m: TensorMonomial, idx: int, new_name: str,
                    keep_local: Sequence[int]) -> TensorMonomial:
    """Replace factor idx by ``new_name`` keeping the listed local slots (in
    order); the discarded local slots must be paired with each other."""
    offs = m.offsets()
    old_arity = FACTORS[m.symbols[idx]].arity
    base = offs[idx]
    kept_old = [base + j for j in keep_local]
    dropped = [base + j for j in range(old_arity) if j not in keep_local]
    dropped_set = set(dropped)

    shift = {}
    new = 0
    for s in range(m.slot_count):
        if s in dropped_set:
            continue
        # kept slots of the replaced factor keep their relative order
        shift[s] = new
        new += 1

    pairs = []
    for a, b in m.pairs:
        if a in dropped_set and b in dropped_set:
            continue
        if a in dropped_set or b in dropped_set:
            raise MalformedMonomialError("partially dropped contraction")
        pairs.append((shift[a], shift[b]))
    free = [shift[s] for s in m.free]
    symbols = list(m.symbols)
    symbols[idx] = new_name
    return TensorMonomial(m.u_power, symbols, pairs, free)


def _structural_rewrites(m: TensorMonomial):
    """Apply metric elimination and self-trace rewrites until stable.

    Returns (multiplier, monomial) where monomial is None if the term
    vanishes identically (trace of a trace-free factor).
    """
    mult = ONE
    changed = True
    while changed:
        changed = False
        offs = m.offsets()
        partner = {}
        for a, b in m.pairs:
            partner[a] = b
            partner[b] = a
        for idx, sym in enumerate(m.symbols):
            base = offs[idx]
            if sym == "g":
                s1, s2 = base, base + 1
                if partner.get(s1) == s2:
                    mult = mult * N
                    m = _drop_factor(m, idx, {})
                elif s1 in partner and s2 in partner:
                    m = _drop_factor(m, idx, {partner[s1]: partner[s2]})
                elif s1 in partner or s2 in partner:
                    paired, free_ = (s1, s2) if s1 in partner else (s2, s1)
                    # metric with one free slot renames the partner slot
                    pos = m.free.index(free_)
                    tgt = partner[paired]
                    pairs = [p for p in m.pairs if paired not in p]
                    free = list(m.free)
                    free[pos] = tgt
                    m = _drop_factor(
                        TensorMonomial(m.u_power, m.symbols, pairs, free), idx, {})
                else:
                    continue  # both slots free: metric term of a 2-tensor
                changed = True
                break
            if sym == "D2u" and partner.get(base) == base + 1:
                m = _replace_symbol(m, idx, "Lap", [])
                changed = True
                break
            if sym == "D3u" and partner.get(base + 1) == base + 2:
                m = _replace_symbol(m, idx, "DLap", [0])
                changed = True
                break
            if sym == "D3u" and partner.get(base) in (base + 1, base + 2):
                raise MalformedMonomialError(
                    "unreduced contraction of the derivative slot of D3u with its "
                    "own Hessian slot; expand it through the divergence rules")
            if sym == "Etf" and partner.get(base) == base + 1:
                return mult, None
            if sym == "Ric" and partner.get(base) == base + 1:
                raise UnsupportedCurvatureError(
                    "self-traced Ricci factor (scalar curvature) is unsupported")
    return mult, m


@lru_cache(maxsize=None)
def _canonical_cached(m: TensorMonomial):
    m.validate()
    mult, m = _structural_rewrites(m)
    if m is None:
        return mult, None
    m.validate()

    order = sorted(range(len(m.symbols)), key=lambda i: (_ORDER[m.symbols[i]], i))
    symbols = tuple(m.symbols[i] for i in order)

    # group identical symbols in the sorted listing
    groups: list[list[int]] = []
    for pos, i in enumerate(order):
        if groups and m.symbols[i] == m.symbols[groups[-1][0]]:
            groups[-1].append(i)
        else:
            groups.append([i])

    old_offs = m.offsets()
    new_offs = []
    off = 0
    for s in symbols:
        new_offs.append(off)
        off += FACTORS[s].arity

    best = None
    group_perms = [list(itertools.permutations(g)) for g in groups]
    for assignment in itertools.product(*group_perms):
        placed = [i for grp in assignment for i in grp]
        sym_choices = [FACTORS[m.symbols[i]].sym for i in placed]
        for syms in itertools.product(*sym_choices):
            mapping = {}
            for pos, (i, sigma) in enumerate(zip(placed, syms)):
                for j, sj in enumerate(sigma):
                    mapping[old_offs[i] + sj] = new_offs[pos] + j
            pairs = tuple(sorted(
                tuple(sorted((mapping[a], mapping[b]))) for a, b in m.pairs))
            free = tuple(mapping[s] for s in m.free)
            key = (pairs, free)
            if best is None or key < best:
                best = key
    result = TensorMonomial(m.u_power, symbols, best[0], best[1])
    return mult, result


def canonical_form(m: TensorMonomial) -> tuple[ParamScalar, TensorMonomial | None]:
    """Canonical representative plus the scalar multiplier picked up by
    structural rewrites (metric self-traces contribute a factor n).  Returns
    ``(mult, None)`` when the monomial vanishes identically."""
    return _canonical_cached(m)


def canonicalize(m: TensorMonomial) -> TensorMonomial:
    """Public canonical form for monomials that neither vanish nor pick up a
    dimension factor (the common case); idempotent."""
    if len(m.free) > 2:
        raise MalformedMonomialError(f"{len(m.free)} dangling slots unsupported")
    mult, canon = canonical_form(m)
    if canon is None:
        raise MalformedMonomialError("monomial vanishes identically (trace-free trace)")
    if not (mult == ONE):
        raise MalformedMonomialError(
            "monomial carries a metric self-trace; canonicalize it as an expression")
    return canon


# -- expressions -------------------------------------------------------------


class TExpr:
    """Finite ParamScalar-linear combination of canonical monomials of one
    common valence.  The zero expression is the empty map."""

    __slots__ = ("valence", "terms")

    def __init__(self, valence: int, terms=None):
        object.__setattr__(self, "valence", valence)
        object.__setattr__(self, "terms", dict(terms or {}))

    def __setattr__(self, *args):
        raise AttributeError("TExpr is immutable")

    @classmethod
    def zero(cls, valence: int = 0) -> "TExpr":
        return cls(valence)

    @classmethod
    def from_terms(cls, valence: int, raw: Iterable[tuple[ParamScalar, TensorMonomial]]) -> "TExpr":
        acc: dict[TensorMonomial, ParamScalar] = {}
        for coeff, m in raw:
            if coeff.is_zero:
                continue
            mult, canon = canonical_form(m)
            if canon is None:
                continue
            if canon.valence != valence:
                raise ValenceError(
                    f"monomial valence {canon.valence} != expression valence {valence}")
            c = coeff * mult
            prev = acc.get(canon)
            tot = c if prev is None else prev + c
            if tot.is_zero:
                acc.pop(canon, None)
            else:
                acc[canon] = tot
        return cls(valence, acc)

    # -- linear structure ----------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def scale(self, c) -> "TExpr":
        c = ps(c) if not isinstance(c, ParamScalar) else c
        if c.is_zero:
            return TExpr(self.valence)
        return TExpr(self.valence, {m: k * c for m, k in self.terms.items()})

    def __add__(self, other: "TExpr") -> "TExpr":
        if self.valence != other.valence:
            raise ValenceError(f"valence mismatch: {self.valence} vs {other.valence}")
        acc = dict(self.terms)
        for m, c in other.terms.items():
            tot = acc.get(m, None)
            tot = c if tot is None else tot + c
            if tot.is_zero:
                acc.pop(m, None)
            else:
                acc[m] = tot
        return TExpr(self.valence, acc)

    def __sub__(self, other: "TExpr") -> "TExpr":
        return self + other.scale(-1)

    def __neg__(self) -> "TExpr":
        return self.scale(-1)

    def __eq__(self, other):
        return (isinstance(other, TExpr) and self.valence == other.valence
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.valence, frozenset(self.terms.items())))

    def sorted_terms(self) -> list[tuple[TensorMonomial, ParamScalar]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0].key())

    def u_degrees(self) -> set[int]:
        return {m.u_degree() for m in self.terms}

    def render(self) -> str:
        if self.is_zero:
            return "0"
        return " + ".join(f"({c}) {m.render()}" for m, c in self.sorted_terms())

    def __repr__(self):
        return f"TExpr<{self.valence}>({self.render()})"


def expr(coeff, m: TensorMonomial) -> TExpr:
    """Single-term expression."""
    c = coeff if isinstance(coeff, ParamScalar) else ps(coeff)
    mult, canon = canonical_form(m)
    if canon is None or c.is_zero:
        return TExpr(m.valence)
    return TExpr(canon.valence, {canon: c * mult})


def combine(e1: TExpr, c1, e2: TExpr, c2) -> TExpr:
    """c1*e1 + c2*e2 in canonical form; empty iff identically zero."""
    return e1.scale(c1) + e2.scale(c2)


def _concat_raw(m1: TensorMonomial, m2: TensorMonomial):
    """Concatenate two monomials; returns (symbols, pairs, free1, free2)
    with m2's slots shifted."""
    off = m1.slot_count
    symbols = m1.symbols + m2.symbols
    pairs = list(m1.pairs) + [(a + off, b + off) for a, b in m2.pairs]
    return symbols, pairs, list(m1.free), [s + off for s in m2.free]


def emul(e1: TExpr, e2: TExpr) -> TExpr:
    """Tensor product, keeping all free slots (e1's first)."""
    val = e1.valence + e2.valence
    if val > 2:
        raise ValenceError("product valence exceeds 2")
    raw = []
    for m1, c1 in e1.terms.items():
        for m2, c2 in e2.terms.items():
            symbols, pairs, f1, f2 = _concat_raw(m1, m2)
            raw.append((c1 * c2,
                        TensorMonomial(m1.u_power + m2.u_power, symbols, pairs, f1 + f2)))
    return TExpr.from_terms(val, raw)


def econtract(e1: TExpr, e2: TExpr, joins: Sequence[tuple[int, int]]) -> TExpr:
    """Product contracting e1.free[i] with e2.free[j] for each (i, j)."""
    val = e1.valence + e2.valence - 2 * len(joins)
    if val < 0:
        raise ValenceError("too many contractions")
    raw = []
    for m1, c1 in e1.terms.items():
        for m2, c2 in e2.terms.items():
            symbols, pairs, f1, f2 = _concat_raw(m1, m2)
            used1, used2 = set(), set()
            for i, j in joins:
                pairs.append((f1[i], f2[j]))
                used1.add(i)
                used2.add(j)
            free = [s for i, s in enumerate(f1) if i not in used1] + \
                   [s for j, s in enumerate(f2) if j not in used2]
            raw.append((c1 * c2,
                        TensorMonomial(m1.u_power + m2.u_power, symbols, pairs, free)))
    return TExpr.from_terms(val, raw)


def dot(v1: TExpr, v2: TExpr) -> TExpr:
    """Inner product of two vector expressions."""
    if v1.valence != 1 or v2.valence != 1:
        raise ValenceError("dot requires two vector expressions")
    return econtract(v1, v2, [(0, 0)])


def frob(t1: TExpr, t2: TExpr) -> TExpr:
    """Full contraction of two symmetric 2-tensor expressions."""
    if t1.valence != 2 or t2.valence != 2:
        raise ValenceError("frob requires two 2-tensor expressions")
    return econtract(t1, t2, [(0, 0), (1, 1)])


def tensor_vec(t: TExpr, v: TExpr) -> TExpr:
    """Contract the second free slot of a 2-tensor with a vector."""
    if t.valence != 2 or v.valence != 1:
        raise ValenceError("tensor_vec requires a 2-tensor and a vector")
    return econtract(t, v, [(1, 0)])


def etrace(t: TExpr) -> TExpr:
    """Metric trace of a 2-tensor expression."""
    if t.valence != 2:
        raise ValenceError("trace requires a 2-tensor expression")
    raw = []
    for m, c in t.terms.items():
        raw.append((c, TensorMonomial(m.u_power, m.symbols,
                                      list(m.pairs) + [tuple(m.free)], [])))
    return TExpr.from_terms(0, raw)


def upow(e: TExpr, k: int) -> TExpr:
    """Multiply by u**k."""
    return TExpr(e.valence, {TensorMonomial(m.u_power + k, m.symbols, m.pairs, m.free): c
                             for m, c in e.terms.items()})


def to_labeled(m: TensorMonomial):
    """Labeled view of a monomial: (u_power, [(sym, label, ...), ...],
    free_labels).  Contractions share a label; free slots get f0, f1, ..."""
    names = {}
    for k, (a, b) in enumerate(m.pairs):
        names[a] = names[b] = f"p{k}"
    free_labels = []
    for k, s in enumerate(m.free):
        names[s] = f"f{k}"
        free_labels.append(f"f{k}")
    factors = []
    off = 0
    for sym in m.symbols:
        k = FACTORS[sym].arity
        factors.append((sym,) + tuple(names[off + j] for j in range(k)))
        off += k
    return m.u_power, factors, free_labels


def from_labeled(u_power: int, factors, free_labels) -> TensorMonomial:
    return mono(u_power, *factors, free=free_labels)


def replace_factor(m: TensorMonomial, idx: int, replacement: TExpr):
    """Substitute ``replacement`` for factor idx.

    The replacement's first ``arity`` free slots wire onto whatever the
    factor's slots touched; any extra free slots of the replacement become
    new trailing free slots of the result.  Returns raw (coeff, monomial)
    pairs, not yet canonicalized.
    """
    arity = FACTORS[m.symbols[idx]].arity
    if replacement.valence < arity:
        raise ValenceError("replacement valence must cover the factor arity")
    u, facs, frees = to_labeled(m)
    target_labels = facs[idx][1:]

    out = []
    for rm, rc in replacement.terms.items():
        ru, rfacs, rfrees = to_labeled(rm)
        rename = {}
        for k, lab in enumerate(rfrees[:arity]):
            rename[lab] = target_labels[k]
        extra = []
        for i, lab in enumerate(rfrees[arity:]):
            rename[lab] = f"x{i}"
            extra.append(f"x{i}")
        new_facs = [f for j, f in enumerate(facs) if j != idx]
        for rf in rfacs:
            new_facs.append((rf[0],) + tuple(rename.get(lab, f"r_{lab}") for lab in rf[1:]))
        out.append((rc, from_labeled(u + ru, new_facs, list(frees) + extra)))
    return out


def substitute_factors(e: TExpr, table: dict[str, TExpr]) -> TExpr:
    """Replace every occurrence of the factor kinds in ``table`` by the given
    expressions (whose free slots stand for the factor's slots)."""
    pending = [(c, m) for m, c in e.terms.items()]
    done = []
    while pending:
        c, m = pending.pop()
        idx = next((i for i, s in enumerate(m.symbols) if s in table), None)
        if idx is None:
            done.append((c, m))
            continue
        for rc, rm in replace_factor(m, idx, table[m.symbols[idx]]):
            pending.append((c * rc, rm))
    return TExpr.from_terms(e.valence, done)
