"""Canonical form of tensor monomials and expression arithmetic."""

import random

import pytest

from bhverify.coeffs import A, N, ONE, ps
from bhverify.errors import MalformedMonomialError, ValenceError
from bhverify.tensor import (FACTORS, TExpr, TensorMonomial, canonical_form,
                             canonicalize, combine, dot, econtract, emul, etrace,
                             expr, frob, from_labeled, mono, substitute_factors,
                             tensor_vec, to_labeled, upow)


def test_relabeling_invariance_basic():
    m1 = mono(0, ("D2u", "i", "j"), ("Du", "i"), ("Du", "j"))
    m2 = mono(0, ("D2u", "q", "p"), ("Du", "p"), ("Du", "q"))
    assert canonicalize(m1) == canonicalize(m2)


def test_commutativity_of_factor_order():
    m1 = mono(0, ("Lap",), ("Du", "k"), ("Du", "k"))
    m2 = mono(0, ("Du", "k"), ("Du", "k"), ("Lap",))
    assert canonicalize(m1) == canonicalize(m2)


def test_idempotent():
    m = mono(-2, ("D3u", "o", "i", "j"), ("Du", "o"), ("Du", "i"), ("Du", "j"))
    c = canonicalize(m)
    assert canonicalize(c) == c


def test_hessian_cycle_distinct_from_lap_square():
    """The cyclic Hessian contraction differs from Lap * |Hessian|^2; the
    independent oracle is numeric evaluation at a generic jet."""
    import numpy as np
    cyc = mono(0, ("D2u", "i", "j"), ("D2u", "j", "k"), ("D2u", "k", "i"))
    lap2 = mono(0, ("Lap",), ("D2u", "i", "j"), ("D2u", "i", "j"))
    rng = np.random.default_rng(7)
    h = rng.normal(size=(5, 5))
    h = h + h.T
    v_cyc = np.einsum("ij,jk,ki->", h, h, h)
    v_lap2 = np.trace(h) * (h * h).sum()
    assert abs(v_cyc - v_lap2) > 1e-6
    assert canonicalize(cyc) != canonicalize(lap2)


def test_metric_elimination_and_trace():
    mgd = mono(0, ("g", "i", "j"), ("Du", "i"), ("Du", "j"))
    dd = mono(0, ("Du", "i"), ("Du", "i"))
    assert canonicalize(mgd) == canonicalize(dd)
    mult, canon = canonical_form(mono(0, ("g", "i", "i")))
    assert mult == N and canon is not None and not canon.symbols


def test_self_traces_rewrite():
    mult, canon = canonical_form(mono(0, ("D2u", "i", "i")))
    assert canon.symbols == ("Lap",)
    mult, canon = canonical_form(mono(0, ("D3u", "o", "h", "h"), ("Du", "o")))
    assert "DLap" in canon.symbols
    mult, canon = canonical_form(mono(0, ("Etf", "i", "i")))
    assert canon is None  # trace-free


def test_unreduced_hessian_divergence_rejected():
    with pytest.raises(MalformedMonomialError):
        canonical_form(mono(0, ("D3u", "o", "o", "h"), ("Du", "h")))


def test_dangling_slots_rejected():
    with pytest.raises(MalformedMonomialError):
        TensorMonomial(0, ("Du", "Du"), [], [0]).validate()
    with pytest.raises(MalformedMonomialError):
        mono(0, ("Du", "i"), ("Du", "i"), ("Du", "j"))  # j not declared free


def test_combine_axioms():
    e = expr(1, mono(0, ("Du", "k"), ("Du", "k")))
    z = combine(e, 1, e, -1)
    assert z.is_zero
    assert e.scale(0).is_zero
    f = expr(1, mono(0, ("Lap",)))
    assert combine(e, 2, f, 3) == combine(f, 3, e, 2)
    with pytest.raises(ValenceError):
        combine(e, 1, expr(1, mono(0, ("Du", "x"), free=("x",))), 1)


def test_combine_reproduces_bernstein_quantity():
    from bhverify.registry import build_z
    lap = expr(1, mono(0, ("Lap",)))
    gradsq_over_u = expr(1, mono(-1, ("Du", "k"), ("Du", "k")))
    za = upow(combine(lap, 1, gradsq_over_u, A), -1)
    assert za == build_z()


def test_products_and_contractions():
    v = expr(1, mono(0, ("Du", "x"), free=("x",)))
    t = expr(1, mono(0, ("D2u", "x", "y"), free=("x", "y")))
    assert dot(v, v) == expr(1, mono(0, ("Du", "k"), ("Du", "k")))
    assert etrace(t) == expr(1, mono(0, ("Lap",)))
    assert frob(t, t) == expr(1, mono(0, ("D2u", "i", "j"), ("D2u", "i", "j")))
    assert tensor_vec(t, v) == expr(1, mono(0, ("D2u", "x", "k"), ("Du", "k"),
                                            free=("x",)))
    g2 = expr(1, mono(0, ("g", "x", "y"), free=("x", "y")))
    assert etrace(g2) == expr(N, mono(0))


def test_substitute_factors_roundtrip_simple():
    table_fwd = {"Lap": expr(1, mono(0, ("Gscal",)))}
    table_bwd = {"Gscal": expr(1, mono(0, ("Lap",)))}
    e = expr(ps(3), mono(-1, ("Lap",), ("Du", "k"), ("Du", "k")))
    assert substitute_factors(substitute_factors(e, table_fwd), table_bwd) == e


def test_labeled_roundtrip():
    m = mono(-3, ("D2u", "i", "j"), ("Du", "i"), ("Du", "j"), ("Du", "x"),
             free=("x",))
    u, facs, frees = to_labeled(m)
    assert from_labeled(u, facs, frees) == m


def test_serialization_deterministic():
    m = mono(-2, ("Du", "i"), ("Du", "i"), ("Lap",))
    e = expr(ps(2) / (N - 1), m)
    assert e.render() == expr(ps(2) / (N - 1), m).render()
    assert "u^-2" in m.render() and "Lap" in m.render()


# -- canonicalization soundness over random relabelings -------------------------

_POOL = ("Du", "D2u", "D3u", "Lap", "DLap", "Ric")


def _random_monomial(rng: random.Random):
    k = rng.choices((1, 2, 3, 4), weights=(2, 4, 3, 1))[0]
    syms = [rng.choice(_POOL) for _ in range(k)]
    slots = []
    for i, s in enumerate(syms):
        slots.extend((i, j) for j in range(FACTORS[s].arity))
    if len(slots) % 2 == 1:
        syms.append("Du")
        slots.append((len(syms) - 1, 0))
    rng.shuffle(slots)
    free = []
    if rng.random() < 0.4 and slots:
        free = [slots.pop()]
    if len(slots) % 2 == 1:
        free.append(slots.pop())
    labels = {}
    for t, (a, b) in enumerate(zip(slots[::2], slots[1::2])):
        labels[a] = labels[b] = f"p{t}"
    for j, s in enumerate(free):
        labels[s] = f"f{j}"
    facs = [(s,) + tuple(labels[(i, j)] for j in range(FACTORS[s].arity))
            for i, s in enumerate(syms)]
    return mono(rng.randint(-4, 2), *facs, free=[f"f{j}" for j in range(len(free))])


def _shuffled_copy(m, rng: random.Random):
    u, facs, frees = to_labeled(m)
    facs = list(facs)
    rng.shuffle(facs)
    names = sorted({lab for f in facs for lab in f[1:]})
    renamed = {lab: f"q{k}" for k, lab in enumerate(rng.sample(names, len(names)))}
    facs = [(f[0],) + tuple(renamed[lab] for lab in f[1:]) for f in facs]
    return from_labeled(u, facs, [renamed[f] for f in frees])


def test_canonicalization_soundness_random():
    """canonical_form is invariant under factor reordering and relabeling
    (10,000 random monomials)."""
    from bhverify.errors import UnsupportedCurvatureError
    rng = random.Random(987654)
    checked = 0
    while checked < 10_000:
        try:
            m = _random_monomial(rng)
            c1 = canonical_form(m)
            c2 = canonical_form(_shuffled_copy(m, rng))
        except (MalformedMonomialError, UnsupportedCurvatureError):
            continue
        assert c1 == c2, f"{m.render()} canonicalized inconsistently"
        checked += 1
