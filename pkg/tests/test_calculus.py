"""Gradient, weighted divergence, commutation corrections, substitutions."""

import random
from fractions import Fraction

import pytest

from bhverify.calculus import (SubstitutionMode, WeightedVectorField, bstar,
                               divergence, grad, substitute_defs)
from bhverify.coeffs import ALPHA, A, B, N, ONE, frac, ps
from bhverify.errors import (CompositeDerivativeError, OrderOverflowError,
                             UnsupportedCurvatureError)
from bhverify.registry import build_z
from bhverify.tensor import TExpr, expr, mono, tensor_vec, upow

FREE = SubstitutionMode.FREE
ON_SHELL = SubstitutionMode.ON_SHELL


def du_vec():
    return expr(1, mono(0, ("Du", "x"), free=("x",)))


def test_grad_gradsq():
    e = expr(1, mono(0, ("Du", "k"), ("Du", "k")))
    assert grad(e) == expr(2, mono(0, ("D2u", "k", "x"), ("Du", "k"), free=("x",)))


def test_grad_product_rule():
    e = expr(1, mono(1, ("Lap",)))
    expected = (expr(1, mono(0, ("Lap",), ("Du", "x"), free=("x",)))
                + expr(1, mono(1, ("DLap", "x"), free=("x",))))
    assert grad(e) == expected


def test_grad_bernstein_quantity_four_terms():
    got = grad(build_z())
    expected = (expr(-1, mono(-2, ("Lap",), ("Du", "x"), free=("x",)))
                + expr(1, mono(-1, ("DLap", "x"), free=("x",)))
                + expr(-2 * A, mono(-3, ("Du", "k"), ("Du", "k"), ("Du", "x"),
                                    free=("x",)))
                + expr(2 * A, mono(-2, ("D2u", "x", "j"), ("Du", "j"), free=("x",))))
    assert got == expected


def test_grad_order_overflow():
    with pytest.raises(OrderOverflowError):
        grad(expr(1, mono(0, ("DLap", "k"), ("Du", "k"))))
    with pytest.raises(OrderOverflowError):
        grad(expr(1, mono(0, ("Bilap",))), FREE)


def test_grad_onshell_bilap():
    got = grad(expr(1, mono(0, ("Bilap",))), ON_SHELL)
    assert got == expr(ALPHA, mono(-1, ("Bilap",), ("Du", "x"), free=("x",)))


def test_ric_has_no_derivative():
    with pytest.raises(UnsupportedCurvatureError):
        grad(expr(1, mono(0, ("Ric", "i", "j"), ("Du", "i"), ("Du", "j"))))


def test_composite_symbols_must_be_expanded():
    with pytest.raises(CompositeDerivativeError):
        grad(expr(1, mono(0, ("Gscal",))))


def test_divergence_of_gradient_is_laplacian():
    assert divergence(WeightedVectorField(ps(0), du_vec())) == \
        expr(1, mono(0, ("Lap",)))


def test_divergence_hessian_ricci_correction():
    """div of D2u . Du picks up <DLap, Du> + |D2u|^2 + Ric(Du, Du)."""
    v = expr(1, mono(0, ("D2u", "x", "j"), ("Du", "j"), free=("x",)))
    got = divergence(WeightedVectorField(ps(0), v))
    expected = (expr(1, mono(0, ("DLap", "j"), ("Du", "j")))
                + expr(1, mono(0, ("Ric", "j", "k"), ("Du", "j"), ("Du", "k")))
                + expr(1, mono(0, ("D2u", "i", "j"), ("D2u", "i", "j"))))
    assert got == expected


def test_divergence_weight_leibniz():
    """u^-w div(u^w Du) = Lap + w |Du|^2 / u."""
    got = divergence(WeightedVectorField(B, du_vec()))
    expected = (expr(1, mono(0, ("Lap",)))
                + expr(B, mono(-1, ("Du", "k"), ("Du", "k"))))
    assert got == expected


def test_divergence_linearity_and_weight_consistency():
    """divergence(w, c*V) = c*divergence(w, V) and splitting the weight into
    an explicit u-power gives the same expansion (100 random cases)."""
    rng = random.Random(11)
    pool = [
        expr(1, mono(-1, ("Lap",), ("Du", "x"), free=("x",))),
        expr(1, mono(0, ("D2u", "x", "j"), ("Du", "j"), free=("x",))),
        expr(1, mono(-2, ("Du", "k"), ("Du", "k"), ("Du", "x"), free=("x",))),
        expr(1, mono(1, ("DLap", "x"), free=("x",))),
    ]
    weights = [ps(0), ONE, 2 - 2 * A, -2 * ALPHA / (N + 4), B]
    for _ in range(100):
        v = pool[rng.randrange(len(pool))].scale(
            frac(rng.randint(-3, 3) or 1, rng.randint(1, 4)))
        w = weights[rng.randrange(len(weights))]
        c = frac(rng.randint(-5, 5) or 2, rng.randint(1, 3))
        lhs = divergence(WeightedVectorField(w, v.scale(c)))
        rhs = divergence(WeightedVectorField(w, v)).scale(c)
        assert (lhs - rhs).is_zero
        # u^-(w+1) div(u^(w+1) V) == u^-w div(u^w (u V)) / u
        lhs2 = divergence(WeightedVectorField(w + 1, v))
        rhs2 = upow(divergence(WeightedVectorField(w, upow(v, 1))), -1)
        assert (lhs2 - rhs2).is_zero


def test_dlap_differentiated_off_slot_overflows():
    v = expr(1, mono(0, ("DLap", "j"), ("Du", "j"), ("Du", "x"), free=("x",)))
    with pytest.raises(OrderOverflowError):
        divergence(WeightedVectorField(ps(0), v))


def test_bilap_in_divergence_needs_equation():
    v = expr(1, mono(0, ("Bilap",), ("Du", "x"), free=("x",)))
    with pytest.raises(OrderOverflowError):
        divergence(WeightedVectorField(ps(0), v), FREE)
    got = divergence(WeightedVectorField(ps(0), v), ON_SHELL)
    expected = (expr(1, mono(0, ("Bilap",), ("Lap",)))
                + expr(ALPHA, mono(-1, ("Bilap",), ("Du", "k"), ("Du", "k"))))
    assert got == expected


# -- substitution between jet variables and composite symbols --------------------


def test_roundtrip_forward_backward():
    e = (expr(1, mono(-1, ("D2u", "i", "j"), ("Du", "i"), ("Du", "j")))
         + expr(frac(3, 2), mono(0, ("DLap", "k"), ("Du", "k")))
         + expr(N, mono(1, ("Bilap",))))
    for b in (B, bstar()):
        rt = substitute_defs(substitute_defs(e, "forward", b=b), "backward", b=b)
        assert (rt - e).is_zero


def test_trace_of_forward_hessian_is_lap():
    from bhverify.tensor import etrace
    t = expr(1, mono(0, ("D2u", "x", "y"), free=("x", "y")))
    assert etrace(substitute_defs(t, "forward")) == expr(1, mono(0, ("Lap",)))


def test_forward_image_of_raw_divergence_display():
    """The raw divergence display of the trace-free tensor, pushed forward
    into composite symbols with formal b, collapses to
    (n-2)/n b E_j + (n-1)/n F_j + Ric(., Du)."""
    raw = (expr((N - 1) / N, mono(0, ("DLap", "x"), free=("x",)))
           + expr(1, mono(0, ("Ric", "x", "j"), ("Du", "j"), free=("x",)))
           + expr(B, mono(-1, ("Lap",), ("Du", "x"), free=("x",)))
           + expr((N - 2) / N * B,
                  mono(-1, ("D2u", "x", "j"), ("Du", "j"), free=("x",)))
           + expr(-(N - 1) / N * B,
                  mono(-2, ("Du", "k"), ("Du", "k"), ("Du", "x"), free=("x",))))
    got = substitute_defs(raw, "forward", b=B)
    e_j = upow(tensor_vec(expr(1, mono(0, ("Etf", "x", "y"), free=("x", "y"))),
                          du_vec()), -1)
    f_j = expr(1, mono(0, ("Fvec", "x"), free=("x",)))
    ric = expr(1, mono(0, ("Ric", "x", "j"), ("Du", "j"), free=("x",)))
    expected = e_j.scale((N - 2) / N * B) + f_j.scale((N - 1) / N) + ric
    assert (got - expected).is_zero
    # and the engine rederives the raw display itself: expanding d/dx^i of
    # the trace-free tensor's jet form contracted suitably gives the same
    # composite relation (checked through the registered identity for E_i)


def test_bstar_kills_lap_squared_gradient_term():
    """In composite symbols the gradient of the zeroth-order invariant has
    (Lap/u)^2 Du coefficient -(n+2)/n b ((n+4)/n (1+2b) + alpha) for formal
    b; it vanishes exactly at b = bstar (that is how bstar is chosen)."""
    from bhverify.tensor import canonical_form
    target = canonical_form(mono(-2, ("Lap",), ("Lap",), ("Du", "x"),
                                 free=("x",)))[1]
    claimed = -(N + 2) / N * B * ((N + 4) / N * (1 + 2 * B) + ALPHA)
    assert claimed.subs_param("b", bstar()).is_zero

    def lap2_coeff(b):
        gscal = substitute_defs(expr(1, mono(0, ("Gscal",))), "backward", b=b)
        fwd = substitute_defs(grad(gscal, ON_SHELL), "forward", b=b)
        return fwd.terms.get(target)

    assert lap2_coeff(B) == claimed
    assert lap2_coeff(bstar()) is None


def test_flat_reduction_matches_naive_leibniz():
    """With Ric formally zero the covariant divergence reduces to the naive
    flat expansion (numeric agreement is checked in the oracle tests)."""
    v = expr(1, mono(0, ("D2u", "x", "j"), ("Du", "j"), free=("x",)))
    got = divergence(WeightedVectorField(ps(0), v))
    flat_part = TExpr(0, {m: c for m, c in got.terms.items()
                          if "Ric" not in m.symbols})
    expected_flat = (expr(1, mono(0, ("DLap", "j"), ("Du", "j")))
                     + expr(1, mono(0, ("D2u", "i", "j"), ("D2u", "i", "j"))))
    assert flat_part == expected_flat
