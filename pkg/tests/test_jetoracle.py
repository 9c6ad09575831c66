"""Flat-jet numeric oracle: evaluation semantics, identity checks, sharp constant."""

from fractions import Fraction

import numpy as np
import pytest

from bhverify.calculus import SubstitutionMode, bstar, substitute_defs
from bhverify.jetoracle import (JetSample, OracleIdentityReport, _params_for,
                                check_all_identities, eval_expr,
                                eval_monomial_batch, eval_terms_batch,
                                identity_homogeneity, identity_lhs_flat_terms,
                                numeric_check_identity, sample_jet, scale_jet,
                                sharp_constant_search, stack_jets)
from bhverify.registry import all_identities, get_identity, perturb_identity
from bhverify.tensor import expr, frob, mono


def unit_jet(n=5, g1=None, g2=None):
    """Hand-built jet for the closed-form examples."""
    j = sample_jet(0, n)
    j.u = 1.0
    j.g1 = np.zeros(n) if g1 is None else np.asarray(g1, float)
    j.g2 = np.zeros((n, n)) if g2 is None else np.asarray(g2, float)
    return j


PARAMS5 = _params_for(5, Fraction(2), Fraction(1))


class TestSampling:
    def test_seed_determinism(self):
        a, b = sample_jet(42, 6), sample_jet(42, 6)
        assert a.u == b.u and (a.g3 == b.g3).all() and a.w4 == b.w4

    def test_symmetries_exact(self):
        j = sample_jet(3, 7)
        assert np.abs(j.g2 - j.g2.T).max() == 0.0
        for perm in ((0, 2, 1), (1, 0, 2), (2, 1, 0)):
            assert np.abs(j.g3 - j.g3.transpose(perm)).max() == 0.0

    def test_u_floor(self):
        assert all(sample_jet(s, 5).u >= 1e-3 for s in range(50))

    def test_onshell_w4(self):
        j = sample_jet(9, 5, "onshell", alpha=Fraction(2))
        assert j.w4 == j.u**2

    def test_replay_roundtrip_bit_exact(self):
        j = sample_jet(17, 5)
        k = JetSample.from_json(j.to_json())
        assert k.u == j.u and (k.g3 == j.g3).all() and k.w4 == j.w4


class TestEvaluation:
    def test_gradsq_unit_vector(self):
        j = unit_jet(g1=np.eye(5)[0])
        e = expr(1, mono(0, ("Du", "k"), ("Du", "k")))
        assert eval_expr(e, j, PARAMS5) == 1.0

    def test_lap_identity_hessian(self):
        j = unit_jet(g2=np.eye(5))
        assert eval_expr(expr(1, mono(0, ("Lap",))), j, PARAMS5) == 5.0

    def test_ric_evaluates_to_zero(self):
        j = sample_jet(1, 5)
        e = expr(1, mono(0, ("Ric", "i", "j"), ("Du", "i"), ("Du", "j")))
        assert eval_expr(e, j, PARAMS5) == 0.0

    def test_tracefree_square_dense_matrix_oracle(self):
        """Etf_ij Etf^ij evaluated through the einsum path equals the direct
        dense-matrix computation, both in symbol space and expanded."""
        j = sample_jet(11, 6)
        params = _params_for(6, Fraction(2), Fraction(1))
        b = float(params["b"])
        n = 6
        e_mat = (j.g2 + b * np.outer(j.g1, j.g1) / j.u
                 - (np.trace(j.g2) + b * (j.g1 @ j.g1) / j.u) / n * np.eye(n))
        direct = float((e_mat * e_mat).sum())
        ee = frob(expr(1, mono(0, ("Etf", "x", "y"), free=("x", "y"))),
                  expr(1, mono(0, ("Etf", "x", "y"), free=("x", "y"))))
        sym = eval_expr(ee, j, params)
        jet = eval_expr(substitute_defs(ee, "backward", b=bstar()), j, params)
        assert abs(sym - direct) < 1e-12 * (1 + abs(direct))
        assert abs(jet - direct) < 1e-12 * (1 + abs(direct))

    def test_canonical_zero_evaluates_zero(self):
        from bhverify.registry import expand_lhs, expand_rhs
        ident = get_identity("I6")
        diff = expand_lhs(ident) - expand_rhs(ident)
        assert diff.is_zero
        for seed in range(20):
            assert eval_expr(diff, sample_jet(seed, 5), PARAMS5) == 0.0

    def test_genericity_nonzero_expression(self):
        """A nonzero canonical expression is nonzero at >= 99% of random jets."""
        e = (expr(1, mono(-1, ("Lap",), ("Du", "k"), ("Du", "k")))
             + expr(2, mono(0, ("D2u", "i", "j"), ("D2u", "i", "j"))))
        hits = sum(abs(eval_expr(e, sample_jet(s, 5), PARAMS5)) > 1e-12
                   for s in range(200))
        assert hits >= 198


class TestFlatVsCovariant:
    def test_covariant_expansion_matches_flat_leibniz_numerically(self):
        """The covariant divergence with Ric dropped equals the naive flat
        expansion at every jet (both evaluated numerically)."""
        from bhverify.registry import expand_lhs
        for iid in ("I3", "I6", "I12", "I13"):
            ident = get_identity(iid)
            cov = expand_lhs(ident)
            cov_terms = [(c, m) for m, c in cov.terms.items()]
            flat_terms, _ = identity_lhs_flat_terms(ident)
            jets = [sample_jet(100 + s, 5,
                               "onshell" if ident.mode is SubstitutionMode.ON_SHELL
                               else "free", Fraction(2)) for s in range(40)]
            batch = stack_jets(jets)
            a = eval_terms_batch(cov_terms, batch, PARAMS5)
            b = eval_terms_batch(flat_terms, batch, PARAMS5)
            scale = 1.0 + np.abs(a) + np.abs(b)
            assert np.max(np.abs(a - b) / scale) < 1e-12


class TestIdentityChecks:
    def test_all_identities_numeric_small(self):
        for rep in check_all_identities(samples=60, dims=(5,), seed=2):
            assert rep.passed, (rep.id, rep.max_rel_residual)

    def test_perturbed_coefficient_detected_at_matching_scale(self):
        """A 1e-3 shift of the |Du|^2 E-term coefficient (the one carrying
        A13) shows up as a residual of order 1e-3."""
        ident = get_identity("I12")
        items = ident.rhs.sorted_terms()
        idx = next(i for i, (m, _) in enumerate(items)
                   if "Etf" in m.symbols and m.symbols.count("Du") == 4)
        mutated = perturb_identity(ident, idx, Fraction(1, 1000))
        rep = numeric_check_identity(mutated, samples=60, dims=(5,), seed=4)
        assert not rep.passed
        assert 1e-6 < rep.max_rel_residual < 1.0
        assert rep.failing_jets  # replay records captured

    def test_report_determinism(self):
        a = numeric_check_identity(get_identity("I7"), samples=30, dims=(5,), seed=9)
        b = numeric_check_identity(get_identity("I7"), samples=30, dims=(5,), seed=9)
        assert a.to_dict() == b.to_dict()

    def test_degenerate_gradient_jet(self):
        """Zero gradient is a legal jet: both sides stay finite and equal."""
        ident = get_identity("I1")
        lhs_terms, _ = identity_lhs_flat_terms(ident)
        rhs_terms = [(c, m) for m, c in ident.rhs.terms.items()]
        j = sample_jet(8, 5)
        j.g1 = np.zeros(5)
        batch = stack_jets([j])
        a = eval_terms_batch(lhs_terms, batch, PARAMS5)
        b = eval_terms_batch(rhs_terms, batch, PARAMS5)
        assert np.isfinite(a).all() and np.isfinite(b).all()
        assert abs(a[0] - b[0]) < 1e-12 * (1 + abs(a[0]) + abs(b[0]))

    def test_scale_covariance_free_identities(self):
        """Both sides scale by lambda^h under u -> lambda*u, h the common
        homogeneity degree."""
        for iid in ("I3", "I6", "I13", "I15"):
            ident = get_identity(iid)
            h = identity_homogeneity(ident)
            lhs_terms, _ = identity_lhs_flat_terms(ident)
            j = sample_jet(31, 5)
            base = eval_terms_batch(lhs_terms, stack_jets([j]), PARAMS5)[0]
            for lam in (0.5, 2.0):
                scaled = eval_terms_batch(
                    lhs_terms, stack_jets([scale_jet(j, lam)]), PARAMS5)[0]
                assert abs(scaled - lam**h * base) < 1e-9 * (1 + abs(scaled))

    def test_scale_covariance_onshell_identity(self):
        """On-shell identities still balance at rescaled on-shell jets."""
        ident = get_identity("I12")
        lhs_terms, _ = identity_lhs_flat_terms(ident)
        rhs_terms = [(c, m) for m, c in ident.rhs.terms.items()]
        j = sample_jet(13, 5, "onshell", Fraction(2))
        for lam in (0.5, 2.0):
            sj = scale_jet(j, lam, alpha=Fraction(2))
            batch = stack_jets([sj])
            a = eval_terms_batch(lhs_terms, batch, PARAMS5)[0]
            b = eval_terms_batch(rhs_terms, batch, PARAMS5)[0]
            assert abs(a - b) < 1e-10 * (1 + abs(a) + abs(b))

    def test_identity_homogeneity_values(self):
        assert identity_homogeneity(get_identity("I1")) == 0
        assert identity_homogeneity(get_identity("I3")) == 1
        assert identity_homogeneity(get_identity("I12")) == 2


class TestSharpConstant:
    def test_minimum_is_n_over_n_minus_one(self):
        for n in (5, 6):
            r = sharp_constant_search(n, iterations=8, seed=3)
            assert abs(r.minimum - n / (n - 1)) <= 1e-6
            assert r.below_cited

    def test_large_n_approaches_one(self):
        r = sharp_constant_search(25, iterations=4, seed=3)
        assert abs(r.minimum - 25 / 24) <= 1e-6
        assert r.minimum < 1.05

    def test_analytic_candidate_bounds_search(self):
        r = sharp_constant_search(7, iterations=6, seed=5)
        assert r.minimum <= r.analytic + 1e-12
