"""Identity registry: verification, mutation sensitivity, combination solver."""

import random
from fractions import Fraction

import pytest

from bhverify.calculus import SubstitutionMode, bstar
from bhverify.coeffs import ALPHA, N, frac, ps
from bhverify.errors import NoCombinationError, SingularSystemError
from bhverify.registry import (ERRATA, Identity, all_identities, build_named,
                               build_z, get_identity, list_registry,
                               perturb_identity, printed_variant,
                               solve_combination, verify_all, verify_identity)
from bhverify.tensor import TExpr, etrace


class TestCatalog:
    def test_bernstein_quantity(self):
        za = build_named("Z_a")
        assert za == build_z()

    def test_tracefree_tensor_is_tracefree(self):
        for specialized in (True, False):
            eij = build_named("E_ij", specialized=specialized)
            assert etrace(eij).is_zero

    def test_specialized_fvec_display(self):
        """F_j with b specialized has the three displayed coefficients."""
        from bhverify.tensor import expr, mono
        k = 1 + N * ALPHA / (N + 4)
        expected = (expr(1, mono(0, ("DLap", "x"), free=("x",)))
                    + expr(-(N + 2) / (2 * N) * k,
                           mono(-1, ("Lap",), ("Du", "x"), free=("x",)))
                    + expr(frac(1, 4) * k * ((N + 2) / N - (N - 2) * ALPHA / (N + 4)),
                           mono(-2, ("Du", "j"), ("Du", "j"), ("Du", "x"),
                                free=("x",))))
        assert (build_named("F_i") - expected).is_zero

    def test_c1_value(self):
        c1 = build_named("c1")
        assert c1.evaluate(n=5, alpha=2) == Fraction(2209, 1296)

    def test_a11_two_routes_agree(self):
        assert build_named("A11") == build_named("A11_display")

    def test_alias_names(self):
        assert build_named("E_j") == build_named("E_i")
        with pytest.raises(KeyError):
            build_named("nonsense")


class TestVerification:
    def test_all_identities_verified_zero(self):
        reports = verify_all()
        assert len(reports) == 15
        bad = [r.id for r in reports if r.status != "verified-zero"]
        assert not bad, f"residuals in {bad}"

    def test_onshell_regression_pass(self):
        reports = verify_all(mode=SubstitutionMode.ON_SHELL)
        assert all(r.status == "verified-zero" for r in reports)

    def test_report_fields(self):
        r = verify_identity(get_identity("I3"))
        d = r.to_dict()
        assert d["status"] == "verified-zero" and d["residual_count"] == 0
        assert d["residual_terms"] == [] and d["millis"] >= 0
        assert d["mode"] == "free" and d["anchor"]

    def test_single_coefficient_perturbation_detected(self):
        rng = random.Random(5)
        idents = all_identities()
        for _ in range(10):
            ident = idents[rng.randrange(len(idents))]
            mutated = perturb_identity(ident, rng.randrange(len(ident.rhs.terms)))
            assert verify_identity(mutated).status == "residual"

    def test_master_identity_perturbation_hits_quartic(self):
        """Shifting the |Du|^6/u^4 coefficient of the master identity leaves
        exactly that monomial as residual."""
        ident = get_identity("I12")
        items = ident.rhs.sorted_terms()
        idx = next(i for i, (m, _) in enumerate(items)
                   if m.u_power == -4 and m.symbols == ("Du",) * 6)
        rep = verify_identity(perturb_identity(ident, idx))
        assert rep.residual_count == 1
        assert "u^-4" in rep.residual_terms[0]

    def test_printed_variants_fail_with_recorded_residuals(self):
        """The two display errata are reproducible: the printed right sides
        leave exactly the residuals the errata describe."""
        assert {e["identity"] for e in ERRATA} == {"I14", "I15"}
        r14 = verify_identity(printed_variant("I14"))
        assert r14.status == "residual" and r14.residual_count == 3
        r15 = verify_identity(printed_variant("I15"))
        assert r15.status == "residual" and r15.residual_count == 1
        assert "u^-2" in r15.residual_terms[0]


class TestRegistryListing:
    def test_census(self):
        listing = list_registry()
        assert len(listing) == 15
        assert [e["id"] for e in listing] == [f"I{k}" for k in range(1, 16)]

    def test_anchors_nonempty_and_ids_unique(self):
        listing = list_registry()
        assert all(e["anchor"] for e in listing)
        assert len({e["id"] for e in listing}) == len(listing)

    def test_modes_as_registered(self):
        modes = {e["id"]: e["mode"] for e in list_registry()}
        assert modes["I5"] == "onshell"
        assert modes["I10"] == "onshell"
        assert modes["I12"] == "onshell"
        assert all(modes[f"I{k}"] == "free" for k in (1, 2, 3, 4, 6, 7, 8, 9, 11, 13, 14, 15))


class TestCombination:
    def test_weights_reproduce_catalog_coefficients(self):
        basis = [get_identity(f"I{k}") for k in range(6, 12)]
        w = solve_combination(get_identity("I12"), basis)
        k = 1 + N * ALPHA / (N + 4)
        van = 1 - (N - 4) * ALPHA / (N + 4)
        assert w[0] == build_named("c1")
        assert w[1] == -build_named("c2")
        assert w[2] == (N + 2) * ALPHA / (N + 4)
        assert w[3] == ps(1)
        assert w[4] == ps(-1)
        assert w[5] == N * ALPHA / (2 * (N + 4)) * k * van

    def test_duplicate_basis_is_singular(self):
        basis = [get_identity("I6")] * 2 + [get_identity(f"I{k}") for k in (8, 9, 10, 11)]
        with pytest.raises(SingularSystemError):
            solve_combination(get_identity("I12"), basis)

    def test_zero_target_gives_zero_weights(self):
        tgt = get_identity("I12")
        zero_target = Identity("Z0", "zero", "wdiv", tgt.weight,
                               TExpr(1), TExpr(0), tgt.mode, tgt.b)
        w = solve_combination(zero_target,
                              [get_identity(f"I{k}") for k in range(6, 12)])
        assert all(x.is_zero for x in w)

    def test_unmatchable_target_reports_monomial(self):
        from bhverify.tensor import expr, mono
        tgt = get_identity("I12")
        odd = Identity("X", "unmatchable", "wdiv", tgt.weight,
                       expr(1, mono(5, ("DLap", "x"), free=("x",))),
                       TExpr(0), tgt.mode, tgt.b)
        with pytest.raises(NoCombinationError):
            solve_combination(odd, [get_identity(f"I{k}") for k in range(6, 12)])


def test_identity_suite_runtime_budget():
    import time
    t0 = time.perf_counter()
    verify_all()
    assert time.perf_counter() - t0 < 30.0
