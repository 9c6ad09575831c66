"""Independent flat-space numeric verification of the registered identities.

A jet sample is a synthetic point value of (u, Du, D2u, D3u, Bilap) with the
Ricci tensor identically zero.  Identities are checked numerically through a
route that shares as little as possible with the exact engine:

  * the left side is expanded by a *naive flat Leibniz differentiator*
    implemented here (third derivatives are kept as a totally symmetric
    array; no commutation corrections), and evaluated by Einstein summation
    over explicit numpy arrays;
  * the right side is evaluated directly in composite-symbol form, with the
    composite tensors realized as dense matrices/vectors from their
    definitions.

An exact identity then shows only floating-point rounding, with the relative
residual normalized by 1 + |LHS| + |RHS|.

The module also brute-forces the sharp constant of the trace-free inequality
|E|^2 |v|^2 >= c |Ev|^2 (random starts plus local optimization); the measured
minimum is n/(n-1), which is *below* the constant 4/3 that the positivity
argument cites, and the report flags that discrepancy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.optimize

from .calculus import SubstitutionMode, substitute_defs
from .coeffs import ALPHA as _ALPHA_PS
from .coeffs import ParamScalar
from .errors import CompositeDerivativeError, OrderOverflowError
from .registry import Identity, all_identities
from .tensor import FACTORS, TExpr, TensorMonomial, from_labeled, to_labeled

_LETTERS = "abcdefghijklmnopqrstuvwxy"


# -- jet samples ---------------------------------------------------------------


@dataclass
class JetSample:
    """One flat-space jet: scalar u, gradient, symmetric Hessian, totally
    symmetric third derivative, and a scalar standing for Bilap."""
    n: int
    mode: str           # "free" | "onshell"
    seed: int
    u: float
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    w4: float

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n, "mode": self.mode, "seed": self.seed, "u": self.u,
            "g1": self.g1.tolist(), "g2": self.g2.tolist(),
            "g3": self.g3.tolist(), "w4": self.w4,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "JetSample":
        d = json.loads(text)
        return cls(d["n"], d["mode"], d["seed"], d["u"], np.array(d["g1"]),
                   np.array(d["g2"]), np.array(d["g3"]), d["w4"])


def sample_jet(seed: int, n: int, mode: str = "free",
               alpha: Fraction | float | None = None) -> JetSample:
    """Deterministic jet from a seed; g2/g3 exactly symmetric, u >= 1e-3."""
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    u = float(rng.uniform(1e-3, 1.0))
    g1 = rng.uniform(-1.0, 1.0, n)
    m = rng.uniform(-1.0, 1.0, (n, n))
    g2 = (m + m.T) / 2.0
    t = rng.uniform(-1.0, 1.0, (n, n, n))
    # exact total symmetry: every slot triple reads the sorted representative
    idx = np.sort(np.stack(np.meshgrid(*[np.arange(n)] * 3, indexing="ij")), axis=0)
    g3 = t[idx[0], idx[1], idx[2]]
    if mode == "onshell":
        if alpha is None:
            raise ValueError("onshell jets need alpha")
        w4 = u ** float(alpha)
    else:
        w4 = float(rng.uniform(-1.0, 1.0))
    return JetSample(n, mode, seed, u, g1, g2, g3, w4)


def stack_jets(jets: list[JetSample]) -> dict:
    return {
        "u": np.array([j.u for j in jets]),
        "g1": np.stack([j.g1 for j in jets]),
        "g2": np.stack([j.g2 for j in jets]),
        "g3": np.stack([j.g3 for j in jets]),
        "w4": np.array([j.w4 for j in jets]),
        "n": jets[0].n,
    }


# -- evaluation ----------------------------------------------------------------


def _composite_arrays(batch: dict, params: dict):
    """Dense realizations of the composite symbols from their definitions."""
    n = batch["n"]
    b = float(params["b"])
    u = batch["u"]
    g1, g2, g3 = batch["g1"], batch["g2"], batch["g3"]
    tr = np.einsum("zii->z", g2)
    gradsq = np.einsum("za,za->z", g1, g1)
    outer = np.einsum("za,zb->zab", g1, g1)
    eye = np.eye(n)
    etf = (g2 + b * outer / u[:, None, None]
           - ((tr + b * gradsq / u) / n)[:, None, None] * eye)
    dlap = np.einsum("zajj->za", g3)
    fvec = (dlap + (n + 2) / n * b * (tr / u)[:, None] * g1
            - b * (1 + (n - 2) / n * b) * (gradsq / u**2)[:, None] * g1)
    gscal = (batch["w4"] + (n + 2) / n * b * tr**2 / u
             - 2 * (n + 2) / n * b * (1 + b) * tr * gradsq / u**2
             + b * (3 * b + 2) * (1 + (n - 2) / n * b) * gradsq**2 / u**3)
    return {"Etf": etf, "Fvec": fvec, "Gscal": gscal, "Lap": tr, "DLap": dlap}


def eval_monomial_batch(m: TensorMonomial, batch: dict, params: dict) -> np.ndarray:
    """Einstein-summation value of one monomial over a batch of jets.

    Returns shape (B,) for scalars, (B, n) for vectors, (B, n, n) for
    2-tensors.  Ricci factors evaluate to zero (flat oracle).
    """
    if any(s == "Ric" for s in m.symbols):
        b = len(batch["u"])
        n = batch["n"]
        shape = (b,) + (n,) * len(m.free)
        return np.zeros(shape)
    comp = _composite_arrays(batch, params)
    letters = {}
    for k, (x, y) in enumerate(m.pairs):
        letters[x] = letters[y] = _LETTERS[k]
    out_letters = ""
    for j, s in enumerate(m.free):
        letters[s] = _LETTERS[len(m.pairs) + j]
        out_letters += letters[s]
    operands, scripts = [], []
    scalars = batch["u"] ** m.u_power
    off = 0
    for sym in m.symbols:
        k = FACTORS[sym].arity
        idx = "".join(letters[off + j] for j in range(k))
        off += k
        if sym == "Du":
            operands.append(batch["g1"])
        elif sym == "D2u":
            operands.append(batch["g2"])
        elif sym == "D3u":
            operands.append(batch["g3"])
        elif sym == "DLap":
            operands.append(comp["DLap"])
        elif sym == "Lap":
            scalars = scalars * comp["Lap"]
            continue
        elif sym == "Bilap":
            scalars = scalars * batch["w4"]
            continue
        elif sym == "Gscal":
            scalars = scalars * comp["Gscal"]
            continue
        elif sym == "g":
            operands.append(np.eye(batch["n"]))
            scripts.append(idx)
            continue
        elif sym in ("Etf", "Fvec"):
            operands.append(comp[sym])
        else:
            raise ValueError(f"cannot evaluate factor {sym!r}")
        scripts.append("z" + idx)
    operands.append(scalars)
    scripts.append("z")
    spec = ",".join(scripts) + "->z" + out_letters
    return np.einsum(spec, *operands)


def eval_terms_batch(terms, batch: dict, params: dict) -> np.ndarray:
    """Sum of coeff * monomial over a batch; coefficients evaluated exactly
    at the rational parameters, then floated."""
    total = None
    for coeff, m in terms:
        c = float(coeff.evaluate(**params))
        v = c * eval_monomial_batch(m, batch, params)
        total = v if total is None else total + v
    if total is None:
        return np.zeros(len(batch["u"]))
    return total


def eval_expr(e: TExpr, jet: JetSample, params: dict):
    """Single-jet value of a canonical expression."""
    batch = stack_jets([jet])
    out = eval_terms_batch([(c, m) for m, c in e.terms.items()], batch, params)
    return out[0] if e.valence == 0 else out[0, ...]


# -- naive flat differentiator ---------------------------------------------------


def flat_grad_terms(terms, mode: SubstitutionMode):
    """Flat-space gradient of (coeff, monomial) scalar terms by the plain
    Leibniz rule; third derivatives stay totally symmetric.  Output is raw
    (not canonicalized) with the new slot as a trailing free slot."""
    out = []
    for c, m in terms:
        u, facs, frees = to_labeled(m)
        d = "d"
        if m.u_power:
            out.append((c * m.u_power, from_labeled(u - 1, facs + [("Du", d)], frees + [d])))
        for i, fac in enumerate(facs):
            rest = facs[:i] + facs[i + 1:]
            sym = fac[0]
            if sym == "Du":
                nf = [("D2u", fac[1], d)]
            elif sym == "D2u":
                nf = [("D3u", d, fac[1], fac[2])]
            elif sym == "Lap":
                nf = [("DLap", d)]
            elif sym == "DLap":
                raise OrderOverflowError("flat jets stop at third derivatives")
            elif sym == "Bilap":
                if mode is not SubstitutionMode.ON_SHELL:
                    raise OrderOverflowError("gradient of Bilap needs the equation")
                out.append((c * _ALPHA_PS, from_labeled(u - 1, facs + [("Du", d)], frees + [d])))
                continue
            elif sym == "g":
                continue
            elif sym == "Ric":
                continue  # flat oracle: Ricci terms are identically zero
            else:
                raise CompositeDerivativeError(f"expand {sym} before flat differentiation")
            out.append((c, from_labeled(u, rest + nf, frees + [d])))
    return out


def flat_div_terms(weight: ParamScalar, terms, mode: SubstitutionMode):
    """Flat expansion of u^-w div(u^w V) for raw vector terms.

    DLap differentiated off its own slot is an order overflow, exactly as in
    the covariant engine; everything else is plain Leibniz with the
    derivative slot contracted against the free slot.
    """
    out = []
    for c, m in terms:
        u, facs, frees = to_labeled(m)
        f = frees[0]
        if m.u_power:
            out.append((c * m.u_power, from_labeled(u - 1, facs + [("Du", f)], [])))
        if not weight.is_zero:
            out.append((c * weight, from_labeled(u - 1, facs + [("Du", f)], [])))
        for i, fac in enumerate(facs):
            rest = facs[:i] + facs[i + 1:]
            sym = fac[0]
            if sym == "Du":
                nf = [("D2u", fac[1], f)]
            elif sym == "D2u":
                nf = [("D3u", f, fac[1], fac[2])]
            elif sym == "Lap":
                nf = [("DLap", f)]
            elif sym == "DLap":
                if fac[1] == f:
                    nf = [("Bilap",)]
                else:
                    raise OrderOverflowError("flat jets stop at third derivatives")
            elif sym == "Bilap":
                if mode is not SubstitutionMode.ON_SHELL:
                    raise OrderOverflowError("gradient of Bilap needs the equation")
                out.append((c * _ALPHA_PS, from_labeled(u - 1, facs + [("Du", f)], [])))
                continue
            elif sym == "g":
                continue
            elif sym == "Ric":
                continue  # flat oracle: Ricci terms are identically zero
            else:
                raise CompositeDerivativeError(f"expand {sym} before flat differentiation")
            out.append((c, from_labeled(u, rest + nf, [])))
    return out


# -- identity checks --------------------------------------------------------------


@dataclass
class OracleIdentityReport:
    id: str
    dims: list[int]
    samples: int
    alpha: str
    a: str
    tol: float
    max_rel_residual: float
    passed: bool
    failing_jets: list[str]

    def to_dict(self) -> dict:
        return {
            "id": self.id, "dims": self.dims, "samples": self.samples,
            "alpha": self.alpha, "a": self.a, "tol": self.tol,
            "max_rel_residual": self.max_rel_residual, "passed": self.passed,
            "failing_jets": self.failing_jets,
        }


def _params_for(n: int, alpha: Fraction, a: Fraction) -> dict:
    bs = Fraction(-1, 2) * (1 + Fraction(n) * alpha / (n + 4))
    return {"n": Fraction(n), "alpha": alpha, "a": a, "b": bs}


def identity_lhs_flat_terms(ident: Identity, mode: SubstitutionMode | None = None):
    """Left side of an identity as raw flat-Leibniz terms in jet variables."""
    mode = mode or ident.mode
    lhs_jets = substitute_defs(ident.lhs, "backward", b=ident.b)
    terms = [(c, m) for m, c in lhs_jets.terms.items()]
    if ident.kind == "wdiv":
        return flat_div_terms(ident.weight, terms, mode), 0
    return flat_grad_terms(terms, mode), 1


def numeric_check_identity(ident: Identity, samples: int = 1000,
                           dims=(5, 6, 8), tol: float = 1e-9,
                           seed: int = 0, alpha=Fraction(2),
                           a=Fraction(1)) -> OracleIdentityReport:
    """Max relative residual of LHS - RHS over random flat jets.

    The residual is normalized by 1 + |LHS| + |RHS|; jets violating the
    tolerance are serialized for replay.
    """
    alpha, a = Fraction(alpha), Fraction(a)
    lhs_terms, out_valence = identity_lhs_flat_terms(ident)
    rhs_terms = [(c, m) for m, c in ident.rhs.terms.items()]
    worst = 0.0
    failing: list[str] = []
    mode = "onshell" if ident.mode is SubstitutionMode.ON_SHELL else "free"
    for n in dims:
        params = _params_for(n, alpha, a)
        jets = [sample_jet(seed + 1_000_000 * n + k, n, mode, alpha)
                for k in range(samples)]
        batch = stack_jets(jets)
        lhs = eval_terms_batch(lhs_terms, batch, params)
        rhs = eval_terms_batch(rhs_terms, batch, params)
        if out_valence == 0:
            rel = np.abs(lhs - rhs) / (1.0 + np.abs(lhs) + np.abs(rhs))
        else:
            num = np.max(np.abs(lhs - rhs), axis=1)
            rel = num / (1.0 + np.linalg.norm(lhs, axis=1) + np.linalg.norm(rhs, axis=1))
        worst = max(worst, float(np.max(rel)))
        for k in np.nonzero(rel > tol)[0][:3]:
            failing.append(jets[int(k)].to_json())
    return OracleIdentityReport(ident.id, list(dims), samples, str(alpha), str(a),
                                tol, worst, worst <= tol, failing)


def check_all_identities(samples: int = 1000, dims=(5, 6, 8), tol: float = 1e-9,
                         seed: int = 0, alpha=Fraction(2), a=Fraction(1)):
    return [numeric_check_identity(i, samples, dims, tol, seed, alpha, a)
            for i in all_identities()]


def identity_homogeneity(ident: Identity) -> int:
    """Common scaling degree of the identity under u -> t*u jets."""
    degrees = ident.rhs.u_degrees() | substitute_defs(
        ident.lhs, "backward", b=ident.b).u_degrees()
    if len(degrees) != 1:
        raise ValueError(f"{ident.id} is not u-homogeneous: {degrees}")
    return degrees.pop()


def scale_jet(jet: JetSample, lam: float, alpha=None) -> JetSample:
    """The jet of lam*u; in onshell mode w4 is recomputed as (lam*u)^alpha."""
    w4 = (lam * jet.u) ** float(alpha) if jet.mode == "onshell" else lam * jet.w4
    return JetSample(jet.n, jet.mode, jet.seed, lam * jet.u, lam * jet.g1,
                     lam * jet.g2, lam * jet.g3, w4)


# -- sharp constant of the trace-free inequality -----------------------------------


@dataclass
class SharpConstantResult:
    n: int
    minimum: float
    analytic: float              # n/(n-1)
    cited_constant: float        # 4/3
    below_cited: bool
    extremizer: str

    def to_dict(self) -> dict:
        return {
            "n": self.n, "minimum": self.minimum, "analytic": self.analytic,
            "cited_constant": self.cited_constant, "below_cited": self.below_cited,
            "extremizer": self.extremizer,
        }


def _tracefree_ratio(params: np.ndarray, n: int) -> float:
    """|E|^2 |v|^2 / |Ev|^2 for packed (upper-triangle E, v)."""
    k = n * (n + 1) // 2
    tri = params[:k]
    v = params[k:]
    e = np.zeros((n, n))
    idx = np.triu_indices(n)
    e[idx] = tri
    e = e + e.T - np.diag(np.diag(e))
    e = e - np.trace(e) / n * np.eye(n)
    ev = e @ v
    denom = float(ev @ ev)
    if denom < 1e-300:
        return np.inf
    return float((e * e).sum() * (v @ v) / denom)


def sharp_constant_search(n: int, iterations: int = 20,
                          seed: int = 0) -> SharpConstantResult:
    """Minimize |E|^2 |v|^2 / |Ev|^2 over trace-free symmetric E and v != 0.

    Random starts refined by local optimization, plus the analytic candidate
    diag(1, -1/(n-1), ..., -1/(n-1)) with v = e1, whose ratio n/(n-1) upper
    bounds the reported minimum by construction.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    k = n * (n + 1) // 2
    analytic = n / (n - 1)

    # analytic candidate as a packed start
    e0 = np.diag([1.0] + [-1.0 / (n - 1)] * (n - 1))
    start0 = np.concatenate([e0[np.triu_indices(n)], np.eye(n)[0]])

    best = np.inf
    starts = [start0] + [rng.normal(size=k + n) for _ in range(iterations)]
    for x0 in starts:
        if _tracefree_ratio(x0, n) == np.inf:
            continue
        res = scipy.optimize.minimize(_tracefree_ratio, x0, args=(n,),
                                      method="L-BFGS-B",
                                      options={"maxiter": 2000, "ftol": 1e-15,
                                               "gtol": 1e-12})
        best = min(best, float(res.fun), _tracefree_ratio(x0, n))
    return SharpConstantResult(
        n=n, minimum=best, analytic=analytic, cited_constant=4.0 / 3.0,
        below_cited=(best < 4.0 / 3.0 - 1e-9),
        extremizer="diag(1, -1/(n-1), ..., -1/(n-1)) with v = e1 (up to rotation)")
