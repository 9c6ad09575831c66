"""Exact symbolic and numeric verification for a fourth-order Liouville problem.

The engine re-derives the divergence identities among the invariant tensors
built from a positive function and its covariant derivatives, certifies the
positivity of the associated coefficient matrix with Sturm chains, checks the
exponent arithmetic of the blow-down argument, and cross-checks everything
against flat-space jet evaluation and radial ODE shooting.
"""

__version__ = "0.1.0"
