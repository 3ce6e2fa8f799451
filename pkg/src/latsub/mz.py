"""Spectral (frame) bounds and exact-quadrature certification for sample plans.

For points ``x^i``, weights ``w_i``, and frequency set I, the extreme
eigenvalues (A, B) of the Hermitian Gram matrix ``L* W L`` are exactly the
best constants in the two-sided comparison

    A * ||f||^2  <=  sum_i w_i |f(x^i)|^2  <=  B * ||f||^2

over the spanned trigonometric space (the exponentials are orthonormal under
the normalized Lebesgue measure on the torus, so ||f||^2 = ||a||^2).  A > 0
certifies that weighted least squares reconstructs the space exactly; A = B
is equivalent to exact quadrature on all products of basis functions.

Dense eigensolves are used up to a size cap; beyond that a matrix-free
Lanczos estimate on the normal operator is available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .fourier import SystemOperator
from .index_sets import IndexSet
from .lattice import SamplePlan

__all__ = [
    "SpectralBounds",
    "gram_matrix",
    "mz_constants",
    "estimate_bounds_iterative",
    "quadrature_exactness",
    "mz_report",
]

#: Largest |I| for which dense Gram assembly / eigensolves are attempted.
DENSE_EIG_CAP = 4096

_GRAM_BLOCK = 512


@dataclass(frozen=True)
class SpectralBounds:
    """Lower/upper constants 0 <= A <= B of an MZ inequality / frame."""

    A: float
    B: float
    converged: bool = True

    def __post_init__(self) -> None:
        if not (0 <= self.A <= self.B):
            raise ValueError(f"need 0 <= A <= B, got A={self.A}, B={self.B}")

    @property
    def ratio(self) -> float:
        """Condition ratio B/A (inf when A = 0)."""
        return self.B / self.A if self.A > 0 else np.inf


def gram_matrix(plan: SamplePlan, index_set: IndexSet) -> np.ndarray:
    """Assemble the |I| x |I| Hermitian Gram matrix ``L* W L``.

    Lattice-backed plans use a single length-M FFT of the weight vector: the
    (k, l) entry is the weighted character sum at residue difference
    ``r_l - r_k``.  Arbitrary point sets fall back to blocked dense assembly.
    """
    n = len(index_set)
    if n > DENSE_EIG_CAP:
        raise ValueError(
            f"|I| = {n} exceeds the dense cap {DENSE_EIG_CAP}; "
            "use estimate_bounds_iterative instead"
        )
    if plan.dimension != index_set.dimension:
        raise ValueError("dimension mismatch between plan and index set")

    if plan.lattice is not None:
        from .lattice import residues  # local import to keep module deps one-way

        lat = plan.lattice
        M = lat.size
        w_full = np.zeros(M)
        if plan.lattice_rows is None:
            if len(plan.weights) != M:
                raise ValueError("full-lattice plan weight count != M")
            w_full[:] = plan.weights
        else:
            np.add.at(w_full, plan.lattice_rows, plan.weights)
        char = M * np.fft.ifft(w_full)  # weighted character sums per residue
        r = residues(lat, index_set.frequencies)
        G = np.empty((n, n), dtype=np.complex128)
        for lo in range(0, n, _GRAM_BLOCK):
            hi = min(lo + _GRAM_BLOCK, n)
            G[lo:hi] = char[(r[None, :] - r[lo:hi, None]) % M]
    else:
        G = np.zeros((n, n), dtype=np.complex128)
        pts, w = plan.points, plan.weights
        step = max(1, (1 << 22) // max(n, 1))
        for lo in range(0, len(pts), step):
            hi = min(lo + step, len(pts))
            L = np.exp(2j * np.pi * (pts[lo:hi] @ index_set.frequencies.T))
            G += L.conj().T @ (w[lo:hi, None] * L)
    return 0.5 * (G + G.conj().T)


def mz_constants(plan: SamplePlan, index_set: IndexSet) -> SpectralBounds:
    """Exact MZ/frame constants from the extreme eigenvalues of ``L* W L``."""
    G = gram_matrix(plan, index_set)
    lam = np.linalg.eigvalsh(G)
    return SpectralBounds(A=max(float(lam[0]), 0.0), B=max(float(lam[-1]), 0.0))


def estimate_bounds_iterative(
    op: SystemOperator,
    weights: np.ndarray,
    tol: float = 1e-6,
    *,
    rng_seed: int = 0,
    maxiter: int = 2000,
) -> SpectralBounds:
    """Matrix-free estimate of the MZ constants via Lanczos on ``L* W L``.

    The upper constant is the largest Ritz value of the normal operator; the
    lower constant is recovered from the largest Ritz value of the reflected
    operator ``c*Id - L* W L`` (extremal Rayleigh quotients from random
    starts).  Non-convergence is not fatal: the best available estimates are
    returned with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = len(op.index_set)
    w = np.asarray(weights, dtype=np.float64)

    if not np.any(w > 0):
        return SpectralBounds(0.0, 0.0)

    if n <= 4:
        G = np.zeros((n, n), dtype=np.complex128)
        eye = np.eye(n, dtype=np.complex128)
        for j in range(n):
            G[:, j] = op.apply_normal(w, eye[:, j])
        lam = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
        return SpectralBounds(max(float(lam[0]), 0.0), float(lam[-1]))

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([rng_seed, 5])))
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    converged = True

    normal = spla.LinearOperator(
        (n, n), matvec=lambda v: op.apply_normal(w, v), dtype=np.complex128
    )
    try:
        vals = spla.eigsh(
            normal, k=1, which="LA", tol=tol / 2, v0=v0, maxiter=maxiter,
            return_eigenvectors=False,
        )
        B = float(vals[0])
    except spla.ArpackNoConvergence as exc:
        B = float(exc.eigenvalues[0]) if len(exc.eigenvalues) else 0.0
        converged = False

    shift = 1.01 * max(B, tol)
    reflected = spla.LinearOperator(
        (n, n),
        matvec=lambda v: shift * v - op.apply_normal(w, v),
        dtype=np.complex128,
    )
    try:
        vals = spla.eigsh(
            reflected, k=1, which="LA", tol=tol / 2, v0=v0, maxiter=maxiter,
            return_eigenvectors=False,
        )
        A = shift - float(vals[0])
    except spla.ArpackNoConvergence as exc:
        A = shift - float(exc.eigenvalues[0]) if len(exc.eigenvalues) else 0.0
        converged = False

    A = max(A, 0.0)
    return SpectralBounds(A=min(A, max(B, A)), B=max(B, A), converged=converged)


def quadrature_exactness(
    plan: SamplePlan, index_set: IndexSet, tol: float = 1e-8
) -> float | None:
    """Constant A with ``L* W L = A * Id`` within ``tol`` (max norm), else None.

    A positive result certifies ``sum_i w_i g(x^i) conj(h(x^i)) = A <g, h>``
    for all g, h in the spanned space; by the parallelogram identity this is
    exactly the tight case A = B of the MZ inequality.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    G = gram_matrix(plan, index_set)
    A = float(np.mean(np.real(np.diag(G))))
    off = G - A * np.eye(len(index_set))
    if np.max(np.abs(off)) <= tol:
        return A
    return None


def mz_report(
    plan: SamplePlan, index_set: IndexSet, tol: float = 1e-8
) -> dict:
    """Diagnostic summary: constants, ratio, exactness flag, and sizes."""
    bounds = mz_constants(plan, index_set)
    exact = quadrature_exactness(plan, index_set, tol)
    return {
        "A": bounds.A,
        "B": bounds.B,
        "ratio": bounds.ratio if np.isfinite(bounds.ratio) else None,
        "exact_quadrature": exact is not None,
        "quadrature_constant": exact,
        "num_points": len(plan),
        "num_frequencies": len(index_set),
    }
