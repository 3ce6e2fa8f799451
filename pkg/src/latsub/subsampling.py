"""Two-stage point reduction with stability certificates.

Stage 1 draws n points i.i.d. (with duplicates) from a weighted sample plan
under a Christoffel-type discrete density and reweights them by
``w_i / (n * rho_i)``, preserving the two-sided L2 stability of the plan up
to factors [1/2, 3/2] with high probability at logarithmic oversampling.

Stage 2 reduces further to linear oversampling ``<= ceil(b * |I|)`` with the
deterministic barrier-potential greedy of spectral (frame) sparsification:
a weighted variant that certifies two-sided bounds, and a plain (unweighted)
variant that certifies the lower bound only.  Both stages are certified a
posteriori by dense eigensolves of the subsampled Gram matrix; a run that
cannot meet its certificate raises instead of returning a bad selection.

Randomness policy: only the stage-1 draw is random.  Its generator is
``PCG64(SeedSequence([seed, _STREAM_DRAW]))``; categorical sampling uses a
deterministically built alias table, so identical seeds give bit-identical
selections.  The barrier greedy is fully deterministic (ties break to the
lowest row index).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .index_sets import IndexSet, embedding_eigenvalues, index_set_difference
from .lattice import SamplePlan
from .mz import SpectralBounds, mz_constants

__all__ = [
    "DensityWeights",
    "SubsampleSelection",
    "density_weights",
    "random_subsample_size",
    "random_subsample",
    "kappa",
    "bss_subsample",
    "plain_bss_subsample",
    "bss_select_weighted",
    "bss_select_plain",
    "SpectralCertificateError",
]

_STREAM_DRAW = 11  # SeedSequence tag for the stage-1 categorical draw

#: Cap on N * |I| entries of the dense row matrix handed to the BSS greedy.
BSS_ENTRY_CAP = 1 << 24


class SpectralCertificateError(RuntimeError):
    """A subsampling result failed its a-posteriori spectral certificate."""


@dataclass(frozen=True, eq=False)
class DensityWeights:
    """A probability vector over the points of a parent plan."""

    rho: np.ndarray

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=np.float64)
        if rho.ndim != 1:
            raise ValueError("rho must be one-dimensional")
        if np.any(rho < 0):
            raise ValueError("density weights must be nonnegative")
        if abs(rho.sum() - 1.0) > 1e-12:
            raise ValueError(f"density must sum to 1, got {rho.sum()!r}")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    def __len__(self) -> int:
        return len(self.rho)


@dataclass(frozen=True, eq=False)
class SubsampleSelection:
    """An ordered index list into a parent plan plus per-point reweights.

    ``stage`` is one of ``"random"``, ``"bss_weighted"``, ``"plain_bss"``.
    For the random stage ``reweights = w_i / (n * rho_i)``; the weighted BSS
    stage multiplies those by its nonnegative scalars ``s_i`` (kept in
    ``bss_weights``); the plain stage carries ``w_i / rho_i`` scaled by
    ``1/|I|``.  Duplicate indices are permitted and kept.
    """

    parent: SamplePlan
    indices: np.ndarray
    reweights: np.ndarray
    stage: str
    seed: int | None = None
    draw_count: int | None = None
    oversampling: float | None = None
    bss_weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        rw = np.asarray(self.reweights, dtype=np.float64)
        if idx.shape != rw.shape or idx.ndim != 1:
            raise ValueError("indices and reweights must be aligned 1-d arrays")
        if len(idx) and (idx.min() < 0 or idx.max() >= len(self.parent)):
            raise ValueError("selection indices out of range of the parent plan")
        if np.any(rw < 0):
            raise ValueError("reweights must be nonnegative")
        idx.flags.writeable = False
        rw.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "reweights", rw)
        if self.bss_weights is not None:
            s = np.asarray(self.bss_weights, dtype=np.float64)
            s.flags.writeable = False
            object.__setattr__(self, "bss_weights", s)

    def __len__(self) -> int:
        return len(self.indices)

    def as_plan(self, stable_for: IndexSet | None = None) -> SamplePlan:
        """The selection as a standalone SamplePlan (lattice link preserved)."""
        parent = self.parent
        rows = None
        if parent.lattice is not None:
            rows = (
                self.indices
                if parent.lattice_rows is None
                else parent.lattice_rows[self.indices]
            )
        return SamplePlan(
            points=parent.points[self.indices],
            weights=self.reweights,
            stable_for=stable_for,
            lattice=parent.lattice,
            lattice_rows=rows,
        )

    def to_csv(self) -> str:
        lines = ["index,reweight,stage,s"]
        s = self.bss_weights
        for t, (i, w) in enumerate(zip(self.indices, self.reweights)):
            s_str = format(s[t], ".17g") if s is not None else ""
            lines.append(f"{int(i)},{format(w, '.17g')},{self.stage},{s_str}")
        return "\n".join(lines) + "\n"

    def sidecar_json(self) -> str:
        return json.dumps(
            {
                "stage": self.stage,
                "seed": self.seed,
                "draw_count": self.draw_count,
                "oversampling": self.oversampling,
                "size": len(self),
            },
            indent=2,
        )

    def save(self, csv_path, json_path) -> None:
        with open(csv_path, "w", encoding="ascii") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w", encoding="ascii") as fh:
            fh.write(self.sidecar_json())

    @classmethod
    def from_csv(
        cls, parent: SamplePlan, csv_text: str, json_text: str | None = None
    ) -> "SubsampleSelection":
        lines = [ln for ln in csv_text.splitlines() if ln.strip()]
        idx, rw, s_vals, stages = [], [], [], set()
        for ln in lines[1:]:
            tok = ln.split(",")
            idx.append(int(tok[0]))
            rw.append(float(tok[1]))
            stages.add(tok[2])
            if tok[3]:
                s_vals.append(float(tok[3]))
        meta = json.loads(json_text) if json_text else {}
        (stage,) = stages or {"random"}
        return cls(
            parent=parent,
            indices=np.array(idx, dtype=np.int64),
            reweights=np.array(rw, dtype=np.float64),
            stage=stage,
            seed=meta.get("seed"),
            draw_count=meta.get("draw_count"),
            oversampling=meta.get("oversampling"),
            bss_weights=np.array(s_vals) if s_vals else None,
        )


def density_weights(
    plan: SamplePlan,
    index_set: IndexSet,
    index_set_mz: IndexSet,
    s: float,
) -> DensityWeights:
    """The three-term sampling density over the points of ``plan``.

    Convex combination (equal thirds) of: the discrete Christoffel density of
    the reconstruction space, the eigenvalue-weighted density of the tail
    frequencies ``I_MZ \\ I``, and the plan's own quadrature density.  The
    last term is normalized by ``sum_j w_j`` so the result is a proper
    density for any weight scale.  When the tail is empty the second term is
    dropped and the remaining two renormalized.

    On the torus every character has unit modulus, so the Christoffel and
    tail factors are constant in x and all terms collapse to
    ``w_i / sum_j w_j`` (uniform weights give exactly ``rho_i = 1/M``); the
    structure is kept explicit so the collapse stays visible and testable.
    """
    w = plan.weights
    wsum = w.sum()
    if wsum <= 0:
        raise ValueError("parent plan has all-zero weights")
    tail = index_set_difference(index_set_mz, index_set)

    m = len(plan)
    # |eta_k(x)|^2 == 1 for every character: Christoffel function == |I|,
    # tail function == sum of tail eigenvalues, both independent of x.
    christoffel = np.full(m, float(len(index_set)))
    terms = [w * christoffel / np.dot(w, christoffel), w / wsum]
    if len(tail):
        tail_vals = np.full(m, float(np.sum(embedding_eigenvalues(tail, s))))
        terms.insert(1, w * tail_vals / np.dot(w, tail_vals))
    rho = sum(terms) / len(terms)
    return DensityWeights(rho=rho)


def random_subsample_size(
    A: float, B: float, C: float, card_I: int, t: float
) -> int:
    """Sufficient i.i.d. draw count ``ceil((12 B / (A C)) |I| (ln|I| + t))``.

    ``log`` is the natural logarithm throughout (tail bounds compose with
    ``exp(-t)``).  With C = 1/3 this is the ``ceil(36 (B/A) |I| (ln|I|+t))``
    form used by the recovery guarantees.
    """
    if A <= 0:
        raise ValueError("lower MZ constant A must be positive")
    if not 0 < C <= 1:
        raise ValueError(f"C must lie in (0, 1], got {C}")
    if card_I < 1:
        raise ValueError("card_I must be >= 1")
    if t <= 0:
        raise ValueError("t must be positive")
    return math.ceil((12.0 * B / (A * C)) * card_I * (math.log(card_I) + t))


def _alias_table(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic Vose alias table for O(1) categorical draws."""
    n = len(p)
    prob = np.zeros(n)
    alias = np.arange(n, dtype=np.int64)
    scaled = p * n
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, g = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    for i in large + small:  # leftovers are probability-1 cells
        prob[i] = 1.0
    return prob, alias


def random_subsample(
    plan: SamplePlan, rho: DensityWeights, n: int, seed: int
) -> SubsampleSelection:
    """Draw ``n`` points i.i.d. from the plan under ``rho`` (with duplicates).

    Each drawn point i receives the reweight ``w_i / (n * rho_i)``, which
    makes the subsampled discrete square sum an unbiased estimator of the
    plan's weighted square sum for every fixed function.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(rho) != len(plan):
        raise ValueError("density length does not match the plan")
    prob, alias = _alias_table(rho.rho)
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, _STREAM_DRAW]))
    )
    cells = rng.integers(0, len(plan), size=n)
    coin = rng.random(n)
    J = np.where(coin < prob[cells], cells, alias[cells])
    rho_J = rho.rho[J]
    if np.any(rho_J <= 0):  # unreachable by construction; guard the division
        raise RuntimeError("drew a zero-probability point")
    reweights = plan.weights[J] / (n * rho_J)
    return SubsampleSelection(
        parent=plan,
        indices=J,
        reweights=reweights,
        stage="random",
        seed=seed,
        draw_count=n,
    )


def kappa(A: float, B: float) -> float:
    """Feasibility constant for weighted sparsification of a non-tight frame.

    ``kappa = 3B/(2A) + 1/2 + sqrt((3B/(2A) + 1/2)^2 - 1)``; equals
    ``2 + sqrt(3)`` exactly when A = B and grows with B/A.
    """
    if not (0 < A <= B):
        raise ValueError(f"need B >= A > 0, got A={A}, B={B}")
    h = 1.5 * B / A + 0.5
    return h + math.sqrt(h * h - 1.0)


# ---------------------------------------------------------------------------
# Barrier-potential greedy selection on raw frame rows
# ---------------------------------------------------------------------------


def _hermitian_quadratic_forms(
    rows: np.ndarray, basis: np.ndarray, diag: np.ndarray
) -> np.ndarray:
    """``v^H f(S) v`` for every row v, given the eigenbasis of S."""
    proj = np.abs(rows.conj() @ basis) ** 2
    return proj @ diag


def bss_select_plain(rows: np.ndarray, b: float) -> np.ndarray:
    """Unweighted subset selection of at most ``ceil(b * m)`` rows.

    Lower-barrier greedy: each step adds the unused row with the largest
    decrease of the barrier potential ``tr (S - l I)^{-1}``, which pushes the
    whole lower end of the selected spectrum up, not just the minimum.  The
    barrier level l is fixed a fraction of the fair-share eigenvalue below
    zero, which keeps the resolvent well conditioned and lets both score
    vectors update in O(N m) per step via rank-1 (Sherman-Morrison) algebra
    instead of a fresh eigendecomposition.

    Returns the selected row positions in selection order.
    """
    rows = np.ascontiguousarray(rows, dtype=np.complex128)
    N, m = rows.shape
    if b <= 1.0 + 1.0 / m:
        raise ValueError(f"b must exceed 1 + 1/|I| = {1 + 1 / m}, got {b}")
    norms = np.einsum("ij,ij->i", rows, rows.conj()).real
    active = norms > 0
    q = min(int(math.ceil(b * m)), int(active.sum()))
    tr_total = norms[active].sum()
    # barrier depth: a quarter of the selection's fair-share eigenvalue
    level = 0.25 * tr_total * q / (max(int(active.sum()), 1) * m)
    if level <= 0:
        raise ValueError("input rows carry no mass")

    resolvent = np.eye(m, dtype=np.complex128) / level  # (S - l I)^{-1}, S = 0
    q1 = norms / level  # row scores  v^H (S - l I)^{-1} v
    q2 = norms / level**2  # and  v^H (S - l I)^{-2} v
    conj_rows = rows.conj()
    used = np.zeros(N, dtype=bool)
    selected = []
    for _ in range(q):
        gain = q2 / (1.0 + q1)  # potential decrease when adding the row
        gain[used | ~active] = -np.inf
        i = int(np.argmax(gain))
        used[i] = True
        selected.append(i)
        v = rows[i]
        w = resolvent @ v
        g = resolvent @ w
        beta = 1.0 / (1.0 + q1[i])
        cross = conj_rows @ np.column_stack((w, g))
        a1, a2 = cross[:, 0], cross[:, 1]
        abs1 = np.abs(a1) ** 2
        q1 = q1 - beta * abs1
        q2 = (
            q2
            - 2.0 * beta * np.real(a2 * a1.conj())
            + beta**2 * float(np.real(np.vdot(w, w))) * abs1
        )
        resolvent -= beta * np.outer(w, w.conj())
    return np.array(selected, dtype=np.int64)


def bss_select_weighted(
    rows: np.ndarray, b: float
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted sparsification: at most ``ceil(b * m)`` rows with scalars t_i.

    Classical two-barrier greedy: an upper and a lower barrier advance by
    fixed increments each step, and a row plus weight is chosen that keeps
    both barrier potentials from growing.  The upper increment is relaxed
    (and the lower shrunk) adaptively when no row qualifies, which extends
    the scheme to non-tight input frames; the caller certifies the final
    spectrum, so any internal schedule that completes is admissible.

    Returns (row positions, weights) over the full input (zeros where
    unselected rows); the number of positive weights is at most ceil(b*m).
    """
    rows = np.ascontiguousarray(rows, dtype=np.complex128)
    N, m = rows.shape
    q = int(math.ceil(b * m))
    t = np.zeros(N)
    if q >= N:
        t[:] = 1.0
        return np.arange(N, dtype=np.int64), t

    frame = rows.conj().T @ rows
    lam_hi = float(np.linalg.eigvalsh(frame)[-1])
    if lam_hi <= 0:
        raise ValueError("input rows span nothing")
    scaled = rows / math.sqrt(lam_hi)

    sqrt_b = math.sqrt(b)
    eps_lower = 1.0 / sqrt_b
    eps_upper = (sqrt_b - 1.0) / (b + sqrt_b)
    d_lower0 = 1.0
    d_upper0 = (sqrt_b + 1.0) / (sqrt_b - 1.0)
    lower = -m / eps_lower
    upper = m / eps_upper

    S = np.zeros((m, m), dtype=np.complex128)
    for step in range(q):
        mu, V = np.linalg.eigh(S)
        proj = np.abs(scaled.conj() @ V) ** 2
        placed = False
        d_lower = d_lower0
        for _ in range(12):  # shrink lower increment
            for grow in range(14):  # relax upper increment
                d_upper = d_upper0 * (2.0**grow)
                up, lp = upper + d_upper, lower + d_lower
                if lp >= mu[0]:
                    break
                du1 = 1.0 / (up - mu)
                dl1 = 1.0 / (mu - lp)
                d_phi_u = np.sum(1.0 / (upper - mu)) - np.sum(du1)
                d_phi_l = np.sum(dl1) - np.sum(1.0 / (mu - lower))
                u_val = proj @ (du1 * du1) / d_phi_u + proj @ du1
                l_val = proj @ (dl1 * dl1) / d_phi_l - proj @ dl1
                feasible = (l_val >= u_val) & (u_val > 0)
                if np.any(feasible):
                    slack = np.where(feasible, l_val - u_val, -np.inf)
                    i = int(np.argmax(slack))
                    w = 2.0 / (u_val[i] + l_val[i])
                    t[i] += w
                    S += w * np.outer(scaled[i], scaled[i].conj())
                    upper, lower = up, lp
                    placed = True
                    break
            if placed:
                break
            d_lower *= 0.5
        if not placed:
            raise SpectralCertificateError(
                f"barrier greedy stalled at step {step} of {q}"
            )
    chosen = np.nonzero(t)[0]
    return chosen, t


# ---------------------------------------------------------------------------
# Pipeline wrappers operating on stage-1 selections
# ---------------------------------------------------------------------------


def _stage1_rows(selection: SubsampleSelection, index_set: IndexSet) -> np.ndarray:
    """Weighted frame rows ``sqrt(reweight_i) * (eta_k(x^i))_k`` of a selection."""
    n, m = len(selection), len(index_set)
    if n * m > BSS_ENTRY_CAP:
        raise ValueError(
            f"stage-1 row matrix of {n}x{m} entries exceeds the dense cap "
            f"({BSS_ENTRY_CAP}); sparsification is a dense precomputation"
        )
    pts = selection.parent.points[selection.indices]
    rows = np.exp(2j * np.pi * (pts @ index_set.frequencies.T))
    rows *= np.sqrt(selection.reweights)[:, None]
    return rows


def _weighted_upper_cap(B: float, b: float, kap: float) -> float:
    sqrt_b = math.sqrt(b)
    return 1.5 * B * (sqrt_b + 1.0) ** 2 / ((sqrt_b - 1.0) * (sqrt_b - kap))


def _resolve_bounds(
    selection: SubsampleSelection, bounds: SpectralBounds | None
) -> SpectralBounds:
    if bounds is None:
        bounds = selection.parent.bounds
    if bounds is None:
        raise ValueError(
            "no spectral bounds supplied and the parent plan carries none"
        )
    return bounds


def bss_subsample(
    selection: SubsampleSelection,
    index_set: IndexSet,
    b: float,
    bounds: SpectralBounds | None = None,
) -> SubsampleSelection:
    """Weighted sparsification of a stage-1 selection with two-sided certificate.

    ``bounds`` are the (A, B) constants of the MZ system the stage-1 draw
    came from; the stage-1 rows are assumed to satisfy the inflated window
    [A/2, 3B/2], which is verified up front.  Requires ``b > kappa(A, B)^2``.
    The output reweights are ``s_i`` times the stage-1 reweights, rescaled so
    the subsampled system's lower constant is at least A/2 while its upper
    constant stays below ``(3/2) B (sqrt(b)+1)^2 / ((sqrt(b)-1)(sqrt(b)-kappa))``;
    both sides are certified by a dense eigensolve before returning.
    """
    if selection.stage != "random":
        raise ValueError("weighted sparsification expects a stage-1 selection")
    bounds = _resolve_bounds(selection, bounds)
    A, B = bounds.A, bounds.B
    kap = kappa(A, B)
    if b <= kap * kap:
        raise ValueError(
            f"b must exceed kappa^2 = {kap * kap:.6g} for bounds "
            f"(A={A:.6g}, B={B:.6g}); got b={b}"
        )
    m = len(index_set)
    rows = _stage1_rows(selection, index_set)

    stage1 = np.linalg.eigvalsh(rows.conj().T @ rows)
    slack = 1e-9
    if stage1[0] < 0.5 * A * (1 - slack) or stage1[-1] > 1.5 * B * (1 + slack):
        raise ValueError(
            "stage-1 selection violates its MZ window "
            f"[{0.5 * A:.6g}, {1.5 * B:.6g}]: got "
            f"[{stage1[0]:.6g}, {stage1[-1]:.6g}]"
        )

    chosen, t = bss_select_weighted(rows, b)
    weighted_gram = (rows.conj().T * t) @ rows
    lam = np.linalg.eigvalsh(0.5 * (weighted_gram + weighted_gram.conj().T))
    if lam[0] <= 0:
        raise SpectralCertificateError("sparsified frame lost full rank")
    upper_cap = _weighted_upper_cap(B, b, kap)
    # The greedy fixes the spectral ratio but not the absolute scale; keep the
    # raw scalars when they already satisfy both bounds (e.g. the trivial
    # keep-everything branch), otherwise normalize the lower constant to A/2.
    if lam[0] >= 0.5 * A and lam[-1] <= upper_cap:
        scale = 1.0
    else:
        scale = 0.5 * A / lam[0]
    s_all = scale * t
    lower, upper = scale * lam[0], scale * lam[-1]
    if len(chosen) > math.ceil(b * m) or lower < 0.5 * A * (1 - slack):
        raise SpectralCertificateError("weighted sparsification bound violated")
    if upper > upper_cap * (1 + slack):
        raise SpectralCertificateError(
            f"upper constant {upper:.6g} exceeds the certified cap {upper_cap:.6g}"
        )

    return SubsampleSelection(
        parent=selection.parent,
        indices=selection.indices[chosen],
        reweights=s_all[chosen] * selection.reweights[chosen],
        stage="bss_weighted",
        seed=selection.seed,
        draw_count=selection.draw_count,
        oversampling=b,
        bss_weights=s_all[chosen],
    )


def plain_bss_subsample(
    selection: SubsampleSelection,
    index_set: IndexSet,
    b: float,
    bounds: SpectralBounds | None = None,
) -> SubsampleSelection:
    """Unweighted sparsification certifying the lower MZ constant only.

    Keeps at most ``ceil(b * |I|)`` of the stage-1 rows (no extra scalars)
    with reweights ``w_i / rho_i`` carrying a global ``1/|I|`` scaling.  The
    output's lower MZ constant is certified to be at least
    ``(b-1)^3 / (178 (b+1)^2) * A``; the upper constant is unconstrained.
    """
    if selection.stage != "random":
        raise ValueError("plain sparsification expects a stage-1 selection")
    bounds = _resolve_bounds(selection, bounds)
    A = bounds.A
    m = len(index_set)
    if b <= 1.0 + 1.0 / m:
        raise ValueError(f"b must exceed 1 + 1/|I| = {1 + 1 / m:.6g}, got {b}")
    if selection.draw_count is None:
        raise ValueError("stage-1 selection must record its draw count")

    rows = _stage1_rows(selection, index_set)
    chosen = bss_select_plain(rows, b)
    n = selection.draw_count
    # w_i / rho_i = n * stage-1 reweight; the certified sum carries 1/|I|
    reweights = selection.reweights[chosen] * (n / m)

    result = SubsampleSelection(
        parent=selection.parent,
        indices=selection.indices[chosen],
        reweights=reweights,
        stage="plain_bss",
        seed=selection.seed,
        draw_count=selection.draw_count,
        oversampling=b,
    )
    certified = (b - 1.0) ** 3 / (178.0 * (b + 1.0) ** 2) * A
    achieved = mz_constants(result.as_plan(), index_set).A
    if len(chosen) > math.ceil(b * m) or achieved < certified * (1 - 1e-9):
        raise SpectralCertificateError(
            f"plain sparsification lower bound violated: achieved "
            f"{achieved:.6g} < certified {certified:.6g}"
        )
    return result
