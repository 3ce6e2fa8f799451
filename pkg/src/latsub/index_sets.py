"""Frequency index sets on Z^d, mixed-smoothness weights, and eigenvalue decay.

The reconstruction space is ``span{exp(2*pi*i*<k, x>)}`` over a finite set of
integer frequency vectors ``k``.  The central construction is the hyperbolic
cross

    { k in Z^d : prod_j max(1, |k_j| / gamma) <= R },

the natural truncation for dominating mixed smoothness.  Each frequency
carries a product weight ``w_s(k) = prod_j (1 + (2*pi*|k_j|)^(2s))^(1/2)``
whose inverse square is the eigenvalue of the associated embedding operator;
those eigenvalues drive sampling densities and error diagnostics downstream.

All types are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "IndexSet",
    "hyperbolic_cross",
    "hyperbolic_cross_product",
    "mixed_weight",
    "embedding_eigenvalues",
    "select_largest_eigenvalues",
    "index_set_difference",
]

#: Refuse to enumerate crosses larger than this unless the caller raises the cap.
DEFAULT_SIZE_CAP = 10_000_000


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _lex_order(freqs: np.ndarray) -> np.ndarray:
    """Deterministic lexicographic row order (first component most significant)."""
    if len(freqs) == 0:
        return freqs
    return freqs[np.lexsort(freqs.T[::-1])]


@dataclass(frozen=True, eq=False)
class IndexSet:
    """An ordered, duplicate-free set of d-dimensional integer frequencies.

    Frequencies are kept in lexicographic order so that coefficient vectors
    indexed by an ``IndexSet`` are reproducible across runs.

    Parameters
    ----------
    dimension:
        Spatial dimension d >= 1.
    frequencies:
        Integer array of shape (n, d); rows are the frequency vectors.
    provenance:
        Either ``"explicit"`` or ``"hyperbolic_cross"``.
    gamma, radius:
        Shape parameter and radius when ``provenance == "hyperbolic_cross"``.
    """

    dimension: int
    frequencies: np.ndarray
    provenance: str = "explicit"
    gamma: float | None = None
    radius: float | None = None

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        freqs = np.asarray(self.frequencies, dtype=np.int64)
        if freqs.ndim != 2 or freqs.shape[1] != self.dimension:
            raise ValueError(
                f"frequencies must have shape (n, {self.dimension}), got {freqs.shape}"
            )
        freqs = _lex_order(freqs)
        if len(freqs) > 1 and np.any(np.all(freqs[1:] == freqs[:-1], axis=1)):
            raise ValueError("duplicate frequency vectors are not allowed")
        object.__setattr__(self, "frequencies", _frozen(freqs))

    def __len__(self) -> int:
        return self.frequencies.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IndexSet)
            and self.dimension == other.dimension
            and np.array_equal(self.frequencies, other.frequencies)
        )

    def __contains__(self, k) -> bool:
        k = np.asarray(k, dtype=np.int64)
        if k.shape != (self.dimension,):
            return False
        lo = np.searchsorted(self._keys(), _row_key(k[None, :], self._span())[0])
        return lo < len(self) and bool(np.all(self.frequencies[lo] == k))

    # Packed scalar keys for O(log n) membership lookups.  Cached lazily; the
    # cache is an implementation detail and does not affect equality.
    _key_cache: dict = field(
        default_factory=dict, repr=False, compare=False, init=False)

    def _span(self) -> int:
        cache = self._key_cache
        if "span" not in cache:
            if len(self) == 0:
                cache["span"] = 1
            else:
                cache["span"] = int(np.abs(self.frequencies).max()) * 2 + 2
        return cache["span"]

    def _keys(self) -> np.ndarray:
        cache = self._key_cache
        if "keys" not in cache:
            cache["keys"] = _row_key(self.frequencies, self._span())
        return cache["keys"]

    def to_text(self) -> str:
        """Serialize to the line-oriented text format (bit-exact round trip)."""
        lines = [f"d={self.dimension} count={len(self)}"]
        lines.extend(" ".join(str(int(c)) for c in row) for row in self.frequencies)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "IndexSet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split()
        d = int(header[0].split("=")[1])
        count = int(header[1].split("=")[1])
        rows = [[int(tok) for tok in ln.split()] for ln in lines[1 : 1 + count]]
        if len(rows) != count:
            raise ValueError(f"expected {count} frequency rows, found {len(rows)}")
        freqs = np.array(rows, dtype=np.int64).reshape(count, d)
        return cls(dimension=d, frequencies=freqs)

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "IndexSet":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_text(fh.read())


def _row_key(rows: np.ndarray, span: int) -> np.ndarray:
    """Collision-free int128-ish packing of small integer rows (object dtype)."""
    key = np.zeros(len(rows), dtype=object)
    for j in range(rows.shape[1]):
        key = key * span + (rows[:, j].astype(object) + span // 2)
    return key


def _check_smoothness(s: float) -> float:
    s = float(s)
    if not np.isfinite(s) or s <= 0.5:
        raise ValueError(f"smoothness order must satisfy s > 1/2, got {s}")
    return s


def hyperbolic_cross_product(k, gamma: float) -> float:
    """The membership product ``prod_j max(1, |k_j|/gamma)`` for one frequency.

    This function is the single source of truth for membership decisions; the
    enumerator in :func:`hyperbolic_cross` accumulates factors in exactly the
    same coordinate order, so both always agree, including at the boundary
    (equality counts as inside).
    """
    p = 1.0
    for kj in np.asarray(k, dtype=np.int64):
        p *= max(1.0, abs(float(kj)) / gamma)
    return p


def hyperbolic_cross(
    d: int, gamma: float, R: float, size_cap: int = DEFAULT_SIZE_CAP
) -> IndexSet:
    """Enumerate the hyperbolic cross ``{k : prod_j max(1, |k_j|/gamma) <= R}``.

    Uses a recursive coordinate-wise descent with a running product budget, so
    the full bounding box is never materialized.  Every returned frequency
    satisfies ``|k_j| <= gamma * R`` componentwise.

    Parameters
    ----------
    d:
        Dimension, >= 1.
    gamma:
        Shape parameter, > 0.
    R:
        Radius, > 1.  Membership is non-strict: a product equal to R is inside.
    size_cap:
        Resource guard; enumeration aborts once the set would exceed this size.

    Returns
    -------
    IndexSet
        Lexicographically ordered cross with provenance metadata.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    gamma = float(gamma)
    R = float(R)
    if not np.isfinite(gamma) or gamma <= 0:
        raise ValueError(f"gamma must be a finite positive real, got {gamma}")
    if not np.isfinite(R) or R <= 1:
        raise ValueError(f"R must be a finite real > 1, got {R}")

    out: list[np.ndarray] = []
    k = np.zeros(d, dtype=np.int64)

    def descend(j: int, partial: float) -> None:
        if j == d:
            out.append(k.copy())
            if len(out) > size_cap:
                raise ValueError(
                    f"hyperbolic cross (d={d}, gamma={gamma}, R={R}) exceeds "
                    f"the size cap of {size_cap} frequencies"
                )
            return
        # Range bound with a whisker of slack; the exact product test decides.
        kmax = int(np.floor(gamma * (R / partial) * (1.0 + 1e-12)))
        for kj in range(-kmax, kmax + 1):
            nxt = partial * max(1.0, abs(kj) / gamma)
            if nxt <= R:
                k[j] = kj
                descend(j + 1, nxt)
        k[j] = 0

    descend(0, 1.0)
    freqs = np.array(out, dtype=np.int64).reshape(len(out), d)
    return IndexSet(
        dimension=d,
        frequencies=freqs,
        provenance="hyperbolic_cross",
        gamma=gamma,
        radius=R,
    )


def mixed_weight(freqs, s: float) -> np.ndarray | float:
    """Product weight ``prod_j (1 + (2*pi*|k_j|)^(2s))^(1/2)``, always >= 1.

    Accepts a single frequency vector of shape (d,) or a stack of shape (n, d);
    returns a scalar or an array of length n accordingly.
    """
    s = _check_smoothness(s)
    k = np.asarray(freqs, dtype=np.int64)
    single = k.ndim == 1
    k = np.atleast_2d(k)
    w = np.sqrt(np.prod(1.0 + (2.0 * np.pi * np.abs(k)) ** (2.0 * s), axis=1))
    return float(w[0]) if single else w


def embedding_eigenvalues(freqs, s: float) -> np.ndarray | float:
    """Eigenvalues ``lambda_k = mixed_weight(k, s)**(-2)`` in (0, 1].

    Monotone non-increasing in every ``|k_j|``; decays fast enough to be
    summable over Z^d for any s > 1/2 (finite trace).
    """
    w = mixed_weight(freqs, s)
    return 1.0 / (w * w)


def select_largest_eigenvalues(parent: IndexSet, m: int, s: float) -> IndexSet:
    """The m frequencies of ``parent`` with largest eigenvalues.

    Ties are broken by the parent's deterministic lexicographic order (stable
    sort on the eigenvalues, which are already aligned with that order).
    """
    if m > len(parent):
        raise ValueError(f"m={m} exceeds the parent set size {len(parent)}")
    lam = np.atleast_1d(embedding_eigenvalues(parent.frequencies, s))
    # stable sort on -lambda keeps lexicographic order within ties
    order = np.argsort(-lam, kind="stable")[:m]
    return IndexSet(dimension=parent.dimension, frequencies=parent.frequencies[order])


def index_set_difference(superset: IndexSet, subset: IndexSet) -> np.ndarray:
    """Rows of ``superset`` not contained in ``subset``.

    Raises if ``subset`` is not fully contained in ``superset`` (the callers
    use this for tail sets ``I_MZ \\ I`` where containment is a precondition).
    """
    if superset.dimension != subset.dimension:
        raise ValueError("dimension mismatch between index sets")
    span = max(superset._span(), subset._span())
    sup_keys = _row_key(superset.frequencies, span)
    sub_keys = _row_key(subset.frequencies, span)
    member = np.isin(sup_keys, sub_keys)
    if member.sum() != len(subset):
        raise ValueError("subset is not contained in superset")
    return superset.frequencies[~member]
