"""Rank-1 lattices, reconstructing-property checks, and generator search.

A rank-1 lattice is the point set ``{(i*z mod M)/M : i = 0..M-1}`` in
``[0,1)^d`` for a generating vector ``z`` and size ``M``.  It *reconstructs*
a frequency set I when ``k -> <k, z> mod M`` is injective on I, which makes
the exponentials with frequencies in I exactly orthonormal under the discrete
inner product with uniform weights 1/M (exact quadrature, tight frame).

Residue arithmetic is exact: a vectorized int64 path is used while all
intermediate products provably fit, with a Python big-integer fallback for
very large M.  Nothing is ever allowed to wrap silently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np
from sympy import nextprime

from .index_sets import IndexSet

if TYPE_CHECKING:  # pragma: no cover
    from .mz import SpectralBounds

__all__ = [
    "Rank1Lattice",
    "SamplePlan",
    "lattice_points",
    "residues",
    "is_reconstructing",
    "search_generator",
    "GeneratorSearchError",
]

# int64 is safe while (M-1)^2 + d*(M-1) < 2^63; this is a comfortable cutoff.
_INT64_SAFE_M = 2**31


class GeneratorSearchError(RuntimeError):
    """No reconstructing generating vector found within the search budget."""


@dataclass(frozen=True, eq=False)
class Rank1Lattice:
    """Rank-1 lattice with generator ``z`` (reduced mod M) and size ``M``."""

    dimension: int
    generator: np.ndarray
    size: int

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Rank1Lattice)
            and self.dimension == other.dimension
            and self.size == other.size
            and np.array_equal(self.generator, other.generator)
        )

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"lattice size must be >= 1, got {self.size}")
        z = np.asarray(self.generator, dtype=np.int64) % self.size
        if z.shape != (self.dimension,):
            raise ValueError(
                f"generator must have shape ({self.dimension},), got {z.shape}"
            )
        z.flags.writeable = False
        object.__setattr__(self, "generator", z)
        object.__setattr__(self, "size", int(self.size))

    def points(self, rows: np.ndarray | None = None) -> np.ndarray:
        """Lattice points ``(i*z mod M)/M`` for all i, or the given row indices."""
        i = np.arange(self.size, dtype=np.int64) if rows is None else np.asarray(rows)
        return (i[:, None] * self.generator[None, :] % self.size) / self.size

    def to_line(self) -> str:
        """Single-line file format ``d M z_1 ... z_d``."""
        return " ".join(
            [str(self.dimension), str(self.size)]
            + [str(int(c)) for c in self.generator]
        )

    @classmethod
    def from_line(cls, line: str) -> "Rank1Lattice":
        tok = line.split()
        d, M = int(tok[0]), int(tok[1])
        z = np.array([int(t) for t in tok[2 : 2 + d]], dtype=np.int64)
        if len(z) != d:
            raise ValueError("lattice line has fewer generator entries than d")
        return cls(dimension=d, generator=z, size=M)

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_line() + "\n")

    @classmethod
    def load(cls, path) -> "Rank1Lattice":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_line(fh.readline())


@dataclass(frozen=True, eq=False)
class SamplePlan:
    """A point set with nonnegative weights, optionally tied to a lattice.

    ``lattice``/``lattice_rows`` record that the points are (a subset of) a
    rank-1 lattice, which unlocks FFT-based operators and Gram assembly
    downstream; they carry no information beyond ``points`` itself.
    """

    points: np.ndarray
    weights: np.ndarray
    stable_for: IndexSet | None = None
    bounds: "SpectralBounds | None" = None
    lattice: Rank1Lattice | None = None
    lattice_rows: np.ndarray | None = None

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (pts.shape[0],):
            raise ValueError(
                f"got {pts.shape[0]} points but {w.shape} weights"
            )
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("points and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if self.lattice_rows is not None:
            rows = np.asarray(self.lattice_rows, dtype=np.int64)
            rows.flags.writeable = False
            object.__setattr__(self, "lattice_rows", rows)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def to_csv(self) -> str:
        d = self.dimension
        header = ",".join([f"x_{j + 1}" for j in range(d)] + ["weight"])
        lines = [header]
        for p, w in zip(self.points, self.weights):
            lines.append(
                ",".join(format(v, ".17g") for v in p) + "," + format(w, ".17g")
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "SamplePlan":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        d = len(lines[0].split(",")) - 1
        rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
        arr = np.array(rows, dtype=np.float64).reshape(len(rows), d + 1)
        return cls(points=arr[:, :d], weights=arr[:, d])


def lattice_points(
    lat: Rank1Lattice, stable_for: IndexSet | None = None
) -> SamplePlan:
    """All M lattice points with uniform quadrature weights 1/M (summing to 1)."""
    M = lat.size
    return SamplePlan(
        points=lat.points(),
        weights=np.full(M, 1.0 / M),
        stable_for=stable_for,
        lattice=lat,
        lattice_rows=None,
    )


def residues(lat: Rank1Lattice, freqs: np.ndarray) -> np.ndarray:
    """Exact residues ``<k, z> mod M`` for every frequency row of ``freqs``."""
    K = np.asarray(freqs, dtype=np.int64)
    if K.ndim != 2 or K.shape[1] != lat.dimension:
        raise ValueError(
            f"frequencies must have shape (n, {lat.dimension}), got {K.shape}"
        )
    M = lat.size
    z = lat.generator
    if M <= _INT64_SAFE_M:
        # (k mod M) * z_j <= (M-1)^2 < 2^62; reduce each term before the sum.
        r = np.zeros(len(K), dtype=np.int64)
        for j in range(lat.dimension):
            r = (r + (K[:, j] % M) * z[j] % M) % M
        return r
    # exact big-integer fallback for very large M
    acc = [0] * len(K)
    for j in range(lat.dimension):
        zj = int(z[j])
        col = K[:, j]
        for i in range(len(K)):
            acc[i] = (acc[i] + int(col[i]) * zj) % M
    return np.array(acc, dtype=np.int64 if M <= 2**62 else object)


def is_reconstructing(lat: Rank1Lattice, index_set: IndexSet) -> bool:
    """Whether ``k -> <k, z> mod M`` is injective on the index set.

    Equivalent to the character sums ``(1/M) sum_i exp(2*pi*i*<k-l, x^i>)``
    being exactly the Kronecker delta on the set, i.e. exact quadrature with
    constant 1; decided here in exact integer arithmetic.
    """
    if len(index_set) == 0:
        raise ValueError("index set must be nonempty")
    if index_set.dimension != lat.dimension:
        raise ValueError("dimension mismatch between lattice and index set")
    if lat.size < len(index_set):
        return False  # pigeonhole
    r = residues(lat, index_set.frequencies)
    return len(np.unique(r)) == len(index_set)


def _prefix_structure(K: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-coordinate (parent pointers, last column) over unique prefixes.

    Stage j works on the distinct projections of the frequency set onto the
    first j coordinates; ``parents`` maps each stage-j prefix to its stage-j-1
    prefix so residues can be extended incrementally.
    """
    d = K.shape[1]
    structure: list[tuple[np.ndarray, np.ndarray]] = []
    prev_unique: np.ndarray | None = None
    for j in range(1, d + 1):
        unique_j = np.unique(K[:, :j], axis=0)
        if j == 1:
            parents = np.zeros(len(unique_j), dtype=np.int64)
        else:
            prev_check, parents = np.unique(
                unique_j[:, : j - 1], axis=0, return_inverse=True
            )
            assert np.array_equal(prev_check, prev_unique)
            parents = parents.astype(np.int64)
        structure.append((parents, unique_j[:, j - 1].copy()))
        prev_unique = unique_j
    return structure


def _default_schedule(start: int, ceiling: int) -> Iterable[int]:
    M = int(nextprime(start - 1))
    while M <= ceiling:
        yield M
        M = int(nextprime(2 * M))


def search_generator(
    index_set: IndexSet,
    rng_seed: int,
    m_schedule: Iterable[int] | None = None,
    *,
    m_ceiling: int = 2**40,
    attempts_per_m: int = 3,
    candidates_per_component: int = 24,
) -> Rank1Lattice:
    """Find a reconstructing rank-1 lattice for ``index_set``.

    Component-by-component construction with random candidate components:
    for each lattice size M from the schedule, the generator is built one
    coordinate at a time, testing injectivity of ``k -> <k, z> mod M`` on the
    projected frequency set after each coordinate.  The default schedule
    doubles M through primes starting from the next prime >= 2*|I|.  The
    whole search is deterministic given ``rng_seed``.

    Raises
    ------
    GeneratorSearchError
        If no generator is found before the schedule is exhausted.
    """
    m = len(index_set)
    if m < 1:
        raise ValueError("index set must be nonempty")
    d = index_set.dimension
    if m == 1:
        return Rank1Lattice(dimension=d, generator=np.zeros(d, dtype=np.int64), size=1)

    K = index_set.frequencies
    structure = _prefix_structure(K)
    if m_schedule is None:
        m_schedule = _default_schedule(max(2 * m, 2), m_ceiling)

    tried = []
    for M in m_schedule:
        if M > m_ceiling:
            break
        if M > _INT64_SAFE_M:
            raise GeneratorSearchError(
                f"schedule reached M={M} beyond the vectorized search range"
            )
        tried.append(M)
        for attempt in range(attempts_per_m):
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence([rng_seed, M, attempt]))
            )
            z = np.zeros(d, dtype=np.int64)
            r = np.zeros(1, dtype=np.int64)
            complete = True
            for j in range(d):
                parents, lastcol = structure[j]
                kred = lastcol % M
                placed = False
                for _ in range(candidates_per_component):
                    cand = int(rng.integers(1, M)) if M > 1 else 0
                    r_new = (r[parents] + kred * cand % M) % M
                    if len(np.unique(r_new)) == len(r_new):
                        z[j] = cand
                        r = r_new
                        placed = True
                        break
                if not placed:
                    complete = False
                    break
            if complete:
                return Rank1Lattice(dimension=d, generator=z, size=M)

    raise GeneratorSearchError(
        f"no reconstructing generator for |I|={m} (d={d}) within the budget; "
        f"tried M in {tried[:3]}...{tried[-1:] if tried else []} "
        f"({len(tried)} sizes, {attempts_per_m} attempts each)"
    )


def oversampling_factor(lat: Rank1Lattice, index_set: IndexSet) -> float:
    """Ratio M / |I|, reported for diagnostics (no bound is enforced)."""
    return lat.size / len(index_set)
