"""Optimal cache placement via closed-form candidates.

The optimal placement partitions files into at most three groups (most /
moderately / non-popular), each group sharing one placement row with at
most two nonzero entries.  Every admissible group structure has a closed
form in the parameters (n_o, n_1, l_o, l_1); the global optimum is the
minimum-rate candidate over all of them:

  * extended two-group with an uncached tail (``algorithm1``): files
    1..n_o get the symmetric placement of an n_o-file system, the rest
    stay at the server; n_o = N is the one-group case;
  * two groups where the tail is partly cached (``algorithm2``): either
    both groups use the same subset size l_o (case 2.i) or the first
    group adds a second size l_1 (case 2.ii);
  * three groups (``algorithm3``): the two-group solution on the first
    n_1 files with every formula's N replaced by n_1, plus an uncached
    third group.

``algorithm4`` reduces the three searches to the final optimum.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleCaseError, InvalidParameterError
from .placement import (
    PlacementMatrix,
    RateCoefficients,
    analyze_groups,
    binom_ext,
    rate_coefficients,
)
from .popularity import PopularityModel, order_stats

#: Rates closer than this are treated as tied; ties prefer fewer groups,
#: then the lexicographically smallest (n_o, n_1, l_o, l_1).
TIE_TOL = 1e-12
#: Entries this close to a degenerate boundary make a candidate collapse
#: into a simpler structure; such tuples are skipped, not clamped.
STRICT_TOL = 1e-12

_ABSENT = 10**9  # stands in for an absent tuple entry when comparing


class PlacementCase(str, enum.Enum):
    ONE_GROUP = "one_group"
    TWO_GROUP_ZERO_TAIL = "two_group_zero_tail"
    TWO_GROUP_CASE2I = "two_group_case2i"
    TWO_GROUP_CASE2II = "two_group_case2ii"
    THREE_GROUP_CASE1 = "three_group_case1"
    THREE_GROUP_CASE2 = "three_group_case2"


_NOMINAL_GROUPS = {
    PlacementCase.ONE_GROUP: 1,
    PlacementCase.TWO_GROUP_ZERO_TAIL: 2,
    PlacementCase.TWO_GROUP_CASE2I: 2,
    PlacementCase.TWO_GROUP_CASE2II: 2,
    PlacementCase.THREE_GROUP_CASE1: 3,
    PlacementCase.THREE_GROUP_CASE2: 3,
}


@dataclass(frozen=True)
class CandidateSolution:
    """A placement candidate with its generating tuple and average rate."""

    placement: PlacementMatrix
    rate: float
    case_id: PlacementCase
    n_o: int | None = None
    n_1: int | None = None
    l_o: int | None = None
    l_1: int | None = None

    @property
    def groups(self) -> int:
        return analyze_groups(self.placement).group_count

    @property
    def first_group_size(self) -> int:
        """n_o, with the one-group case counting all N files."""
        return self.n_o if self.n_o is not None else self.placement.n_files

    def to_json_dict(self) -> dict:
        return {
            "case": self.case_id.value,
            "n_o": self.n_o,
            "n_1": self.n_1,
            "l_o": self.l_o,
            "l_1": self.l_1,
            "rate": self.rate,
            "groups": self.groups,
            "placement": self.placement.to_json_dict(),
        }


# ---------------------------------------------------------------------------
# Closed-form row constructors


def _one_group_row(n_eff: int, k: int, m: float) -> np.ndarray:
    """Symmetric placement row for an n_eff-file system with cache m.

    With v = K*m/n_eff the row has (at most) two adjacent nonzero entries
    at floor(v) and floor(v)+1; integral v collapses to one entry.
    """
    if not 0.0 <= m <= n_eff:
        raise InvalidParameterError(f"cache size {m!r} outside [0, {n_eff}]")
    v = k * m / n_eff
    lo = min(int(math.floor(v)), k)
    row = np.zeros(k + 1)
    row[lo] = (1.0 + lo - v) / binom_ext(k, lo)
    if lo < k and v > lo:
        row[lo + 1] = (v - lo) / binom_ext(k, lo + 1)
    return row


def _case2i_rows(n_eff: int, k: int, m: float, n_o: int, l_o: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows of the two groups when both share the single subset size l_o."""
    if not 1 <= n_o <= n_eff - 1:
        raise InvalidParameterError(f"n_o={n_o} outside 1..{n_eff - 1}")
    km = k * m
    lo_min = int(math.floor(km / n_eff)) + 1
    lo_max = min(k, int(math.ceil(km / n_o)) - 1)
    if not lo_min <= l_o <= lo_max:
        raise InfeasibleCaseError(
            f"l_o={l_o} outside the validity window [{lo_min}, {lo_max}]"
        )
    ratio = km / (l_o * n_eff)  # fraction of each file the first group caches
    share = n_o / n_eff
    frac = (ratio - share) / (1.0 - share)
    if not STRICT_TOL < frac < 1.0 - STRICT_TOL:
        raise InfeasibleCaseError("second-group entry degenerates to 0 or to the first group")
    row1 = np.zeros(k + 1)
    row1[l_o] = 1.0 / binom_ext(k, l_o)
    row2 = np.zeros(k + 1)
    row2[l_o] = frac / binom_ext(k, l_o)
    row2[0] = (1.0 - ratio) / (1.0 - share)
    return row1, row2


def _case2ii_rows(
    n_eff: int, k: int, m: float, n_o: int, l_o: int, l_1: int
) -> tuple[np.ndarray, np.ndarray]:
    """Rows of the two groups when the first group adds a second size l_1."""
    if not 1 <= n_o <= n_eff - 1:
        raise InvalidParameterError(f"n_o={n_o} outside 1..{n_eff - 1}")
    if l_1 == l_o or not (1 <= l_o <= k and 1 <= l_1 <= k):
        raise InfeasibleCaseError("need distinct cache-subgroup sizes l_o != l_1 in 1..K")
    km = k * m
    c1 = l_o > km / n_eff and l_1 < km / n_o
    c2 = l_o < km / n_eff and l_1 > km / n_o
    if not (c1 or c2):
        raise InfeasibleCaseError("(l_o, l_1) satisfies neither admissibility condition")
    q = l_1 * n_o / (l_o * n_eff)
    denom = 1.0 - q
    if abs(denom) < STRICT_TOL:
        raise InfeasibleCaseError("l_1 * n_o == l_o * n_eff (singular tuple)")
    ratio = km / (l_o * n_eff)
    a_lo = (ratio - q) / denom / binom_ext(k, l_o)
    a_l1 = (1.0 - ratio) / denom / binom_ext(k, l_1)
    a_0 = (1.0 - ratio) / denom
    if min(a_lo, a_l1, a_0) <= STRICT_TOL:
        raise InfeasibleCaseError("a nominally positive entry is nonpositive")
    row1 = np.zeros(k + 1)
    row1[l_o] = a_lo
    row1[l_1] = a_l1
    row2 = np.zeros(k + 1)
    row2[l_o] = a_lo
    row2[0] = a_0
    return row1, row2


def _build_matrix(
    n: int, k: int, row1: np.ndarray, n_o: int, row2: np.ndarray | None, n_eff: int
) -> PlacementMatrix:
    """Stack group rows: row1 for files 1..n_o, row2 up to n_eff, server-only after."""
    a = np.zeros((n, k + 1))
    a[:n_o] = row1
    if row2 is not None:
        a[n_o:n_eff] = row2
    a[n_eff:, 0] = 1.0
    return PlacementMatrix(n, k, a)


def one_group_placement(n_files: int, k_users: int, cache: float) -> PlacementMatrix:
    """Identical rows for all files (the uniform-popularity optimum)."""
    row = _one_group_row(n_files, k_users, cache)
    return _build_matrix(n_files, k_users, row, n_files, None, n_files)


def case2i_placement(
    n_files: int, k_users: int, cache: float, n_o: int, l_o: int
) -> PlacementMatrix:
    """Two-group placement with a shared subset size (case 2.i)."""
    row1, row2 = _case2i_rows(n_files, k_users, cache, n_o, l_o)
    return _build_matrix(n_files, k_users, row1, n_o, row2, n_files)


def case2ii_placement(
    n_files: int, k_users: int, cache: float, n_o: int, l_o: int, l_1: int
) -> PlacementMatrix:
    """Two-group placement with an extra subset size in the first group (case 2.ii)."""
    row1, row2 = _case2ii_rows(n_files, k_users, cache, n_o, l_o, l_1)
    return _build_matrix(n_files, k_users, row1, n_o, row2, n_files)


# ---------------------------------------------------------------------------
# Candidate search


@dataclass
class _Entry:
    rate: float
    key: tuple
    case_id: PlacementCase
    n_o: int | None
    n_1: int | None
    l_o: int | None
    l_1: int | None
    row1: np.ndarray
    row2: np.ndarray | None
    n_eff: int


class _Best:
    """Minimum-rate reduction with the documented deterministic tie-break."""

    def __init__(self):
        self.entry: _Entry | None = None

    def offer(self, entry: _Entry) -> None:
        cur = self.entry
        if cur is None or entry.rate < cur.rate - TIE_TOL:
            self.entry = entry
        elif entry.rate <= cur.rate + TIE_TOL and entry.key < cur.key:
            self.entry = entry


def _key(case_id, n_o=None, n_1=None, l_o=None, l_1=None) -> tuple:
    absent = _ABSENT
    return (
        _NOMINAL_GROUPS[case_id],
        n_o if n_o is not None else absent,
        n_1 if n_1 is not None else absent,
        l_o if l_o is not None else absent,
        l_1 if l_1 is not None else absent,
    )


class _Search:
    def __init__(self, model: PopularityModel, k_users: int, cache: float, coeffs: RateCoefficients):
        self.model = model
        self.k = k_users
        self.m = cache
        self.coeffs = coeffs
        n = model.n_files
        # gpref[i] = sum of the first i coefficient rows; candidate rates are
        # group-row dot products against prefix differences.
        self.gpref = np.zeros((n + 1, k_users + 1))
        np.cumsum(coeffs.g, axis=0, out=self.gpref[1:])

    def rate(self, row1, n_o, row2, n_eff) -> float:
        n = self.model.n_files
        value = float(np.dot(self.gpref[n_o], row1))
        if row2 is not None:
            value += float(np.dot(self.gpref[n_eff] - self.gpref[n_o], row2))
        value += float(self.gpref[n, 0] - self.gpref[n_eff, 0])
        return value

    def materialize(self, entry: _Entry) -> CandidateSolution:
        assert entry.n_o is not None
        placement = _build_matrix(
            self.model.n_files, self.k, entry.row1, entry.n_o, entry.row2, entry.n_eff
        )
        return CandidateSolution(
            placement, entry.rate, entry.case_id, entry.n_o, entry.n_1, entry.l_o, entry.l_1
        )

    def _skip_boundary(self, probs, boundary: int, prune: bool) -> bool:
        """Equal-popularity pruning: group borders only where popularity drops."""
        return prune and probs[boundary - 1] == probs[boundary]

    def search_zero_tail(self, prune: bool) -> _Entry | None:
        """Extended two-group family: cached head, server-only tail (n_o = N: one group)."""
        n, probs = self.model.n_files, self.model.probs
        best = _Best()
        for n_o in range(1, n + 1):
            if self.m > n_o:
                continue  # cache cannot exceed the cached-group size
            if n_o < n and self._skip_boundary(probs, n_o, prune):
                continue
            row1 = _one_group_row(n_o, self.k, self.m)
            case = PlacementCase.ONE_GROUP if n_o == n else PlacementCase.TWO_GROUP_ZERO_TAIL
            l_o = min(int(math.floor(self.k * self.m / n_o)), self.k)
            best.offer(
                _Entry(
                    self.rate(row1, n_o, None, n_o),
                    _key(case, n_o=n_o, l_o=l_o),
                    case,
                    n_o,
                    None,
                    l_o,
                    None,
                    row1,
                    None,
                    n_o,
                )
            )
        return best.entry

    def search_two_group(self, n_eff: int, prune: bool, n_1: int | None = None) -> _Entry | None:
        """Partly-cached-tail family over the first n_eff files.

        With n_eff < N this is the inner search of the three-group family:
        all closed forms use n_eff in place of N and files beyond n_eff
        form the server-only third group.
        """
        k, m, probs = self.k, self.m, self.model.probs
        three = n_1 is not None
        case_i = PlacementCase.THREE_GROUP_CASE1 if three else PlacementCase.TWO_GROUP_CASE2I
        case_ii = PlacementCase.THREE_GROUP_CASE2 if three else PlacementCase.TWO_GROUP_CASE2II
        km = k * m
        best = _Best()

        def offer(case, n_o, l_o, l_1, rows):
            row1, row2 = rows
            best.offer(
                _Entry(
                    self.rate(row1, n_o, row2, n_eff),
                    _key(case, n_o=n_o, n_1=n_1, l_o=l_o, l_1=l_1),
                    case,
                    n_o,
                    n_1,
                    l_o,
                    l_1,
                    row1,
                    row2,
                    n_eff,
                )
            )

        for n_o in range(1, n_eff):
            if self._skip_boundary(probs, n_o, prune):
                continue
            lo_floor = int(math.floor(km / n_eff))
            l1_cap = min(k, int(math.ceil(km / n_o)) - 1)
            for l_o in range(lo_floor + 1, l1_cap + 1):
                try:
                    offer(case_i, n_o, l_o, None, _case2i_rows(n_eff, k, m, n_o, l_o))
                except InfeasibleCaseError:
                    continue
            for l_o in range(lo_floor + 1, k + 1):
                for l_1 in range(1, l1_cap + 1):
                    if l_1 == l_o:
                        continue
                    try:
                        offer(case_ii, n_o, l_o, l_1, _case2ii_rows(n_eff, k, m, n_o, l_o, l_1))
                    except InfeasibleCaseError:
                        continue
            for l_o in range(1, lo_floor + 1):
                for l_1 in range(int(math.ceil(km / n_o)), k + 1):
                    if l_1 == l_o:
                        continue
                    try:
                        offer(case_ii, n_o, l_o, l_1, _case2ii_rows(n_eff, k, m, n_o, l_o, l_1))
                    except InfeasibleCaseError:
                        continue
        return best.entry


def _make_search(model, k_users, cache, coeffs=None) -> _Search:
    if coeffs is None:
        coeffs = rate_coefficients(model, order_stats(model, k_users))
    return _Search(model, k_users, cache, coeffs)


def _check_cache(model, cache) -> None:
    if not 0.0 <= cache <= model.n_files:
        raise InvalidParameterError(f"cache size {cache!r} outside [0, {model.n_files}]")


def algorithm1(
    model: PopularityModel,
    k_users: int,
    cache: float,
    *,
    coeffs: RateCoefficients | None = None,
    prune_equal_popularity: bool = False,
) -> CandidateSolution:
    """Best candidate of the zero-tail family (one group included as n_o = N)."""
    _check_cache(model, cache)
    search = _make_search(model, k_users, cache, coeffs)
    entry = search.search_zero_tail(prune_equal_popularity)
    if entry is None:
        raise InvalidParameterError("no feasible head size: cache exceeds every group size")
    return search.materialize(entry)


def algorithm2(
    model: PopularityModel,
    k_users: int,
    cache: float,
    *,
    coeffs: RateCoefficients | None = None,
    prune_equal_popularity: bool = False,
) -> CandidateSolution | None:
    """Best strict two-group candidate with a partly cached tail, or None."""
    _check_cache(model, cache)
    search = _make_search(model, k_users, cache, coeffs)
    entry = search.search_two_group(model.n_files, prune_equal_popularity)
    return search.materialize(entry) if entry is not None else None


def algorithm3(
    model: PopularityModel,
    k_users: int,
    cache: float,
    *,
    coeffs: RateCoefficients | None = None,
    prune_equal_popularity: bool = False,
) -> CandidateSolution | None:
    """Best three-group candidate, or None when the n_1 range is empty.

    The cached groups must jointly hold at least the cache worth of
    files, so n_1 starts at max(2, floor(M) + 1).
    """
    _check_cache(model, cache)
    search = _make_search(model, k_users, cache, coeffs)
    best = _Best()
    prune = prune_equal_popularity
    for n_1 in range(max(2, int(math.floor(cache)) + 1), model.n_files):
        if prune and model.probs[n_1 - 1] == model.probs[n_1]:
            continue
        entry = search.search_two_group(n_1, prune, n_1=n_1)
        if entry is not None:
            best.offer(entry)
    return search.materialize(best.entry) if best.entry is not None else None


def algorithm4(
    model: PopularityModel,
    k_users: int,
    cache: float,
    *,
    coeffs: RateCoefficients | None = None,
    prune_equal_popularity: bool = False,
) -> CandidateSolution:
    """Global optimum: minimum-rate candidate over all three families."""
    _check_cache(model, cache)
    if coeffs is None:
        coeffs = rate_coefficients(model, order_stats(model, k_users))
    search = _Search(model, k_users, cache, coeffs)
    if cache == 0.0 or cache == float(model.n_files):
        row = _one_group_row(model.n_files, k_users, cache)
        n = model.n_files
        l_o = 0 if cache == 0.0 else k_users
        entry = _Entry(
            search.rate(row, n, None, n),
            _key(PlacementCase.ONE_GROUP, n_o=n, l_o=l_o),
            PlacementCase.ONE_GROUP,
            n,
            None,
            l_o,
            None,
            row,
            None,
            n,
        )
        return search.materialize(entry)
    prune = prune_equal_popularity
    best = _Best()
    zero_tail = search.search_zero_tail(prune)
    if zero_tail is None:
        raise InvalidParameterError("no feasible candidate; check cache size")
    best.offer(zero_tail)
    two = search.search_two_group(model.n_files, prune)
    if two is not None:
        best.offer(two)
    for n_1 in range(max(2, int(math.floor(cache)) + 1), model.n_files):
        if prune and model.probs[n_1 - 1] == model.probs[n_1]:
            continue
        entry = search.search_two_group(n_1, prune, n_1=n_1)
        if entry is not None:
            best.offer(entry)
    return search.materialize(best.entry)
