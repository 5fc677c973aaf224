"""Bit-exact realization of placement and coded delivery.

Files are bit strings handled as Python integers with LSB-first packing:
bit i of a file is ``(data[i // 8] >> (i % 8)) & 1`` of its byte form.
Each file is sliced left-to-right into one subfile per user subset, in the
fixed global order "subset size ascending, then bitmask ascending" (bit
k-1 of a mask stands for user k).  Delivery XORs, per nonempty subset S,
the subfiles its members miss; shorter operands are implicitly zero-padded
at the tail, so a message is as long as its largest operand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DecodeError, InvalidFileSizeError, InvalidParameterError
from .placement import ZERO_TOL, PlacementMatrix
from .popularity import PopularityModel


def _int_to_bytes(x: int, nbits: int) -> bytes:
    return x.to_bytes((nbits + 7) // 8, "little")


def _bytes_to_int(data: bytes, nbits: int) -> int:
    if len(data) != (nbits + 7) // 8:
        raise InvalidParameterError(f"expected {(nbits + 7) // 8} bytes for {nbits} bits")
    x = int.from_bytes(data, "little")
    if x >> nbits:
        raise InvalidParameterError("bits beyond the declared size must be zero")
    return x


def subset_order(k_users: int) -> list[int]:
    """All user-subset bitmasks, size ascending then mask ascending."""
    return sorted(range(1 << k_users), key=lambda s: (s.bit_count(), s))


@dataclass(frozen=True)
class FileLibrary:
    """N concrete files of exactly ``file_size_bits`` bits each."""

    file_size_bits: int
    contents: tuple[bytes, ...]

    def __post_init__(self):
        if self.file_size_bits < 1:
            raise InvalidParameterError("file size must be at least one bit")
        for data in self.contents:
            _bytes_to_int(data, self.file_size_bits)

    @property
    def n_files(self) -> int:
        return len(self.contents)


def random_library(n_files: int, file_size_bits: int, seed: int) -> FileLibrary:
    """Reproducible random file contents."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    nbytes = (file_size_bits + 7) // 8
    files = []
    for _ in range(n_files):
        raw = bytearray(rng.integers(0, 256, size=nbytes, dtype=np.uint64).astype(np.uint8).tobytes())
        spare = 8 * nbytes - file_size_bits
        if spare:
            raw[-1] &= 0xFF >> spare
        files.append(bytes(raw))
    return FileLibrary(file_size_bits, tuple(files))


def minimal_file_size(placement: PlacementMatrix) -> int:
    """Smallest file size (bits) making every subfile size integral.

    Solver outputs are rationals in floating point; each nonzero entry is
    recovered as an exact fraction and the LCM of denominators is taken.
    """
    denominator = 1
    for value in placement.a.flat:
        if value > ZERO_TOL:
            frac = Fraction(value).limit_denominator(10**9)
            if abs(float(frac) - value) > 1e-12:
                raise InvalidFileSizeError(
                    f"placement entry {value!r} is not recognizably rational"
                )
            denominator = math.lcm(denominator, frac.denominator)
    return denominator


@dataclass(frozen=True)
class PlacementRealization:
    """Concrete subfiles of every file plus the per-user cache contents."""

    placement: PlacementMatrix
    library: FileLibrary
    sizes: np.ndarray  # sizes[n, l] = bits per subfile of file n+1 at subset size l
    subfiles: dict  # (file index 0-based, subset mask) -> bit string as int

    @property
    def k_users(self) -> int:
        return self.placement.k_users

    @property
    def file_size_bits(self) -> int:
        return self.library.file_size_bits

    def subfile(self, file_index0: int, mask: int) -> int:
        return self.subfiles.get((file_index0, mask), 0)

    def cached_bits(self, user: int) -> int:
        """Total bits user k keeps, for checking the cache budget."""
        bit = 1 << (user - 1)
        return sum(
            int(self.sizes[n, mask.bit_count()])
            for (n, mask) in self.subfiles
            if mask & bit
        )


def realize(placement: PlacementMatrix, library: FileLibrary) -> PlacementRealization:
    """Slice every file into its subfiles and fill the user caches."""
    n, k = placement.n_files, placement.k_users
    if library.n_files != n:
        raise InvalidParameterError(f"library has {library.n_files} files, placement {n}")
    f_bits = library.file_size_bits
    scaled = placement.a * f_bits
    sizes = np.rint(scaled).astype(np.int64)
    if np.max(np.abs(scaled - sizes)) > 1e-6:
        raise InvalidFileSizeError(
            f"subfile sizes are not integral at F={f_bits}; "
            f"use a multiple of {minimal_file_size(placement)} bits",
            minimal_size=minimal_file_size(placement),
        )
    counts = np.array([math.comb(k, l) for l in range(k + 1)], dtype=np.int64)
    if np.any(sizes @ counts != f_bits):
        raise InvalidFileSizeError(
            f"rounded subfile sizes do not add up to F={f_bits}; "
            f"use a multiple of {minimal_file_size(placement)} bits",
            minimal_size=minimal_file_size(placement),
        )

    order = subset_order(k)
    subfiles: dict[tuple[int, int], int] = {}
    for idx in range(n):
        bits = _bytes_to_int(library.contents[idx], f_bits)
        offset = 0
        for mask in order:
            size = int(sizes[idx, mask.bit_count()])
            if size:
                subfiles[(idx, mask)] = (bits >> offset) & ((1 << size) - 1)
                offset += size
    return PlacementRealization(placement, library, sizes, subfiles)


@dataclass(frozen=True)
class DeliveryTranscript:
    """Coded messages for one demand: subset mask -> (bits, payload)."""

    demand: tuple[int, ...]
    messages: dict  # mask -> (length_bits, payload int)
    total_bits: int

    def dump(self) -> str:
        """One line per message: "mask,length-bits,hex-payload"."""
        lines = [
            f"{mask},{length},{_int_to_bytes(payload, length).hex()}"
            for mask, (length, payload) in sorted(self.messages.items())
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def _check_demand(demand, n: int, k: int) -> tuple[int, ...]:
    demand = tuple(int(d) for d in demand)
    if len(demand) != k or any(not 1 <= d <= n for d in demand):
        raise InvalidParameterError(f"demand must be {k} file indices in 1..{n}")
    return demand


def serve(realization: PlacementRealization, demand) -> DeliveryTranscript:
    """Multicast one coded message per user subset that needs one."""
    k = realization.k_users
    demand = _check_demand(demand, realization.placement.n_files, k)
    messages = {}
    total = 0
    for mask in range(1, 1 << k):
        level = mask.bit_count() - 1
        length = 0
        payload = 0
        for k0 in range(k):
            bit = 1 << k0
            if mask & bit:
                file_idx = demand[k0] - 1
                length = max(length, int(realization.sizes[file_idx, level]))
                payload ^= realization.subfile(file_idx, mask & ~bit)
        if length:
            messages[mask] = (length, payload)
            total += length
    return DeliveryTranscript(demand, messages, total)


def decode(realization: PlacementRealization, transcript: DeliveryTranscript, user: int) -> bytes:
    """Reconstruct user k's requested file from its cache plus the transcript.

    Raises DecodeError unless the result is bit-exact.
    """
    k = realization.k_users
    if not 1 <= user <= k:
        raise InvalidParameterError(f"user must be in 1..{k}")
    bit = 1 << (user - 1)
    demand = transcript.demand
    file_idx = demand[user - 1] - 1

    result = 0
    offset = 0
    for mask in subset_order(k):
        size = int(realization.sizes[file_idx, mask.bit_count()])
        if size == 0:
            continue
        if mask & bit:
            piece = realization.subfile(file_idx, mask)  # cached locally
        else:
            coded_mask = mask | bit
            entry = transcript.messages.get(coded_mask)
            if entry is None:
                raise DecodeError(f"message for subset {coded_mask:#x} missing")
            piece = entry[1]
            for j in range(k):
                jbit = 1 << j
                if coded_mask & jbit and j != user - 1:
                    piece ^= realization.subfile(demand[j] - 1, coded_mask & ~jbit)
            piece &= (1 << size) - 1  # strip tail padding
        result |= piece << offset
        offset += size

    f_bits = realization.file_size_bits
    expected = _bytes_to_int(realization.library.contents[file_idx], f_bits)
    if offset != f_bits or result != expected:
        raise DecodeError(f"user {user} reconstructed file {file_idx + 1} incorrectly")
    return _int_to_bytes(result, f_bits)


def sample_demands(model: PopularityModel, k_users: int, count: int, seed: int) -> np.ndarray:
    """count x K matrix of 1-based demands, i.i.d. from ``model``.

    Row t consumes the Philox stream keyed by ``seed`` at counter offsets
    t*K .. t*K + K - 1, so trials are independently recomputable.
    """
    cum = np.cumsum(model.probs)
    cum[-1] = 1.0
    rng = np.random.Generator(np.random.Philox(key=seed))
    uniforms = rng.random((count, k_users))
    return np.searchsorted(cum, uniforms, side="right").astype(np.int64) + 1


@dataclass(frozen=True)
class MonteCarloResult:
    mean_rate: float
    std_error: float
    trials: int
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean_rate,
            "stderr": self.std_error,
            "trials": self.trials,
            "seed": self.seed,
        }


def monte_carlo_rate(
    placement: PlacementMatrix, model: PopularityModel, trials: int, seed: int
) -> MonteCarloResult:
    """Estimate the average rate by sampling demands.

    Per-trial rates are computed in the size domain (fractions of the file
    size), which equals total delivered bits / F for any valid realization.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    if model.n_files != placement.n_files:
        raise InvalidParameterError("model and placement disagree on the file count")
    k = placement.k_users
    demands0 = sample_demands(model, k, trials, seed) - 1
    rates = np.zeros(trials)
    for mask in range(1, 1 << k):
        level = mask.bit_count() - 1
        members = [k0 for k0 in range(k) if mask & (1 << k0)]
        largest = placement.a[demands0[:, members[0]], level]
        for k0 in members[1:]:
            np.maximum(largest, placement.a[demands0[:, k0], level], out=largest)
        rates += largest
    mean = float(rates.mean())
    stderr = float(rates.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return MonteCarloResult(mean, stderr, trials, seed)


def per_user_cache_ok(realization: PlacementRealization, cache_size: float) -> bool:
    """Every user's cached bits stay within M * F."""
    budget = cache_size * realization.file_size_bits
    return all(
        realization.cached_bits(user) <= budget + 1e-6 * realization.file_size_bits
        for user in range(1, realization.k_users + 1)
    )
