"""Block-wise distribution matching codecs and block energy statistics.

Two fixed-length amplitude codecs are provided, both bijective and both
counting with exact integer arithmetic:

* constant-composition: every block carries the same amplitude histogram,
  indexed lexicographically over the multiset permutations;
* bounded-energy: every block satisfies an upper bound on its summed amplitude
  energy, indexed lexicographically via a cumulative-energy counting table.

Amplitude blocks are applied per quadrature with uniform sign bits, which keeps
symbols zero-mean and leaves the in-phase/quadrature cross moments at zero in
expectation.  Statistics helpers return both sampled (from an emitted stream)
and exact (over the full codebook) block-energy moments.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .constellation import (
    Constellation,
    MaxwellBoltzmann,
    ShapingError,
    build_constellation,
    fit_mb,
    fit_rate_param,
    maxwell_boltzmann_probs,
)

METHOD_UNIFORM = "uniform"
METHOD_MB_IID = "mb_iid"
METHOD_CCDM = "ccdm"
METHOD_ESS = "ess"

SHAPED_METHODS = (METHOD_CCDM, METHOD_ESS)
ALL_METHODS = (METHOD_UNIFORM, METHOD_MB_IID, METHOD_CCDM, METHOD_ESS)


def _bits_to_int(bits) -> int:
    value = 0
    for b in np.asarray(bits).ravel():
        if b not in (0, 1):
            raise ShapingError("bit arrays must contain only 0 and 1")
        value = (value << 1) | int(b)
    return value


def _int_to_bits(value: int, n_bits: int) -> np.ndarray:
    if value < 0 or value >= (1 << n_bits):
        raise ShapingError("index does not fit in the requested bit count")
    return np.array([(value >> k) & 1 for k in range(n_bits - 1, -1, -1)], dtype=np.uint8)


@dataclass(frozen=True)
class Composition:
    """Fixed per-block amplitude histogram: counts[k] occurrences of levels[k]."""

    levels: tuple[int, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.levels) != len(self.counts):
            raise ShapingError("levels and counts must have equal length")
        if any(c < 0 for c in self.counts):
            raise ShapingError("composition counts must be nonnegative")
        if sum(self.counts) <= 0:
            raise ShapingError("composition must place at least one symbol")
        if list(self.levels) != sorted(set(self.levels)):
            raise ShapingError("levels must be strictly increasing")
        if any(a <= 0 for a in self.levels):
            raise ShapingError("amplitude levels must be positive integers")

    @property
    def block_length(self) -> int:
        return sum(self.counts)

    def sequence_count(self) -> int:
        """Number of distinct arrangements: multinomial(block_length; counts)."""
        total = 1
        remaining = self.block_length
        for c in self.counts:
            total *= math.comb(remaining, c)
            remaining -= c
        return total

    def level_probs(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.block_length


def best_composition(levels, probs, block_length: int) -> Composition:
    """Quantize a level distribution to a block_length-type histogram.

    Greedily allocates counts one at a time, each step taking the level with the
    smallest marginal divergence increase; the objective c -> sum c_k
    ln(c_k/(n p_k)) is separable and convex, so the greedy path is optimal.
    Ties go to the lower-energy level.
    """
    levels = tuple(int(a) for a in levels)
    p = np.asarray(probs, dtype=float)
    if len(levels) != len(p):
        raise ShapingError("levels and probs must have equal length")
    if block_length <= 0:
        raise ShapingError("block length must be positive")
    counts = [0] * len(levels)

    def marginal(k: int) -> float:
        if p[k] <= 0.0:
            return math.inf
        c = counts[k]
        target = block_length * p[k]
        new = (c + 1) * math.log((c + 1) / target)
        old = 0.0 if c == 0 else c * math.log(c / target)
        return new - old

    for _ in range(block_length):
        costs = [marginal(k) for k in range(len(levels))]
        counts[int(np.argmin(costs))] += 1
    return Composition(levels=levels, counts=tuple(counts))


class CcdmCodec:
    """Bijective bits <-> fixed-histogram amplitude block codec.

    Blocks are ordered lexicographically by level index; ranking walks the
    block one position at a time, using the exact arrangement counts of the
    remaining multiset.
    """

    def __init__(self, composition: Composition):
        self.composition = composition
        self.levels = composition.levels
        self.block_length = composition.block_length
        self.sequence_count = composition.sequence_count()
        self.bits_per_block = self.sequence_count.bit_length() - 1

    def unrank(self, index: int) -> np.ndarray:
        if not 0 <= index < self.sequence_count:
            raise ShapingError("sequence index out of range")
        remaining = list(self.composition.counts)
        count = self.sequence_count
        out = np.empty(self.block_length, dtype=np.int64)
        for pos in range(self.block_length):
            n_rem = self.block_length - pos
            for lev, c in enumerate(remaining):
                if c == 0:
                    continue
                branch = count * c // n_rem  # arrangements starting with this level
                if index < branch:
                    out[pos] = lev
                    count = branch
                    remaining[lev] -= 1
                    break
                index -= branch
        return out

    def rank(self, level_seq) -> int:
        seq = np.asarray(level_seq, dtype=np.int64)
        if len(seq) != self.block_length:
            raise ShapingError("sequence length does not match the composition")
        remaining = list(self.composition.counts)
        count = self.sequence_count
        index = 0
        for pos in range(self.block_length):
            n_rem = self.block_length - pos
            lev = int(seq[pos])
            if not 0 <= lev < len(remaining) or remaining[lev] == 0:
                raise ShapingError("sequence does not match the composition histogram")
            for other in range(lev):
                if remaining[other]:
                    index += count * remaining[other] // n_rem
            count = count * remaining[lev] // n_rem
            remaining[lev] -= 1
        return index

    def encode(self, bits) -> np.ndarray:
        bits = np.asarray(bits).ravel()
        if len(bits) > self.bits_per_block:
            raise ShapingError(
                f"{len(bits)} bits exceed the block capacity of {self.bits_per_block}"
            )
        return self.unrank(_bits_to_int(bits))

    def decode(self, level_seq, n_bits: int | None = None) -> np.ndarray:
        n = self.bits_per_block if n_bits is None else int(n_bits)
        return _int_to_bits(self.rank(level_seq), n)


def _bounded_energy_table(energies: tuple[int, ...], block_length: int, max_energy: int) -> list[list[int]]:
    """table[k][e] = number of length-k level sequences with summed energy <= e."""
    table = [[1] * (max_energy + 1)]
    for _ in range(block_length):
        prev = table[-1]
        row = [0] * (max_energy + 1)
        for e in range(max_energy + 1):
            total = 0
            for en in energies:
                if e >= en:
                    total += prev[e - en]
            row[e] = total
        table.append(row)
    return table


class EssCodec:
    """Bijective bits <-> bounded-total-energy amplitude block codec.

    Counting runs over a cumulative-energy table in exact integer arithmetic,
    so block lengths where the codebook exceeds 2^64 remain exact.
    """

    def __init__(self, levels, block_length: int, max_block_energy: int):
        self.levels = tuple(int(a) for a in levels)
        if list(self.levels) != sorted(set(self.levels)) or any(a <= 0 for a in self.levels):
            raise ShapingError("levels must be strictly increasing positive integers")
        self.energies = tuple(a * a for a in self.levels)
        self.block_length = int(block_length)
        self.max_block_energy = int(max_block_energy)
        if self.block_length <= 0:
            raise ShapingError("block length must be positive")
        if self.max_block_energy < self.block_length * min(self.energies):
            raise ShapingError("energy bound is below the minimum achievable block energy")
        self._table = _bounded_energy_table(self.energies, self.block_length, self.max_block_energy)
        self.sequence_count = self._table[self.block_length][self.max_block_energy]
        self.bits_per_block = self.sequence_count.bit_length() - 1

    def unrank(self, index: int) -> np.ndarray:
        if not 0 <= index < self.sequence_count:
            raise ShapingError("sequence index out of range")
        budget = self.max_block_energy
        out = np.empty(self.block_length, dtype=np.int64)
        for pos in range(self.block_length):
            suffix = self.block_length - pos - 1
            for lev, en in enumerate(self.energies):
                if budget < en:
                    break
                branch = self._table[suffix][budget - en]
                if index < branch:
                    out[pos] = lev
                    budget -= en
                    break
                index -= branch
            else:
                raise ShapingError("internal counting inconsistency")
        return out

    def rank(self, level_seq) -> int:
        seq = np.asarray(level_seq, dtype=np.int64)
        if len(seq) != self.block_length:
            raise ShapingError("sequence length does not match the codec block length")
        budget = self.max_block_energy
        index = 0
        for pos in range(self.block_length):
            suffix = self.block_length - pos - 1
            lev = int(seq[pos])
            if not 0 <= lev < len(self.levels):
                raise ShapingError("sequence contains an unknown level index")
            en = self.energies[lev]
            if budget < en:
                raise ShapingError("sequence violates the block energy bound")
            for other in range(lev):
                index += self._table[suffix][budget - self.energies[other]]
            budget -= en
        return index

    def encode(self, bits) -> np.ndarray:
        bits = np.asarray(bits).ravel()
        if len(bits) > self.bits_per_block:
            raise ShapingError(
                f"{len(bits)} bits exceed the block capacity of {self.bits_per_block}"
            )
        return self.unrank(_bits_to_int(bits))

    def decode(self, level_seq, n_bits: int | None = None) -> np.ndarray:
        n = self.bits_per_block if n_bits is None else int(n_bits)
        return _int_to_bits(self.rank(level_seq), n)


def choose_max_block_energy(levels, block_length: int, bits_target: int) -> int:
    """Smallest block energy bound whose codebook holds at least 2**bits_target blocks."""
    levels = tuple(int(a) for a in levels)
    energies = tuple(a * a for a in levels)
    e_full = block_length * max(energies)
    table = _bounded_energy_table(energies, block_length, e_full)
    row = table[block_length]
    if row[e_full].bit_length() - 1 < bits_target:
        raise ShapingError(
            f"{bits_target} bits per block is infeasible for {len(levels)} levels "
            f"at block length {block_length}"
        )
    for e in range(block_length * min(energies), e_full + 1):
        if row[e].bit_length() - 1 >= bits_target:
            return e
    raise ShapingError("energy bound search failed")  # pragma: no cover


# Spec-level convenience wrappers around the codec objects.

def ccdm_encode(bits, composition: Composition) -> np.ndarray:
    return CcdmCodec(composition).encode(bits)


def ccdm_decode(level_seq, composition: Composition, n_bits: int | None = None) -> np.ndarray:
    return CcdmCodec(composition).decode(level_seq, n_bits)


def ess_encode(bits, levels, block_length: int, max_block_energy: int) -> np.ndarray:
    return EssCodec(levels, block_length, max_block_energy).encode(bits)


def ess_decode(level_seq, levels, block_length: int, max_block_energy: int,
               n_bits: int | None = None) -> np.ndarray:
    return EssCodec(levels, block_length, max_block_energy).decode(level_seq, n_bits)


@dataclass(eq=False)
class ShapedBlockStream:
    """Stream of symbol-index blocks drawn from one shaping method."""

    blocks: np.ndarray  # (n_blocks, block_length) indices into a constellation
    block_length: int
    method: str
    max_block_energy: int | None = None

    def __post_init__(self) -> None:
        self.blocks = np.asarray(self.blocks, dtype=np.int64)
        if self.blocks.ndim != 2 or self.blocks.shape[1] != self.block_length:
            raise ShapingError("blocks must be shaped (n_blocks, block_length)")

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.blocks.size

    def symbols(self, constellation: Constellation) -> np.ndarray:
        return constellation.points[self.blocks]


@dataclass(frozen=True)
class BlockStats:
    """Energy moments of a block stream.

    All variances use the population convention (divide by the count, not
    count-1): ``intra_block_variance`` is the mean over blocks of the in-block
    population variance, ``block_mean_variance`` the population variance of
    per-block mean energies.  ``correction_coeff`` is the signed weight of the
    block-envelope PSD correction; ``iq_beating_weight`` the neighbor-beating
    weight including in-phase/quadrature asymmetry terms.
    """

    mean_energy: float
    energy_variance: float
    intra_block_variance: float
    block_mean_variance: float
    correction_coeff: float
    iq_beating_weight: float
    i_power: float
    q_power: float
    iq_cross: float
    block_length: int
    method: str = ""


def _stats_from_samples(energy: np.ndarray, i_part: np.ndarray, q_part: np.ndarray,
                        method: str) -> BlockStats:
    n_s = energy.shape[1]
    mu = float(energy.mean())
    var = float(energy.var())
    intra = float(energy.var(axis=1).mean())
    bmv = float(energy.mean(axis=1).var())
    corr = (n_s - 1) * bmv - intra
    i2 = float((i_part**2).mean())
    q2 = float((q_part**2).mean())
    iq = float((i_part * q_part).mean())
    psi = mu**2 + (i2 - q2) ** 2 + 4.0 * iq**2
    return BlockStats(
        mean_energy=mu,
        energy_variance=var,
        intra_block_variance=intra,
        block_mean_variance=bmv,
        correction_coeff=corr,
        iq_beating_weight=psi,
        i_power=i2,
        q_power=q2,
        iq_cross=iq,
        block_length=n_s,
        method=method,
    )


def block_stats(stream: ShapedBlockStream, constellation: Constellation) -> BlockStats:
    """Sampled block-energy statistics of an emitted stream."""
    sym = stream.symbols(constellation)
    return _stats_from_samples(
        np.abs(sym) ** 2, sym.real, sym.imag, method=stream.method
    )


def pairwise_energy_covariance(stream: ShapedBlockStream, constellation: Constellation) -> float:
    """Sample covariance of energies over distinct in-block position pairs.

    The global mean energy is the reference; averaging runs over all ordered
    pairs (i, j), i != j, within each block and then over blocks.
    """
    if stream.block_length < 2:
        raise ShapingError("pairwise covariance needs at least two symbols per block")
    sym = stream.symbols(constellation)
    energy = np.abs(sym) ** 2
    dev = energy - energy.mean()
    n_s = stream.block_length
    s1 = dev.sum(axis=1)
    s2 = (dev**2).sum(axis=1)
    per_block = (s1**2 - s2) / (n_s * (n_s - 1))
    return float(per_block.mean())


def iid_block_stats(constellation: Constellation, block_length: int = 1) -> BlockStats:
    """Exact expected stats when symbols are drawn independently.

    For independent draws the expected intra-block variance is
    var * (n-1)/n and the block-mean variance var/n, so the envelope
    correction coefficient vanishes identically.
    """
    var = constellation.energy_variance()
    mu = constellation.mean_energy()
    i2, q2, iq = constellation.iq_moments()
    n = int(block_length)
    return BlockStats(
        mean_energy=mu,
        energy_variance=var,
        intra_block_variance=var * (n - 1) / n,
        block_mean_variance=var / n,
        correction_coeff=0.0,
        iq_beating_weight=mu**2 + (i2 - q2) ** 2 + 4.0 * iq**2,
        i_power=i2,
        q_power=q2,
        iq_cross=iq,
        block_length=n,
        method=METHOD_UNIFORM,
    )


def _pas_stats_from_dimension_moments(
    mean_amp_energy: Fraction,
    amp_energy_sq_mean: Fraction,
    block_energy_variance: Fraction,
    block_length: int,
    method: str,
) -> BlockStats:
    """Assemble two-quadrature block stats from one-dimension codebook moments.

    The two quadratures carry independent copies of the amplitude codec with
    uniform signs, so symbol energies add, block-mean variances add, and the
    scaled alphabet is normalized so the mean symbol energy is exactly 1.
    """
    n = block_length
    mu_u = 2 * mean_amp_energy
    var_u = 2 * (amp_energy_sq_mean - mean_amp_energy**2)
    bmv_u = 2 * block_energy_variance / (n * n)
    intra_u = var_u - bmv_u  # total-variance split; exact for equal block sizes
    s2 = Fraction(1, 1) / mu_u
    var = float(var_u * s2 * s2)
    bmv = float(bmv_u * s2 * s2)
    intra = float(intra_u * s2 * s2)
    return BlockStats(
        mean_energy=1.0,
        energy_variance=var,
        intra_block_variance=intra,
        block_mean_variance=bmv,
        correction_coeff=(n - 1) * bmv - intra,
        iq_beating_weight=1.0,
        i_power=0.5,
        q_power=0.5,
        iq_cross=0.0,
        block_length=n,
        method=method,
    )


def ccdm_codebook_stats(composition: Composition) -> BlockStats:
    """Exact two-quadrature stats over the full constant-composition codebook.

    Every block realizes the same histogram, so the block-energy variance is
    exactly zero and the intra-block variance equals the full energy variance.
    """
    n = composition.block_length
    energies = [a * a for a in composition.levels]
    m1 = sum(Fraction(c, n) * e for c, e in zip(composition.counts, energies))
    m2 = sum(Fraction(c, n) * e * e for c, e in zip(composition.counts, energies))
    return _pas_stats_from_dimension_moments(m1, m2, Fraction(0), n, METHOD_CCDM)


def _exact_energy_distribution(energies: tuple[int, ...], block_length: int,
                               max_energy: int) -> tuple[list[int], list[int]]:
    """Exact-count DP over block energy.

    Returns (counts, weighted) where counts[e] is the number of blocks with
    summed energy exactly e and weighted[e] the total of sum_i(E_i^2) over
    those blocks.
    """
    counts = [0] * (max_energy + 1)
    weighted = [0] * (max_energy + 1)
    counts[0] = 1
    for _ in range(block_length):
        new_c = [0] * (max_energy + 1)
        new_w = [0] * (max_energy + 1)
        for e in range(max_energy + 1):
            c = counts[e]
            if c == 0 and weighted[e] == 0:
                continue
            for en in energies:
                t = e + en
                if t > max_energy:
                    continue
                new_c[t] += c
                new_w[t] += weighted[e] + en * en * c
        counts, weighted = new_c, new_w
    return counts, weighted


def ess_codebook_stats(levels, block_length: int, max_block_energy: int) -> BlockStats:
    """Exact two-quadrature stats over the full bounded-energy codebook."""
    levels = tuple(int(a) for a in levels)
    energies = tuple(a * a for a in levels)
    counts, weighted = _exact_energy_distribution(energies, block_length, max_block_energy)
    total = sum(counts)
    if total == 0:
        raise ShapingError("empty codebook: energy bound below the minimum block energy")
    s1 = sum(e * c for e, c in enumerate(counts))
    s2 = sum(e * e * c for e, c in enumerate(counts))
    sw = sum(weighted)
    mean_blk = Fraction(s1, total)
    var_blk = Fraction(s2, total) - mean_blk**2
    m1 = mean_blk / block_length
    m2 = Fraction(sw, total * block_length)
    return _pas_stats_from_dimension_moments(m1, m2, var_blk, block_length, METHOD_ESS)


def ess_marginal_probs(codec: EssCodec) -> np.ndarray:
    """Exact marginal level distribution at any block position."""
    suffix = codec._table[codec.block_length - 1]
    total = codec.sequence_count
    probs = []
    for en in codec.energies:
        if codec.max_block_energy >= en:
            probs.append(Fraction(suffix[codec.max_block_energy - en], total))
        else:
            probs.append(Fraction(0))
    return np.array([float(p) for p in probs])


@dataclass(eq=False)
class ShapedSource:
    """A constellation plus a block generator with known exact statistics."""

    constellation: Constellation
    method: str
    block_length: int
    stats: BlockStats
    codec: CcdmCodec | EssCodec | None = None
    mb: MaxwellBoltzmann | None = None
    composition: Composition | None = None
    max_block_energy: int | None = None
    label: str = ""

    def bits_per_symbol(self) -> float:
        """Realized information rate, sign bits included for the block codecs."""
        if self.codec is None:
            return self.constellation.entropy_bits()
        return 2.0 * self.codec.bits_per_block / self.block_length + 2.0

    def stream(self, n_blocks: int, rng: np.random.Generator) -> ShapedBlockStream:
        """Draw blocks from the ensemble the exact statistics describe.

        Codec methods sample amplitude-block indices uniformly over the whole
        codebook (one independent draw per quadrature) plus uniform sign bits.
        Bit-mapped framing via encode() instead restricts itself to the first
        2**bits_per_block codebook entries; its block statistics differ from
        the uniform-codebook ones at O(1/n_s).
        """
        if self.codec is None:
            blocks = rng.choice(
                self.constellation.order,
                size=(n_blocks, self.block_length),
                p=self.constellation.probs,
            )
            return ShapedBlockStream(blocks, self.block_length, self.method)

        levels = np.asarray(
            self.composition.levels if self.composition is not None else self.codec.levels,
            dtype=np.int64,
        )
        lut = _lattice_index_table(self.constellation)
        count = self.codec.sequence_count
        n_s = self.block_length
        signs = rng.integers(0, 2, size=(2 * n_blocks, n_s), dtype=np.int64) * 2 - 1
        blocks = np.empty((n_blocks, n_s), dtype=np.int64)
        offset = lut.shape[0] // 2
        for b in range(n_blocks):
            amp_i = levels[self.codec.unrank(_uniform_index(rng, count))]
            amp_q = levels[self.codec.unrank(_uniform_index(rng, count))]
            re = amp_i * signs[2 * b]
            im = amp_q * signs[2 * b + 1]
            blocks[b] = lut[re + offset, im + offset]
        return ShapedBlockStream(blocks, n_s, self.method, self.max_block_energy)


def _uniform_index(rng: np.random.Generator, count: int) -> int:
    """Uniform big integer in [0, count), by rejection on ceil(log2) bits."""
    nbits = (count - 1).bit_length()
    n_words = (nbits + 63) // 64
    excess = 64 * n_words - nbits
    while True:
        value = 0
        for w in rng.integers(0, 1 << 64, size=n_words, dtype=np.uint64):
            value = (value << 64) | int(w)
        value >>= excess
        if value < count:
            return value


def _lattice_index_table(constellation: Constellation) -> np.ndarray:
    top = int(np.abs(constellation.lattice_re).max())
    size = 2 * top + 1
    lut = np.full((size, size), -1, dtype=np.int64)
    for k, (re, im) in enumerate(zip(constellation.lattice_re, constellation.lattice_im)):
        lut[int(re) + top, int(im) + top] = k
    return lut


def make_source(order: int, method: str, rate_bits: float | None = None,
                block_length: int = 1, label: str = "") -> ShapedSource:
    """Assemble a symbol source for one shaping method.

    Args:
        order: square-QAM order (4, 16, 64, 256).
        method: "uniform", "mb_iid", "ccdm", or "ess".
        rate_bits: total bits per symbol target; required for every method but
            "uniform".  The block codecs spend 2 sign bits per symbol, so the
            per-quadrature amplitude target is (rate_bits - 2) / 2.
        block_length: symbols per shaping block (codec methods).
    """
    if method not in ALL_METHODS:
        raise ShapingError(f"unknown shaping method {method!r}")
    base = build_constellation(order)
    label = label or f"{method}{block_length if method in SHAPED_METHODS else ''}"

    if method == METHOD_UNIFORM:
        return ShapedSource(
            constellation=base,
            method=method,
            block_length=block_length,
            stats=iid_block_stats(base, block_length),
            label=label,
        )

    if rate_bits is None:
        raise ShapingError(f"method {method!r} requires a rate target")

    if method == METHOD_MB_IID:
        mb, shaped = fit_mb(base, rate_bits)
        stats = iid_block_stats(shaped, block_length)
        return ShapedSource(
            constellation=shaped,
            method=method,
            block_length=block_length,
            stats=stats,
            mb=mb,
            label=label,
        )

    if block_length < 1:
        raise ShapingError("block length must be at least 1")
    amp_bits = (rate_bits - 2.0) / 2.0
    levels = tuple(int(a) for a in base.amplitude_levels())
    amp_energies = [a * a for a in levels]
    if amp_bits <= 0.0:
        raise ShapingError("rate target leaves no amplitude information after sign bits")

    if method == METHOD_CCDM:
        if amp_bits >= np.log2(len(levels)) - 1e-12:
            probs = np.full(len(levels), 1.0 / len(levels))
            mb = MaxwellBoltzmann(rate_param=0.0, target_rate=rate_bits)
        else:
            lam = fit_rate_param(amp_energies, amp_bits)
            probs = maxwell_boltzmann_probs(amp_energies, lam)
            mb = MaxwellBoltzmann(rate_param=lam, target_rate=rate_bits)
        comp = best_composition(levels, probs, block_length)
        codec = CcdmCodec(comp)
        if codec.sequence_count < 2:
            raise ShapingError("degenerate composition: codebook has fewer than two blocks")
        marg = comp.level_probs()
        constellation = _pas_constellation(order, levels, marg)
        return ShapedSource(
            constellation=constellation,
            method=method,
            block_length=block_length,
            stats=ccdm_codebook_stats(comp),
            codec=codec,
            mb=mb,
            composition=comp,
            label=label,
        )

    # bounded-energy codec
    bits_target = round(block_length * amp_bits)
    if bits_target < 1:
        raise ShapingError("rate target rounds to zero amplitude bits per block")
    e_max = choose_max_block_energy(levels, block_length, bits_target)
    codec = EssCodec(levels, block_length, e_max)
    marg = ess_marginal_probs(codec)
    constellation = _pas_constellation(order, levels, marg)
    return ShapedSource(
        constellation=constellation,
        method=method,
        block_length=block_length,
        stats=ess_codebook_stats(levels, block_length, e_max),
        codec=codec,
        max_block_energy=e_max,
        label=label,
    )


def _pas_constellation(order: int, levels: tuple[int, ...], amp_probs: np.ndarray) -> Constellation:
    """Square-QAM lattice with product-form probabilities from one amplitude marginal."""
    base = build_constellation(order)
    prob_of = {a: p / 2.0 for a, p in zip(levels, amp_probs)}  # split over the two signs
    probs = np.array(
        [
            prob_of[abs(int(re))] * prob_of[abs(int(im))]
            for re, im in zip(base.lattice_re, base.lattice_im)
        ]
    )
    return Constellation.from_lattice(base.lattice_re, base.lattice_im, probs)


def stream_to_csv(stream: ShapedBlockStream, constellation: Constellation, path) -> None:
    """Dump a stream as one row per block: index, symbol indices, block energy."""
    energy = (np.abs(stream.symbols(constellation)) ** 2).sum(axis=1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "symbol_indices", "block_energy"])
        for k in range(stream.n_blocks):
            writer.writerow([k, " ".join(map(str, stream.blocks[k])), f"{energy[k]:.12g}"])
