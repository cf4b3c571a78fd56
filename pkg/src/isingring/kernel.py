"""Exact dense transition kernels for the Wolff and Glauber dynamics.

States are listed in binary order (row/column index = bit-packed
configuration), so the index doubles as the bitmask. Wolff entries follow
the closed form: for a connected, spin-aligned flip set A,

    P(sigma, sigma^A) = (#A/N) * bond_prob^{#A-1} * bond_miss^{#(dA & aligned bonds)}

for proper A, and (N*bond_miss + bond_prob) * bond_prob^{N-1} for the full
flip out of an aligned state; everything else is zero. Two independent
scalar evaluations are provided (one from the edge boundary of A, one from
the component decomposition case analysis) and must agree exactly.

The kernel builder only visits the N(N-1)+1 connected arc masks per ring
(all other columns are zero), vectorizing over source states.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .model import (
    Configuration,
    GibbsMeasure,
    KERNEL_SITE_LIMIT,
    ModelParams,
    ResourceLimitError,
    _popcount_array,
    derived_constants,
)
from .clusters import FlipSet, RingGraph, decompose, edge_boundary, is_connected, vertex_boundary
from .randomness import as_generator

WOLFF = "wolff"
GLAUBER = "glauber"


@dataclass(frozen=True)
class TransitionKernel:
    """Dense row-stochastic matrix over the 2^N states in binary order."""

    params: ModelParams
    kind: str
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def row_sum_error(self) -> float:
        return float(np.abs(self.matrix.sum(axis=1) - 1.0).max())


def _check_kernel_size(n: int):
    if n > KERNEL_SITE_LIMIT:
        raise ResourceLimitError(f"dense kernel needs 4^{n} entries; cap is n <= {KERNEL_SITE_LIMIT}")


def _aligned_in(config: Configuration, mask: int) -> bool:
    """True iff every site of the mask carries the same spin in config."""
    inter = config.bits & mask
    return inter == 0 or inter == mask


def wolff_entry_from_boundary(config: Configuration, flipset: FlipSet, params: ModelParams) -> float:
    """Wolff transition probability via the edge-boundary form."""
    if flipset.mask == 0:
        raise ValueError("flip set must be nonempty")
    if config.n != flipset.n or config.n != params.n:
        raise ValueError("sizes of configuration, flip set and params differ")
    graph = RingGraph(params.n)
    if not is_connected(flipset, graph):
        return 0.0
    if not _aligned_in(config, flipset.mask):
        return 0.0
    c = derived_constants(params)
    n = params.n
    m = flipset.size
    if m == n:
        if not config.is_aligned:
            return 0.0
        return (n * c.bond_miss + c.bond_prob) * c.bond_prob ** (n - 1)
    dec = decompose(config)
    misses = len(edge_boundary(flipset, graph) & dec.aligned_bonds)
    return (m / n) * c.bond_prob ** (m - 1) * c.bond_miss**misses


def wolff_entry_from_components(config: Configuration, flipset: FlipSet, params: ModelParams) -> float:
    """Wolff transition probability via the component-decomposition case form."""
    if flipset.mask == 0:
        raise ValueError("flip set must be nonempty")
    if config.n != flipset.n or config.n != params.n:
        raise ValueError("sizes of configuration, flip set and params differ")
    graph = RingGraph(params.n)
    if not is_connected(flipset, graph):
        return 0.0
    if not _aligned_in(config, flipset.mask):
        return 0.0
    c = derived_constants(params)
    n = params.n
    m = flipset.size
    dec = decompose(config)

    if dec.plus_count == 0 or dec.minus_count == 0:
        # fully aligned source
        if m <= n - 1:
            return (m / n) * c.bond_prob ** (m - 1) * c.bond_miss**2
        return (n * c.bond_miss + c.bond_prob) * c.bond_prob ** (n - 1)

    if m == n:
        return 0.0
    a_sites = set(flipset.sites)
    for comp in dec.components():
        comp_set = set(comp)
        if not a_sites <= comp_set:
            continue
        comp_boundary = vertex_boundary(FlipSet.from_sites(comp, n), graph)
        touched = len(a_sites & comp_boundary)
        if len(comp_boundary) == 1:
            # singleton component; A equals it
            return (m / n) * 1.0
        if touched == 0:
            return (m / n) * c.bond_prob ** (m - 1) * c.bond_miss**2
        if touched == 1:
            return (m / n) * c.bond_prob ** (m - 1) * c.bond_miss
        return (m / n) * c.bond_prob ** (m - 1)
    return 0.0


def wolff_entry(config: Configuration, flipset: FlipSet, params: ModelParams) -> float:
    """Wolff transition probability P(sigma, sigma^A) (edge-boundary form)."""
    return wolff_entry_from_boundary(config, flipset, params)


def _arc_masks(n: int):
    """All proper connected arc masks: (mask, length) for every start and length < n.

    The full ring is not yielded; the builder handles the full flip separately.
    """
    for start in range(n):
        mask = 0
        for length in range(1, n):
            mask |= 1 << ((start + length - 1) % n)
            yield mask, length


def build_wolff_kernel(params: ModelParams) -> TransitionKernel:
    """Assemble the exact Wolff kernel; diagonal is identically zero."""
    n = params.n
    _check_kernel_size(n)
    c = derived_constants(params)
    size = 1 << n
    full = size - 1
    states = np.arange(size, dtype=np.int64)
    rotated = (states >> 1) | ((states & 1) << (n - 1))
    aligned_bonds = ~(states ^ rotated) & full  # per-source bitmask of aligned bonds
    miss_pow = np.array([1.0, c.bond_miss, c.bond_miss**2])

    matrix = np.zeros((size, size))
    for mask, length in _arc_masks(n):
        sel = states & mask
        ok = (sel == 0) | (sel == mask)
        boundary = mask ^ (((mask >> 1) | ((mask & 1) << (n - 1))) & full)
        misses = _popcount_array(aligned_bonds & boundary)
        values = (length / n) * c.bond_prob ** (length - 1) * miss_pow[misses]
        src = states[ok]
        matrix[src, src ^ mask] = values[ok]
    full_flip = (n * c.bond_miss + c.bond_prob) * c.bond_prob ** (n - 1)
    matrix[0, full] = full_flip
    matrix[full, 0] = full_flip
    return TransitionKernel(params=params, kind=WOLFF, matrix=matrix)


def glauber_flip_probability(config: Configuration, site: int, params: ModelParams) -> float:
    """Conditional flip probability of 1-based ``site`` (before the 1/N site choice)."""
    j_hat = params.require_finite("glauber_flip_probability")
    s_i = config.spin(site)
    s_nb = config.spin(site - 1) + config.spin(site + 1)
    return math.exp(-j_hat * s_i * s_nb) / (math.exp(j_hat * s_nb) + math.exp(-j_hat * s_nb))


def glauber_flip_probability_from_components(config: Configuration, site: int, params: ModelParams) -> float:
    """Same probability from the component case analysis (cross-check form)."""
    j_hat = params.require_finite("glauber_flip_probability_from_components")
    e2, em2 = math.exp(2.0 * j_hat), math.exp(-2.0 * j_hat)
    dec = decompose(config)
    if dec.plus_count == 0 or dec.minus_count == 0:
        return em2 / (e2 + em2)
    graph = RingGraph(params.n)
    for comp in dec.components():
        if site not in comp:
            continue
        if len(comp) == 1:
            return e2 / (e2 + em2)
        comp_boundary = vertex_boundary(FlipSet.from_sites(comp, params.n), graph)
        if site in comp_boundary:
            return 0.5
        return em2 / (e2 + em2)
    raise AssertionError("site not found in any component")


def build_glauber_kernel(params: ModelParams) -> TransitionKernel:
    """Assemble the exact heat-bath kernel; off-diagonal support is single flips."""
    j_hat = params.require_finite("build_glauber_kernel")
    n = params.n
    _check_kernel_size(n)
    size = 1 << n
    states = np.arange(size, dtype=np.int64)
    matrix = np.zeros((size, size))
    for b in range(n):
        s_i = 2.0 * ((states >> b) & 1) - 1.0
        s_prev = 2.0 * ((states >> ((b - 1) % n)) & 1) - 1.0
        s_next = 2.0 * ((states >> ((b + 1) % n)) & 1) - 1.0
        s_nb = s_prev + s_next
        p_flip = np.exp(-j_hat * s_i * s_nb) / (np.exp(j_hat * s_nb) + np.exp(-j_hat * s_nb))
        matrix[states, states ^ (1 << b)] = p_flip / n
    matrix[states, states] = 1.0 - matrix.sum(axis=1)
    return TransitionKernel(params=params, kind=GLAUBER, matrix=matrix)


def check_detailed_balance(kernel: TransitionKernel, measure: GibbsMeasure, tol: float = 1e-12) -> float:
    """Max over state pairs of |mu(x)P(x,y) - mu(y)P(y,x)|; pass iff <= tol."""
    if measure.n != kernel.n:
        raise ValueError("kernel and measure sizes differ")
    flux = measure.probabilities[:, None] * kernel.matrix
    return float(np.abs(flux - flux.T).max())


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (descending) and an L^2(mu)-orthonormal eigenbasis.

    basis[:, j] is the eigenfunction xi_j on the state space; xi_1 is the
    constant function 1. The kernel is reconstructed by
    P(x, y) = sum_j eigenvalues[j] * xi_j(x) * xi_j(y) * mu(y).
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    measure: GibbsMeasure

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def gap(self) -> float:
        return 1.0 - self.lambda2


def symmetrize_and_decompose(
    kernel: TransitionKernel, measure: GibbsMeasure, reversibility_tol: float = 1e-10
) -> SpectralDecomposition:
    """Full spectrum of the mu-symmetrized kernel D^{1/2} P D^{-1/2}.

    Requires reversibility (checked first). Ties in the descending eigenvalue
    order are broken by ascending index; degenerate eigenspaces should be
    compared as eigenvalue multisets, never via eigenvector identity.
    """
    violation = check_detailed_balance(kernel, measure)
    if violation > reversibility_tol:
        raise ValueError(f"kernel is not reversible for this measure (violation {violation:.3e})")
    root = np.sqrt(measure.probabilities)
    sym = kernel.matrix * (root[:, None] / root[None, :])
    sym = 0.5 * (sym + sym.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    basis = eigvecs / root[:, None]
    # orient the top eigenfunction as the constant +1
    if basis[0, 0] < 0:
        basis[:, 0] = -basis[:, 0]
    return SpectralDecomposition(eigenvalues=eigvals, basis=basis, measure=measure)


def spectral_gap(decomposition: SpectralDecomposition) -> float:
    """1 - lambda_2 of the decomposed kernel."""
    return decomposition.gap


def hypercube_walk_spectrum(n: int, lazy: bool = False) -> np.ndarray:
    """Independent analytic spectrum of the uniform single-flip walk.

    Characters chi_S diagonalize the flip average with eigenvalue 1 - 2|S|/N
    (1 - |S|/N for the lazy half-step walk), each |S|=k appearing C(N,k)
    times. Used as the oracle for the numeric decomposition at j_hat = 0.
    """
    from math import comb

    values = []
    for k in range(n + 1):
        lam = 1.0 - (k / n if lazy else 2.0 * k / n)
        values.extend([lam] * comb(n, k))
    return np.sort(np.array(values))[::-1]


@dataclass(frozen=True)
class EmpiricalCheck:
    """Result of comparing one-step sample frequencies against kernel rows.

    Multiple-testing rule: per start state, targets with expected count below
    ``min_expected`` are pooled into a single bucket; z-scores are computed
    for each kept target and for the pooled bucket; any observed target with
    exact probability zero is an immediate failure (off_support > 0). The
    global statistic is the max |z| over all states and buckets.
    """

    max_z: float
    tests: int
    off_support: int
    worst_state: int
    trials: int

    def passes(self, z_max: float = 4.0) -> bool:
        return self.off_support == 0 and self.max_z <= z_max


def _one_step_counts_bulk(
    state_bits: int, kernel: TransitionKernel, trials: int, gen: np.random.Generator
) -> np.ndarray:
    """Sample one step ``trials`` times from a fixed state, vectorized.

    Uses the same truncated-geometric arc law and the same RNG consumption
    order as the batch steppers (seed integers, then the uniform arrays), so
    the outcomes match ``wolff_step_many``/``glauber_step_many`` draw for
    draw; the fixed start just lets the component extents be precomputed.
    """
    from .dynamics import _truncated_geometric

    n = kernel.n
    size = kernel.size
    if kernel.kind == WOLFF:
        c = derived_constants(kernel.params)
        aligned = [((state_bits >> b) & 1) == ((state_bits >> ((b + 1) % n)) & 1) for b in range(n)]
        run_r = np.zeros(n, dtype=np.int64)
        run_l = np.zeros(n, dtype=np.int64)
        for s in range(n):
            r = 0
            while r < n and aligned[(s + r) % n]:
                r += 1
            run_r[s] = r
            l = 0
            while l < n and aligned[(s - 1 - l) % n]:
                l += 1
            run_l[s] = l
        arc_mask = np.zeros((n, n + 1), dtype=np.int64)
        for s in range(n):
            mask = 0
            for length in range(1, n + 1):
                mask |= 1 << ((s + length - 1) % n)
                arc_mask[s, length] = mask
        seeds = gen.integers(0, n, size=trials)
        g_right = _truncated_geometric(gen.random(trials), c.bond_prob, n)
        g_left = _truncated_geometric(gen.random(trials), c.bond_prob, n)
        ext_r = np.minimum(np.minimum(g_right, run_r[seeds]), n - 1)
        ext_l = np.minimum(np.minimum(g_left, run_l[seeds]), n - 1 - ext_r)
        starts = (seeds - ext_l) % n
        lengths = ext_l + ext_r + 1
        targets = state_bits ^ arc_mask[starts, lengths]
        return np.bincount(targets, minlength=size)
    flip_prob = np.array(
        [
            glauber_flip_probability(Configuration(state_bits, n), b + 1, kernel.params)
            for b in range(n)
        ]
    )
    sites = gen.integers(0, n, size=trials)
    u = gen.random(trials)
    flips = np.where(u < flip_prob[sites], np.int64(1) << sites.astype(np.int64), 0)
    return np.bincount(state_bits ^ flips, minlength=size)


def _one_step_counts_stack(
    state_bits: int, kernel: TransitionKernel, trials: int, gen: np.random.Generator
) -> np.ndarray:
    from .dynamics import _wolff_step_bits, glauber_step

    n = kernel.n
    counts = np.zeros(kernel.size, dtype=np.int64)
    if kernel.kind == WOLFF:
        bond_prob = derived_constants(kernel.params).bond_prob
        for _ in range(trials):
            counts[_wolff_step_bits(state_bits, n, bond_prob, gen)] += 1
    else:
        cfg = Configuration(state_bits, n)
        for _ in range(trials):
            counts[glauber_step(cfg, kernel.params, gen).bits] += 1
    return counts


def empirical_vs_exact(
    kernel: TransitionKernel,
    params: ModelParams,
    trials: int,
    rng,
    method: str = "bulk",
    min_expected: float = 10.0,
    states=None,
) -> EmpiricalCheck:
    """Validate the sampler against the kernel: one-step frequencies per start state.

    ``method`` selects the vectorized bulk sampler or the reference stack
    sampler (same law, different RNG consumption). ``states`` restricts the
    start states (default: all of them).
    """
    if params.n > 8:
        raise ResourceLimitError("empirical check enumerates all start states; cap is n <= 8")
    gen = as_generator(rng)
    sampler = _one_step_counts_bulk if method == "bulk" else _one_step_counts_stack
    state_list = range(kernel.size) if states is None else states
    max_z = 0.0
    worst_state = -1
    tests = 0
    off_support = 0
    for s in state_list:
        row = kernel.matrix[s]
        counts = sampler(int(s), kernel, trials, gen)
        off_support += int(counts[row == 0.0].sum())
        expected = trials * row
        keep = expected >= min_expected
        z_values = []
        if keep.any():
            p = row[keep]
            var = trials * p * (1.0 - p)
            z = np.zeros(len(p))
            pos = var > 0.0
            z[pos] = (counts[keep][pos] - trials * p[pos]) / np.sqrt(var[pos])
            # a deterministic target (p == 1) must be hit every single time
            z[~pos] = np.where(counts[keep][~pos] == trials, 0.0, np.inf)
            z_values.append(z)
        pooled_p = row[(~keep) & (row > 0.0)].sum()
        if pooled_p > 0.0:
            pooled_c = counts[(~keep) & (row > 0.0)].sum()
            z_values.append(
                np.array([(pooled_c - trials * pooled_p) / np.sqrt(trials * pooled_p * (1.0 - pooled_p))])
            )
        if not z_values:
            continue
        z_all = np.abs(np.concatenate(z_values))
        tests += len(z_all)
        state_max = float(z_all.max())
        if state_max > max_z:
            max_z = state_max
            worst_state = int(s)
    return EmpiricalCheck(max_z=max_z, tests=tests, off_support=off_support, worst_state=worst_state, trials=trials)


_DUMP_MAGIC = b"IRK1"


def write_matrix_dump(path, n: int, j_hat: float, matrix: np.ndarray):
    """Binary dump: magic, little-endian int64 n, float64 j_hat, row-major float64 entries."""
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC)
        fh.write(struct.pack("<q", n))
        fh.write(struct.pack("<d", j_hat))
        fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def read_matrix_dump(path):
    """Inverse of write_matrix_dump; returns (n, j_hat, matrix)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _DUMP_MAGIC:
            raise ValueError("not a kernel/matrix dump")
        (n,) = struct.unpack("<q", fh.read(8))
        (j_hat,) = struct.unpack("<d", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    side = int(round(np.sqrt(data.size)))
    return n, j_hat, data.reshape(side, side).copy()


def kernel_j_float(params: ModelParams) -> float:
    """Coupling as a float for serialization; the critical point maps to inf."""
    return float("inf") if params.is_critical else float(params.j_hat)


def export_kernel_csv(kernel: TransitionKernel, path):
    """Nonzero entries as CSV rows (state-index, state-bits, target-index, probability).

    state-bits renders site 1 first with '1' for spin +1.
    """
    n = kernel.n
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("state_index,state_bits,target_index,probability\n")
        for s in range(kernel.size):
            bits = format(s, f"0{n}b")[::-1]
            row = kernel.matrix[s]
            for t in np.nonzero(row)[0]:
                fh.write(f"{s},{bits},{int(t)},{float(row[t])!r}\n")


def export_kernel_binary(kernel: TransitionKernel, path):
    write_matrix_dump(path, kernel.n, kernel_j_float(kernel.params), kernel.matrix)
