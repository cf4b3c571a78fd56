"""Stochastic samplers for the ring: Wolff cluster updates, Glauber heat-bath
updates, chain runners, exact stationary sampling, and critical-point hitting
times.

Two implementations of the Wolff update coexist on purpose:

* ``wolff_step`` is the reference stack algorithm: grow the cluster from a
  uniformly chosen seed, testing each ring bond at most once (visited-bond
  set), pushing accepted sites on a LIFO stack, and examining each popped
  site's +1 neighbor before its -1 neighbor. RNG consumption: one integer
  for the seed, then one uniform per aligned bond tested, in that stack
  order; anti-aligned bonds are deterministic rejections and consume nothing.

* ``wolff_step_many`` vectorizes the same transition law over many chains.
  On the ring a cluster is an arc, and the stack growth is equivalent to
  truncated-geometric extensions right and left of the seed: extending by g
  sites within the seed's component has probability bond_prob^g * bond_miss
  below the cap and bond_prob^cap at it. RNG consumption per chain and step:
  one integer plus two uniforms. The law equals the reference sampler's
  (both reproduce the exact transition kernel; see tests), but the two paths
  consume randomness differently, so trajectories are only reproducible
  within one path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from .model import (
    INFINITE,
    Configuration,
    ModelParams,
    ResourceLimitError,
    derived_constants,
    gibbs_measure,
)
from .randomness import as_generator

WOLFF = "wolff"
GLAUBER = "glauber"

#: ``run_chain`` refuses to store trajectories larger than this many bytes.
DEFAULT_STORAGE_BUDGET = 256 * 1024 * 1024

#: Exact inverse-CDF stationary sampling is used up to this size; beyond it
#: the sequential transfer-matrix sampler takes over (both are exact).
INVERSE_CDF_SITE_LIMIT = 20


def _wolff_step_bits(bits: int, n: int, bond_prob: float, gen: np.random.Generator) -> int:
    """One stack-algorithm Wolff update on a bit-packed configuration."""
    seed = int(gen.integers(n))
    seed_spin = (bits >> seed) & 1
    cluster = 1 << seed
    visited = 0  # bond b joins sites b and (b+1) mod n
    stack = [seed]
    while stack:
        i = stack.pop()
        # +1 neighbor over bond i first, then -1 neighbor over bond i-1;
        # at n=2 these are the two distinct bonds joining the same pair
        for j, bond in (((i + 1) % n, i), ((i - 1) % n, (i - 1) % n)):
            bond_bit = 1 << bond
            if visited & bond_bit:
                continue
            if ((bits >> j) & 1) != seed_spin:
                continue  # anti-aligned: no trial, bond can never open
            visited |= bond_bit
            if gen.random() < bond_prob and not (cluster >> j) & 1:
                cluster |= 1 << j
                stack.append(j)
    return bits ^ cluster


def wolff_step(config: Configuration, params: ModelParams, rng) -> Configuration:
    """One Wolff cluster update; valid for any coupling in [0, INFINITE]."""
    if config.n != params.n:
        raise ValueError("configuration and params sizes differ")
    gen = as_generator(rng)
    bond_prob = derived_constants(params).bond_prob
    return Configuration(_wolff_step_bits(config.bits, params.n, bond_prob, gen), params.n)


def glauber_step(config: Configuration, params: ModelParams, rng) -> Configuration:
    """One heat-bath update: flip a uniform site with its conditional Gibbs odds.

    The chosen site i flips with probability
    e^{-J s_i (s_{i-1}+s_{i+1})} / (e^{J (s_{i-1}+s_{i+1})} + e^{-J (s_{i-1}+s_{i+1})}).
    Consumes one integer and one uniform per call.
    """
    j_hat = params.require_finite("glauber_step")
    if config.n != params.n:
        raise ValueError("configuration and params sizes differ")
    gen = as_generator(rng)
    n = params.n
    bits = config.bits
    i = int(gen.integers(n))
    s_i = 2 * ((bits >> i) & 1) - 1
    s_nb = (2 * ((bits >> ((i - 1) % n)) & 1) - 1) + (2 * ((bits >> ((i + 1) % n)) & 1) - 1)
    p_flip = math.exp(-j_hat * s_i * s_nb) / (math.exp(j_hat * s_nb) + math.exp(-j_hat * s_nb))
    if gen.random() < p_flip:
        bits ^= 1 << i
    return Configuration(bits, n)


def _truncated_geometric(u: np.ndarray, bond_prob: float, n: int) -> np.ndarray:
    """Number of consecutive bond successes before the first failure, capped at n."""
    if bond_prob <= 0.0:
        return np.zeros(u.shape, dtype=np.int64)
    if bond_prob >= 1.0:
        return np.full(u.shape, n, dtype=np.int64)
    with np.errstate(divide="ignore"):
        g = np.floor(np.log(u) / math.log(bond_prob))
    return np.minimum(g, n).astype(np.int64)


def wolff_step_many(spins: np.ndarray, params: ModelParams, gen: np.random.Generator) -> np.ndarray:
    """One Wolff update applied independently to each row of a (chains, n) +-1 array."""
    c, n = spins.shape
    if n != params.n:
        raise ValueError("spin array and params sizes differ")
    bond_prob = derived_constants(params).bond_prob
    seeds = gen.integers(0, n, size=c)
    g_right = _truncated_geometric(gen.random(c), bond_prob, n)
    g_left = _truncated_geometric(gen.random(c), bond_prob, n)

    aligned = spins == np.roll(spins, -1, axis=1)  # column b: bond (b, b+1 mod n)
    offsets = np.arange(n)
    idx_right = (seeds[:, None] + offsets) % n
    run_right = np.cumprod(np.take_along_axis(aligned, idx_right, axis=1), axis=1).sum(axis=1)
    idx_left = (seeds[:, None] - 1 - offsets) % n
    run_left = np.cumprod(np.take_along_axis(aligned, idx_left, axis=1), axis=1).sum(axis=1)

    ext_right = np.minimum(np.minimum(g_right, run_right), n - 1)
    ext_left = np.minimum(np.minimum(g_left, run_left), n - 1 - ext_right)

    rel = (offsets[None, :] - seeds[:, None]) % n
    in_cluster = (rel <= ext_right[:, None]) | (rel >= (n - ext_left)[:, None])
    return np.where(in_cluster, -spins, spins)


def glauber_step_many(spins: np.ndarray, params: ModelParams, gen: np.random.Generator) -> np.ndarray:
    """One Glauber update applied independently to each row of a (chains, n) +-1 array."""
    j_hat = params.require_finite("glauber_step_many")
    c, n = spins.shape
    if n != params.n:
        raise ValueError("spin array and params sizes differ")
    sites = gen.integers(0, n, size=c)
    u = gen.random(c)
    rows = np.arange(c)
    s_i = spins[rows, sites].astype(np.float64)
    s_nb = (spins[rows, (sites - 1) % n] + spins[rows, (sites + 1) % n]).astype(np.float64)
    p_flip = np.exp(-j_hat * s_i * s_nb) / (np.exp(j_hat * s_nb) + np.exp(-j_hat * s_nb))
    out = spins.copy()
    hit = u < p_flip
    out[rows[hit], sites[hit]] = -out[rows[hit], sites[hit]]
    return out


@dataclass(frozen=True)
class InitialLaw:
    """How Y_1 is drawn: a fixed configuration, an exact stationary sample,
    the all-plus state, or a uniform random state."""

    kind: str
    config: Optional[Configuration] = None

    FIXED = "fixed"
    STATIONARY = "stationary"
    ALL_PLUS = "all-plus"
    UNIFORM = "uniform"

    @classmethod
    def fixed(cls, config: Configuration) -> "InitialLaw":
        return cls(cls.FIXED, config)

    @classmethod
    def stationary(cls) -> "InitialLaw":
        return cls(cls.STATIONARY)

    @classmethod
    def all_plus(cls) -> "InitialLaw":
        return cls(cls.ALL_PLUS)

    @classmethod
    def uniform_random(cls) -> "InitialLaw":
        return cls(cls.UNIFORM)

    def sample(self, params: ModelParams, gen: np.random.Generator) -> Configuration:
        if self.kind == self.FIXED:
            if self.config is None:
                raise ValueError("fixed initial law needs a configuration")
            if self.config.n != params.n:
                raise ValueError("initial configuration and params sizes differ")
            return self.config
        if self.kind == self.ALL_PLUS:
            return Configuration.all_plus(params.n)
        if self.kind == self.UNIFORM:
            bits = int(gen.integers(0, 1 << params.n)) if params.n <= 62 else _random_bits(params.n, gen)
        elif self.kind == self.STATIONARY:
            return sample_stationary(params, gen)
        else:
            raise ValueError(f"unknown initial law {self.kind!r}")
        return Configuration(bits, params.n)


def _random_bits(n: int, gen: np.random.Generator) -> int:
    bits = 0
    for b in range(n):
        if gen.integers(2):
            bits |= 1 << b
    return bits


@dataclass(frozen=True)
class Trajectory:
    """A stored chain Y_1..Y_M (bit-packed). Y_1 is the initial configuration."""

    params: ModelParams
    kind: str
    states: np.ndarray  # uint64 bits, length M

    @property
    def steps(self) -> int:
        return len(self.states)

    @property
    def initial(self) -> Configuration:
        return self.config(0)

    def config(self, k: int) -> Configuration:
        return Configuration(int(self.states[k]), self.params.n)

    def __iter__(self) -> Iterator[Configuration]:
        n = self.params.n
        return (Configuration(int(b), n) for b in self.states)

    def spin_matrix(self) -> np.ndarray:
        """Decode to a (M, n) +-1 int8 matrix."""
        return decode_states(self.states, self.params.n)


def decode_states(states: np.ndarray, n: int) -> np.ndarray:
    """Bit-packed uint64 states -> (M, n) +-1 int8 matrix."""
    arr = np.asarray(states, dtype=np.uint64)
    bits = (arr[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & np.uint64(1)
    return (2 * bits.astype(np.int8) - 1).astype(np.int8)


def encode_spins(spins: np.ndarray) -> np.ndarray:
    """(M, n) +-1 matrix -> bit-packed uint64 states."""
    spins = np.asarray(spins)
    n = spins.shape[1]
    weights = (np.uint64(1) << np.arange(n, dtype=np.uint64))[None, :]
    return ((spins > 0).astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def iter_chain(initial: InitialLaw, steps: int, kind: str, params: ModelParams, rng) -> Iterator[Configuration]:
    """Stream Y_1..Y_steps one configuration at a time (constant memory)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if kind not in (WOLFF, GLAUBER):
        raise ValueError(f"unknown dynamics kind {kind!r}")
    gen = as_generator(rng)
    current = initial.sample(params, gen)
    yield current
    if kind == WOLFF:
        bond_prob = derived_constants(params).bond_prob
        bits, n = current.bits, params.n
        for _ in range(steps - 1):
            bits = _wolff_step_bits(bits, n, bond_prob, gen)
            yield Configuration(bits, n)
    else:
        current_cfg = current
        for _ in range(steps - 1):
            current_cfg = glauber_step(current_cfg, params, gen)
            yield current_cfg


def run_chain(
    initial: InitialLaw,
    steps: int,
    kind: str,
    params: ModelParams,
    rng,
    storage_budget: int = DEFAULT_STORAGE_BUDGET,
) -> Trajectory:
    """Run and store a chain. Deterministic given the RngStream; Y_1 is the initial draw."""
    if params.n > 64:
        raise ResourceLimitError("stored trajectories are bit-packed in uint64 (n <= 64); use iter_chain")
    if steps * 8 > storage_budget:
        raise ResourceLimitError(
            f"storing {steps} states needs {steps * 8} bytes > budget {storage_budget}; use iter_chain"
        )
    states = np.empty(steps, dtype=np.uint64)
    for k, cfg in enumerate(iter_chain(initial, steps, kind, params, rng)):
        states[k] = cfg.bits
    return Trajectory(params=params, kind=kind, states=states)


def ergodic_average(f: Callable[[Configuration], float], trajectory) -> float:
    """(1/M) sum_k f(Y_k) over a Trajectory or any iterable of configurations."""
    total = 0.0
    count = 0
    for cfg in trajectory:
        total += f(cfg)
        count += 1
    if count == 0:
        raise ValueError("empty trajectory")
    return total / count


def hitting_time_aligned(initial: Configuration, rng) -> int:
    """First 1-based index k with Y_k fully aligned, for the critical-point chain.

    Y_1 = initial, so an aligned start returns 1. For a non-aligned start the
    chain merges exactly one component pair per step, so the value is the
    initial plus-component count + 1 (deterministic even though the path is
    random).
    """
    gen = as_generator(rng)
    params = ModelParams(initial.n, INFINITE)
    bond_prob = derived_constants(params).bond_prob
    bits, n = initial.bits, initial.n
    full = (1 << n) - 1
    k = 1
    while bits != 0 and bits != full:
        bits = _wolff_step_bits(bits, n, bond_prob, gen)
        k += 1
        if k > n + 2:  # cannot happen: at most n/2 merges are needed
            raise RuntimeError("critical-point chain failed to align; sampler bug")
    return k


def sample_stationary(params: ModelParams, rng) -> Configuration:
    """One exact draw from the Gibbs measure."""
    gen = as_generator(rng)
    if params.n <= INVERSE_CDF_SITE_LIMIT:
        params.require_finite("sample_stationary")
        cdf = np.cumsum(gibbs_measure(params).probabilities)
        bits = int(np.searchsorted(cdf, gen.random(), side="right"))
        return Configuration(min(bits, (1 << params.n) - 1), params.n)
    spins = sample_stationary_many(params, 1, gen)[0]
    return Configuration.from_spins(spins.tolist())


def sample_stationary_many(params: ModelParams, count: int, rng) -> np.ndarray:
    """Exact stationary sample of shape (count, n) via sequential transfer-matrix
    conditionals: draw s_1 fairly, then each s_{k+1} given s_k and s_1 with the
    wrap-around handled by the remaining-bond transfer-matrix power."""
    j_hat = params.require_finite("sample_stationary_many")
    gen = as_generator(rng)
    n = params.n
    theta = derived_constants(params).tanh_j
    spins = np.empty((count, n), dtype=np.int8)
    spins[:, 0] = np.where(gen.random(count) < 0.5, 1, -1).astype(np.int8)
    ej = math.exp(j_hat)
    emj = math.exp(-j_hat)
    first = spins[:, 0].astype(np.float64)
    for k in range(1, n):
        prev = spins[:, k - 1].astype(np.float64)
        t_rem = theta ** (n - k)  # bonds remaining from site k+1 around to site 1
        w_plus = np.where(prev > 0, ej, emj) * (1.0 + first * t_rem)
        w_minus = np.where(prev > 0, emj, ej) * (1.0 - first * t_rem)
        p_plus = w_plus / (w_plus + w_minus)
        spins[:, k] = np.where(gen.random(count) < p_plus, 1, -1).astype(np.int8)
    return spins
