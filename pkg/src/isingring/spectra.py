"""Microstate ensembles, the sample covariance/correlation matrices, their
spectra, Gershgorin bounds, and the condensation experiments contrasting the
subcritical regime with the critical point.

A trajectory Y_1..Y_M becomes the N x M ensemble of unit columns
X_k = Y_k / sqrt(N); the covariance matrix is X X^T / M (trace 1) and the
correlation matrix X^T X / M shares its nonzero spectrum. Covariance
accumulation is streaming (block rank updates), so M = 10^7 runs in O(N^2)
memory; error bars come from 20 contiguous batch means because successive
chain states are correlated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .model import (
    INFINITE,
    Configuration,
    ModelParams,
    derived_constants,
    susceptibility_closed_form_bound,
)
from .clusters import decompose
from .dynamics import (
    GLAUBER,
    WOLFF,
    Trajectory,
    decode_states,
    glauber_step,
    sample_stationary,
    _wolff_step_bits,
)
from .functionals import lsi_constant_bound
from .randomness import RngStream, as_generator

DEFAULT_BATCHES = 20


@dataclass(frozen=True)
class Ensemble:
    """Unit-norm microstate columns X_k = Y_k/sqrt(N), shape (n, m)."""

    x: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]


def build_ensemble(trajectory: Trajectory) -> Ensemble:
    spins = trajectory.spin_matrix().astype(np.float64)
    return Ensemble(x=spins.T / math.sqrt(trajectory.params.n))


def covariance_matrix(ensemble: Ensemble) -> np.ndarray:
    """K = X X^T / M; symmetric PSD with unit trace."""
    return ensemble.x @ ensemble.x.T / ensemble.m


def correlation_matrix(ensemble: Ensemble) -> np.ndarray:
    """C = X^T X / M; trace 1, diagonal 1/M, same nonzero spectrum as K."""
    return ensemble.x.T @ ensemble.x / ensemble.m


class CovarianceAccumulator:
    """Streaming K += X_k X_k^T / M without storing the ensemble.

    Accepts blocks of +-1 spin rows; per-chain partials merge associatively.
    """

    def __init__(self, n: int):
        self.n = n
        self.total = np.zeros((n, n))
        self.count = 0

    def add_spins(self, block: np.ndarray):
        """block: (B, n) matrix of +-1 spins (rows are successive states)."""
        b = np.asarray(block, dtype=np.float64)
        if b.ndim != 2 or b.shape[1] != self.n:
            raise ValueError(f"expected a (B, {self.n}) block")
        self.total += b.T @ b
        self.count += b.shape[0]

    def merge(self, other: "CovarianceAccumulator"):
        if other.n != self.n:
            raise ValueError("accumulator sizes differ")
        self.total += other.total
        self.count += other.count

    def matrix(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("no samples accumulated")
        return self.total / (self.count * self.n)


def eigenvalues_symmetric(matrix: np.ndarray, k: Optional[int] = None) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, descending; optionally the top k."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("need a square matrix")
    if not np.allclose(m, m.T, atol=1e-10):
        raise ValueError("matrix is not symmetric")
    values = np.linalg.eigvalsh(m)[::-1]
    return values[:k] if k is not None else values


def gershgorin_norm(matrix: np.ndarray) -> float:
    """Max absolute row sum; upper-bounds the spectral radius."""
    m = np.asarray(matrix, dtype=np.float64)
    return float(np.abs(m).sum(axis=1).max())


@dataclass(frozen=True)
class SpectrumReport:
    """Sorted spectrum of a covariance matrix with its norm bounds.

    For PSD input the spectral radius is the top eigenvalue and never
    exceeds the Gershgorin norm; the eigenvalues sum to the trace.
    """

    eigenvalues: np.ndarray
    gershgorin: float
    spectral_radius: float

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])


def spectrum_report(matrix: np.ndarray) -> SpectrumReport:
    values = eigenvalues_symmetric(matrix)
    return SpectrumReport(
        eigenvalues=values,
        gershgorin=gershgorin_norm(matrix),
        spectral_radius=float(np.abs(values).max()),
    )


def exact_limit_covariance(params: ModelParams) -> np.ndarray:
    """The M -> infinity limit of K: entries E[sigma_i sigma_j]/N, closed form."""
    params.require_finite("exact_limit_covariance")
    n = params.n
    theta = derived_constants(params).tanh_j
    d = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]).astype(np.float64)
    return (theta**d + theta ** (n - d)) / (1.0 + theta**n) / n


def khat_norm_bound(params: ModelParams) -> float:
    """Gershgorin bound for the limit covariance: (1/N) * susceptibility row-sum bound."""
    return susceptibility_closed_form_bound(params) / params.n


def subcritical_norm_bound(params: ModelParams, m: int) -> tuple:
    """(deterministic ||K_hat||_1 bound, stochastic E[||K||_1^2] bound at M=m).

    The stochastic bound is
    (sqrt(N^2/M * c) + 1/sqrt(N) + chi_term/sqrt(N))^2 with c the per-site
    log-Sobolev constant factor and chi_term the closed-form correlation sum.
    """
    j_hat = params.require_finite("subcritical_norm_bound")
    n = params.n
    det_bound = khat_norm_bound(params)
    c_per_site = lsi_constant_bound(j_hat, n) / n
    chi_term = susceptibility_closed_form_bound(params) - 1.0
    stoch = (math.sqrt(n**2 / m * c_per_site) + 1.0 / math.sqrt(n) + chi_term / math.sqrt(n)) ** 2
    return det_bound, stoch


# ---------------------------------------------------------------------------
# Chain-driven covariance runs
# ---------------------------------------------------------------------------


@dataclass
class CovarianceRun:
    """Covariance of one chain plus batch-means error bars and hit bookkeeping."""

    n: int
    m: int
    matrix: np.ndarray
    batch_matrices: np.ndarray  # (batches, n, n)
    hit_index: Optional[int] = None
    initial_plus_components: Optional[int] = None

    @property
    def norm1(self) -> float:
        return gershgorin_norm(self.matrix)

    @property
    def batch_norms(self) -> np.ndarray:
        return np.abs(self.batch_matrices).sum(axis=2).max(axis=1)

    @property
    def norm1_batch_mean(self) -> float:
        return float(self.batch_norms.mean())

    @property
    def norm1_batch_se(self) -> float:
        norms = self.batch_norms
        return float(norms.std(ddof=1) / math.sqrt(len(norms)))

    def entry_batch_se(self) -> np.ndarray:
        """Per-entry standard error from the batch means."""
        k = self.batch_matrices.shape[0]
        return self.batch_matrices.std(axis=0, ddof=1) / math.sqrt(k)


def _hypercube_states(n: int, m: int, start_bits: int, gen: np.random.Generator) -> np.ndarray:
    """Exact Wolff chain at j_hat = 0: one uniform site flips per step,
    generated as a cumulative XOR (same law as the stack sampler)."""
    flips = np.uint64(1) << gen.integers(0, n, size=m - 1).astype(np.uint64)
    states = np.empty(m, dtype=np.uint64)
    states[0] = start_bits
    states[1:] = flips
    return np.bitwise_xor.accumulate(states)


def run_covariance_chain(
    params: ModelParams,
    m: int,
    kind: str,
    rng,
    initial: Optional[Configuration] = None,
    batches: int = DEFAULT_BATCHES,
    block: int = 8192,
) -> CovarianceRun:
    """Drive one chain for m states and stream-accumulate its covariance.

    Finite coupling defaults to an exact stationary start; the critical point
    defaults to a uniform random start and records the aligned hitting index.
    """
    gen = as_generator(rng)
    n = params.n
    if initial is None:
        if params.is_critical:
            initial = Configuration(int(gen.integers(0, 1 << n)), n)
        else:
            initial = sample_stationary(params, gen)

    boundaries = np.linspace(0, m, batches + 1, dtype=np.int64)
    batch_accums = [CovarianceAccumulator(n) for _ in range(batches)]

    dec0 = None
    hit_index = None
    if params.is_critical:
        dec0 = decompose(initial).plus_count
        if initial.is_aligned:
            hit_index = 1

    if kind == WOLFF and not params.is_critical and float(params.j_hat) == 0.0:
        states = _hypercube_states(n, m, initial.bits, gen)
        for b in range(batches):
            seg = states[boundaries[b] : boundaries[b + 1]]
            batch_accums[b].add_spins(decode_states(seg, n))
    else:
        bond_prob = derived_constants(params).bond_prob
        bits = initial.bits
        buf = np.empty(block, dtype=np.uint64)
        filled = 0
        produced = 0

        def flush():
            nonlocal filled
            if filled == 0:
                return
            seg = buf[:filled]
            start = produced - filled
            lo = 0
            while lo < filled:
                b = np.searchsorted(boundaries, start + lo, side="right") - 1
                hi = min(filled, int(boundaries[b + 1] - start))
                batch_accums[b].add_spins(decode_states(seg[lo:hi], n))
                lo = hi
            filled = 0

        if kind == WOLFF:
            full = (1 << n) - 1
            for k in range(m):
                if k > 0:
                    bits = _wolff_step_bits(bits, n, bond_prob, gen)
                if params.is_critical and hit_index is None and (bits == 0 or bits == full):
                    hit_index = k + 1
                buf[filled] = bits
                filled += 1
                produced += 1
                if filled == block:
                    flush()
        elif kind == GLAUBER:
            cfg = initial
            for k in range(m):
                if k > 0:
                    cfg = glauber_step(cfg, params, gen)
                buf[filled] = cfg.bits
                filled += 1
                produced += 1
                if filled == block:
                    flush()
        else:
            raise ValueError(f"unknown dynamics kind {kind!r}")
        flush()

    total = CovarianceAccumulator(n)
    for acc in batch_accums:
        total.merge(acc)
    nonempty = [acc for acc in batch_accums if acc.count > 0]
    batch_matrices = np.stack([acc.matrix() for acc in nonempty])
    return CovarianceRun(
        n=n,
        m=m,
        matrix=total.matrix(),
        batch_matrices=batch_matrices,
        hit_index=hit_index,
        initial_plus_components=dec0,
    )


# ---------------------------------------------------------------------------
# Condensation experiment grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentCell:
    n: int
    j_hat: object  # float or INFINITE
    m: int


@dataclass(frozen=True)
class CellResult:
    """One grid cell x seed: spectra, norms, bounds, and prediction pass flags.

    pass_41: fixed-point spectra: at the critical point lambda1 >= 1 - N/M
    and lambda2 <= N/M; at j_hat = 0, |lambda1 - 1/N| <= lambda1_tol; vacuous
    (True) elsewhere.
    pass_42: subcritical limit: every covariance entry within 4 batch
    standard errors of the exact limit K_hat; vacuous at the critical point.
    pass_43: ||K||_1^2 below the closed-form double-limit bound; vacuous at
    the critical point.
    """

    n: int
    j_hat: object
    m: int
    seed: int
    lambda1: float
    lambda2: float
    norm1: float
    khat_norm_bound: float
    thm43_bound: float
    pass_41: bool
    pass_42: bool
    pass_43: bool

    def j_label(self) -> str:
        return "inf" if self.j_hat is INFINITE else repr(float(self.j_hat))


def run_condensation_cell(cell: ExperimentCell, seed: int, lambda1_tol: float = 0.01, stream: int = 0) -> CellResult:
    """Run one (n, j_hat, m) cell from one seed and evaluate the predictions."""
    params = ModelParams(cell.n, cell.j_hat)
    rng = RngStream(seed, stream)
    run = run_covariance_chain(params, cell.m, WOLFF, rng)
    return evaluate_cell(cell, run, seed, lambda1_tol=lambda1_tol)


def evaluate_cell(cell: ExperimentCell, run: CovarianceRun, seed: int, lambda1_tol: float = 0.01) -> CellResult:
    """Evaluate the closed-form predictions for an already-run covariance chain."""
    params = ModelParams(cell.n, cell.j_hat)
    values = eigenvalues_symmetric(run.matrix, k=2)
    lam1, lam2 = float(values[0]), float(values[1])
    norm1 = run.norm1

    if params.is_critical:
        pass_41 = lam1 >= 1.0 - cell.n / cell.m - 1e-12 and lam2 <= cell.n / cell.m + 1e-12
        return CellResult(
            n=cell.n, j_hat=cell.j_hat, m=cell.m, seed=seed,
            lambda1=lam1, lambda2=lam2, norm1=norm1,
            khat_norm_bound=math.nan, thm43_bound=math.nan,
            pass_41=pass_41, pass_42=True, pass_43=True,
        )

    det_bound, stoch_bound = subcritical_norm_bound(params, cell.m)
    j = float(params.j_hat)
    pass_41 = abs(lam1 - 1.0 / cell.n) <= lambda1_tol if j == 0.0 else True
    k_hat = exact_limit_covariance(params)
    pass_42 = bool(np.all(np.abs(run.matrix - k_hat) <= 4.0 * run.entry_batch_se() + 1e-9))
    pass_43 = norm1**2 <= stoch_bound + 1e-12
    return CellResult(
        n=cell.n, j_hat=cell.j_hat, m=cell.m, seed=seed,
        lambda1=lam1, lambda2=lam2, norm1=norm1,
        khat_norm_bound=det_bound, thm43_bound=stoch_bound,
        pass_41=pass_41, pass_42=pass_42, pass_43=pass_43,
    )


def condensation_experiment(cells: Iterable[ExperimentCell], seeds: Iterable[int], lambda1_tol: float = 0.01) -> list:
    """Run the grid in deterministic order; one CellResult per (cell, seed)."""
    results = []
    for idx, cell in enumerate(list(cells)):
        for seed in seeds:
            results.append(run_condensation_cell(cell, seed, lambda1_tol=lambda1_tol, stream=idx))
    return results


CSV_COLUMNS = [
    "n", "j_hat", "m", "seed", "lambda1", "lambda2", "norm1",
    "khat_norm_bound", "thm43_bound", "pass_41", "pass_42", "pass_43",
]


def result_row(result: CellResult) -> list:
    def num(x):
        return "nan" if isinstance(x, float) and math.isnan(x) else repr(float(x))

    return [
        str(result.n), result.j_label(), str(result.m), str(result.seed),
        num(result.lambda1), num(result.lambda2), num(result.norm1),
        num(result.khat_norm_bound), num(result.thm43_bound),
        str(int(result.pass_41)), str(int(result.pass_42)), str(int(result.pass_43)),
    ]
