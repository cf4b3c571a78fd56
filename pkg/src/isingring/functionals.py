"""Dirichlet forms, entropy/variance functionals, explicit log-Sobolev and
Poincare constants for the Wolff chain, inequality certification, and the
closed-form ergodic-average error bounds.

Functions on the configuration space are plain length-2^N float vectors in
binary state order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import GibbsMeasure
from .kernel import SpectralDecomposition, TransitionKernel
from .randomness import as_generator

SLACK_TOLERANCE = 1e-10


def _as_vector(f, size: int) -> np.ndarray:
    arr = np.asarray(f, dtype=np.float64)
    if arr.shape != (size,):
        raise ValueError(f"expected a function vector of length {size}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("function vector must be finite")
    return arr


def dirichlet_form(f, kernel: TransitionKernel, measure: GibbsMeasure) -> float:
    """(1/2) sum_{x,y} (f(x)-f(y))^2 P(y,x) mu(y); zero exactly on constants."""
    if kernel.n != measure.n:
        raise ValueError("kernel and measure sizes differ")
    vec = _as_vector(f, kernel.size)
    diffs = vec[None, :] - vec[:, None]
    return float(0.5 * (measure.probabilities[:, None] * kernel.matrix * diffs**2).sum())


def dirichlet_form_batch(fs: np.ndarray, kernel: TransitionKernel, measure: GibbsMeasure) -> np.ndarray:
    """Dirichlet forms of many functions at once via <f, (I-P)f>_mu.

    Identical to the double-sum definition for reversible kernels (the
    identity is itself a tested invariant); used for bulk certification.
    """
    mu = measure.probabilities
    resid = fs - fs @ kernel.matrix.T
    return np.einsum("rx,x,rx->r", fs, mu, resid)


def entropy(f, measure: GibbsMeasure) -> float:
    """Ent(f) = E[f log f] - E[f] log E[f] for nonnegative f, with 0 log 0 = 0.

    Negative entries are rejected rather than clamped: a negative input here
    means an upstream bug that should not be hidden.
    """
    vec = _as_vector(f, len(measure.probabilities))
    if (vec < 0).any():
        raise ValueError("entropy requires a nonnegative function")
    mu = measure.probabilities
    flogf = np.where(vec > 0, vec * np.log(np.where(vec > 0, vec, 1.0)), 0.0)
    mean = float(vec @ mu)
    if mean == 0.0:
        return 0.0
    return float(flogf @ mu) - mean * math.log(mean)


def entropy_batch(fs: np.ndarray, measure: GibbsMeasure) -> np.ndarray:
    if (fs < 0).any():
        raise ValueError("entropy requires nonnegative functions")
    mu = measure.probabilities
    flogf = np.where(fs > 0, fs * np.log(np.where(fs > 0, fs, 1.0)), 0.0)
    means = fs @ mu
    out = flogf @ mu
    pos = means > 0
    out[pos] -= means[pos] * np.log(means[pos])
    return out


def variance(f, measure: GibbsMeasure) -> float:
    """E[f^2] - (E[f])^2 under the Gibbs measure."""
    vec = _as_vector(f, len(measure.probabilities))
    mu = measure.probabilities
    mean = float(vec @ mu)
    return float(vec**2 @ mu) - mean * mean


def variance_batch(fs: np.ndarray, measure: GibbsMeasure) -> np.ndarray:
    mu = measure.probabilities
    means = fs @ mu
    return fs**2 @ mu - means**2


def lsi_constant_bound(j_hat: float, n: int) -> float:
    """Explicit log-Sobolev constant e^{2J}(e^{4J}+1)(1/2 + J e^{(e^{2J}-1)/2}) N.

    Monotone increasing in both arguments; equals exactly N at j_hat = 0 (the
    classical hypercube random-walk constant).
    """
    j = float(j_hat)
    if j < 0 or not math.isfinite(j):
        raise ValueError("the log-Sobolev bound needs a finite nonnegative coupling")
    return math.exp(2 * j) * (math.exp(4 * j) + 1.0) * (0.5 + j * math.exp((math.exp(2 * j) - 1.0) / 2.0)) * n


def poincare_constant_bound(j_hat: float, n: int) -> float:
    """Half the log-Sobolev constant (the standard linearization)."""
    return lsi_constant_bound(j_hat, n) / 2.0


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float
    constant: float
    family: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -SLACK_TOLERANCE


def certify_lsi(f, kernel: TransitionKernel, measure: GibbsMeasure, constant: Optional[float] = None) -> InequalityReport:
    """Check Ent(f^2) <= constant * E(f) for one function (any sign)."""
    if constant is None:
        constant = lsi_constant_bound(kernel.params.require_finite("certify_lsi"), kernel.n)
    vec = _as_vector(f, kernel.size)
    lhs = entropy(vec**2, measure)
    rhs = constant * dirichlet_form(vec, kernel, measure)
    return InequalityReport(lhs=lhs, rhs=rhs, constant=constant, family="lsi")


def certify_poincare(f, kernel: TransitionKernel, measure: GibbsMeasure, constant: Optional[float] = None) -> InequalityReport:
    """Check Var(f) <= constant * E(f) for one function."""
    if constant is None:
        constant = poincare_constant_bound(kernel.params.require_finite("certify_poincare"), kernel.n)
    vec = _as_vector(f, kernel.size)
    lhs = variance(vec, measure)
    rhs = constant * dirichlet_form(vec, kernel, measure)
    return InequalityReport(lhs=lhs, rhs=rhs, constant=constant, family="poincare")


def ergodic_l2_bound(j_hat: float, n: int, m: int, f_norm: float) -> tuple:
    """Closed-form error bounds for M-step ergodic averages started from mu.

    Returns (averaged-operator bound, trajectory bound):
    the L^2 distance of (1/M) sum_k P^k f from E[f] is at most
    (||f||/M)(2 + C_PI), and the mean squared error of the time average along
    a stationary trajectory is at most (||f||^2/M) C_LS.
    """
    if m < 1:
        raise ValueError("need m >= 1 steps")
    avg_bound = (f_norm / m) * (2.0 + poincare_constant_bound(j_hat, n))
    traj_bound = (f_norm**2 / m) * lsi_constant_bound(j_hat, n)
    return avg_bound, traj_bound


def geometric_sum_helpers(m: int, x: float) -> tuple:
    """The pair (C(M,x), C_hat(M,x)) used in the ergodic-average analysis.

    C(M,x) = sum_{k=1}^M x^k and
    C_hat(M,x) = 1 + (2/M)(x(M-1) - x^2 M + x^{M+1}) / (1-x)^2,
    for x in [-1, 1); C_hat is monotone increasing on that interval and is
    bounded by 2/(1-x) on [0, 1).
    """
    if m < 1:
        raise ValueError("need m >= 1")
    if not -1.0 <= x < 1.0:
        raise ValueError("x must lie in [-1, 1)")
    if x == 0.0:
        return 0.0, 1.0
    c = x * (1.0 - x**m) / (1.0 - x)
    c_hat = 1.0 + (2.0 / m) * (x * (m - 1) - x**2 * m + x ** (m + 1)) / (1.0 - x) ** 2
    return c, c_hat


# ---------------------------------------------------------------------------
# Test-function families for the certification sweep
# ---------------------------------------------------------------------------


def character_function(n: int, sites) -> np.ndarray:
    """chi_S(sigma) = prod_{i in S} sigma_i over all states in binary order."""
    states = np.arange(1 << n, dtype=np.int64)
    out = np.ones(1 << n)
    for s in sites:
        out *= 2.0 * ((states >> (s - 1)) & 1) - 1.0
    return out


def indicator_function(n: int, state_bits: int) -> np.ndarray:
    out = np.zeros(1 << n)
    out[state_bits] = 1.0
    return out


def structured_test_functions(decomposition: SpectralDecomposition, n: int) -> list:
    """(family, vector) pairs probing the inequalities where they are tightest:
    characters, indicators, exact eigenfunctions, and |eigenfunction| to
    stress the entropy side."""
    out = [
        ("character", character_function(n, [1])),
        ("character", character_function(n, [1, 2])),
        ("character", character_function(n, [1, (n // 2) + 1])),
        ("indicator", indicator_function(n, 0)),
        ("indicator", indicator_function(n, (1 << n) - 1)),
        ("indicator", indicator_function(n, (1 << n) // 3)),
    ]
    basis = decomposition.basis
    out.append(("eigenfunction", basis[:, 1].copy()))
    out.append(("eigenfunction", basis[:, min(2, basis.shape[1] - 1)].copy()))
    out.append(("eigenfunction", basis[:, -1].copy()))
    out.append(("abs-eigenfunction", np.abs(basis[:, 1])))
    out.append(("abs-eigenfunction", np.abs(basis[:, -1])))
    return out


def ratio_ascent_adversary(
    kernel: TransitionKernel,
    measure: GibbsMeasure,
    rng,
    target: str = "lsi",
    restarts: int = 100,
    sweeps: int = 40,
    step: float = 0.25,
) -> np.ndarray:
    """Coordinate-ascent local search for a function with a large lhs/rhs ratio.

    This is not a certified optimum (the exact log-Sobolev constant is out of
    scope); it only supplies adversarial inputs for one-sided certification.
    """
    gen = as_generator(rng)
    mu = measure.probabilities
    size = kernel.size

    def ratio(vec: np.ndarray) -> float:
        energy = dirichlet_form(vec, kernel, measure)
        if energy <= 1e-14:
            return -math.inf
        if target == "lsi":
            return entropy(vec**2, measure) / energy
        return variance(vec, measure) / energy

    best_vec = gen.standard_normal(size)
    best_ratio = -math.inf
    for _ in range(restarts):
        vec = gen.standard_normal(size)
        vec /= math.sqrt(float(vec**2 @ mu))
        current = ratio(vec)
        for _ in range(sweeps):
            x = int(gen.integers(size))
            for delta in (step, -step):
                trial = vec.copy()
                trial[x] += delta
                trial /= math.sqrt(float(trial**2 @ mu))
                r = ratio(trial)
                if r > current:
                    vec, current = trial, r
                    break
        if current > best_ratio:
            best_ratio, best_vec = current, vec
    return best_vec


@dataclass(frozen=True)
class SweepResult:
    """One certification outcome: (n, j_hat, family, lhs, rhs, slack, pass)."""

    n: int
    j_hat: float
    family: str
    kind: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -SLACK_TOLERANCE


def certification_sweep(
    kernel: TransitionKernel,
    measure: GibbsMeasure,
    decomposition: SpectralDecomposition,
    n_random: int,
    rng,
    adversarial: bool = True,
) -> list:
    """Certify the LSI and Poincare inequalities on random + structured functions.

    Random functions have i.i.d. standard normal components; the sweep is
    vectorized (quadratic-form Dirichlet energies). Returns SweepResult rows.
    """
    gen = as_generator(rng)
    params = kernel.params
    j_hat = params.require_finite("certification_sweep")
    n = kernel.n
    c_ls = lsi_constant_bound(j_hat, n)
    c_pi = poincare_constant_bound(j_hat, n)

    batches = [("random", gen.standard_normal((n_random, kernel.size)))]
    structured = structured_test_functions(decomposition, n)
    for family, vec in structured:
        batches.append((family, vec[None, :]))
    if adversarial:
        adv = ratio_ascent_adversary(kernel, measure, gen, target="lsi", restarts=20, sweeps=30)
        batches.append(("adversarial", adv[None, :]))
        adv_p = ratio_ascent_adversary(kernel, measure, gen, target="poincare", restarts=20, sweeps=30)
        batches.append(("adversarial", adv_p[None, :]))

    results = []
    for family, fs in batches:
        energies = dirichlet_form_batch(fs, kernel, measure)
        ent = entropy_batch(fs**2, measure)
        var = variance_batch(fs, measure)
        for k in range(fs.shape[0]):
            results.append(SweepResult(n=n, j_hat=j_hat, family=family, kind="lsi", lhs=float(ent[k]), rhs=float(c_ls * energies[k])))
            results.append(SweepResult(n=n, j_hat=j_hat, family=family, kind="poincare", lhs=float(var[k]), rhs=float(c_pi * energies[k])))
    return results
