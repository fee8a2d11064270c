"""Validated absorbing-chain model, exact finite-horizon conditioned occupation
formulas, and trajectory simulation.

The chain lives on transient states {1, ..., d} with substochastic transition
matrix Q; the absorption probability of state i is the row leakage
R[i] = 1 - sum(Q[i, :]).  All conditioned quantities are ratios of terms with
identical exponential decay, so the implementation keeps running vectors
renormalized and forms ratios with matched scale factors.

State indices in the public API are 1-based, matching the usual notation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    NegativeEntry,
    NoSurvivors,
    NotADistribution,
    NotTransient,
    RowSumExceedsOne,
    ShapeMismatch,
    SurvivalUnderflow,
)

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class SubstochasticModel:
    """Validated substochastic chain: matrix Q, initial row distribution pi,
    derived absorption column R."""

    Q: np.ndarray
    pi: np.ndarray
    R: np.ndarray
    d: int

    def __post_init__(self):
        self.Q.setflags(write=False)
        self.pi.setflags(write=False)
        self.R.setflags(write=False)


@dataclass(frozen=True)
class OccupationEstimate:
    """Expected occupation fraction in [0, 1] at horizon n."""

    value: float
    n: int
    stderr: Optional[float] = None
    trials_surviving: Optional[int] = None


def validate(Q, pi=None, tol: float = DEFAULT_TOL) -> SubstochasticModel:
    """Validate raw inputs and build a model with the absorption column derived
    from the row sums of Q.

    Raises NegativeEntry, RowSumExceedsOne, NotADistribution, ShapeMismatch or
    NotTransient on bad input.
    """
    Q = np.array(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ShapeMismatch(f"Q must be square, got shape {Q.shape}")
    d = Q.shape[0]
    if d < 1:
        raise ShapeMismatch("Q must have at least one state")
    if pi is None:
        pi = np.full(d, 1.0 / d)
    pi = np.array(pi, dtype=float).reshape(-1)
    if pi.shape[0] != d:
        raise ShapeMismatch(f"pi has length {pi.shape[0]}, expected {d}")

    if np.any(Q < 0):
        i, j = np.argwhere(Q < 0)[0]
        raise NegativeEntry(f"Q[{i + 1},{j + 1}] = {Q[i, j]} is negative")
    row_sums = Q.sum(axis=1)
    if np.any(row_sums > 1.0 + tol):
        i = int(np.argmax(row_sums))
        raise RowSumExceedsOne(f"row {i + 1} of Q sums to {row_sums[i]} > 1")
    if np.any(pi < -tol) or abs(pi.sum() - 1.0) > tol:
        raise NotADistribution(f"pi must be a probability vector, got sum {pi.sum()}")
    pi = np.clip(pi, 0.0, None)

    R = np.clip(1.0 - row_sums, 0.0, None)
    _check_transient(Q, R)
    return SubstochasticModel(Q=Q, pi=pi, R=R, d=d)


def _check_transient(Q: np.ndarray, R: np.ndarray) -> None:
    """Every state must reach a state with positive absorption probability.

    Pure graph reachability on the support of Q; no numerics involved.
    """
    d = Q.shape[0]
    reach = R > 0
    # backward closure: a state is good if some successor is good
    changed = True
    while changed:
        changed = False
        for i in range(d):
            if not reach[i] and np.any((Q[i] > 0) & reach):
                reach[i] = True
                changed = True
    if not reach.all():
        bad = [i + 1 for i in range(d) if not reach[i]]
        raise NotTransient(f"states {bad} cannot reach absorption")


# --- exact finite-horizon formulas -------------------------------------


def _forward_backward(model: SubstochasticModel, n: int):
    """Row iterates pi Q^r and column iterates Q^r 1, each L1-renormalized.

    Returns (A, B) where A[r] is pi Q^r rescaled to sum 1 and B[r] is Q^r 1
    rescaled to max 1.  Scale factors are not needed by callers: every
    conditioned quantity is a ratio in which they cancel exactly.
    """
    Q = model.Q
    d = model.d
    A = np.empty((n + 1, d))
    B = np.empty((n + 1, d))
    a = model.pi.copy()
    A[0] = a
    for r in range(1, n + 1):
        a = a @ Q
        s = a.sum()
        if s == 0.0:
            raise SurvivalUnderflow(f"pi Q^{r} is exactly zero")
        a = a / s
        A[r] = a
    b = np.ones(d)
    B[0] = b
    for r in range(1, n + 1):
        b = Q @ b
        m = b.max()
        if m == 0.0:
            raise SurvivalUnderflow(f"Q^{r} 1 is exactly zero")
        b = b / m
        B[r] = b
    return A, B


def occupation_profile(model: SubstochasticModel, n: int) -> np.ndarray:
    """Per-state conditioned occupation fractions at horizon n.

    Entry j-1 is E_pi[#{m <= n : X_m = j} / (n+1) | T > n], computed exactly
    from the ratio pi Q^r e_j e_j' Q^{n-r} 1 / pi Q^n 1: for each split point r
    the rescaled forward and backward vectors give the conditional law of X_r
    given survival, so no explicit scale bookkeeping is required.
    """
    if n < 0:
        raise ValueError("horizon n must be >= 0")
    A, B = _forward_backward(model, n)
    out = np.zeros(model.d)
    for r in range(n + 1):
        denom = float(A[r] @ B[n - r])
        if denom == 0.0:
            raise SurvivalUnderflow(f"survival probability vanished at horizon {n}")
        out += A[r] * B[n - r] / denom
    return out / (n + 1)


def survival_probability(model: SubstochasticModel, n: int) -> float:
    """P(T > n) = pi Q^n 1, accumulated in log scale.

    May underflow to 0.0 for very large n; use log_survival_probability when
    the logarithm is needed.
    """
    return math.exp(log_survival_probability(model, n))


def log_survival_probability(model: SubstochasticModel, n: int) -> float:
    if n < 0:
        raise ValueError("horizon n must be >= 0")
    a = model.pi.copy()
    log_s = 0.0
    for _ in range(n):
        a = a @ model.Q
        s = a.sum()
        if s == 0.0:
            raise SurvivalUnderflow("survival probability is exactly zero")
        log_s += math.log(s)
        a = a / s
    return log_s


def finite_horizon_state_occupation(model: SubstochasticModel, j: int, n: int) -> OccupationEstimate:
    """Exact conditioned occupation fraction of state j (1-based) at horizon n."""
    if not 1 <= j <= model.d:
        raise ShapeMismatch(f"state index {j} outside 1..{model.d}")
    profile = occupation_profile(model, n)
    return OccupationEstimate(value=float(profile[j - 1]), n=n)


def finite_horizon_block_occupation(model: SubstochasticModel, states, n: int) -> OccupationEstimate:
    """Conditioned occupation fraction of a set of states (1-based indices).

    Accumulated as the sum of per-state values in increasing state order, so it
    matches the sum of finite_horizon_state_occupation results exactly.
    """
    states = sorted(set(int(s) for s in states))
    for s in states:
        if not 1 <= s <= model.d:
            raise ShapeMismatch(f"state index {s} outside 1..{model.d}")
    profile = occupation_profile(model, n) if states else None
    total = 0.0
    for s in states:
        total += float(profile[s - 1])
    return OccupationEstimate(value=total, n=n)


def finite_horizon_observable(model: SubstochasticModel, f: Sequence[float], n: int) -> float:
    """Conditioned time average of observable f at horizon n."""
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.shape[0] != model.d:
        raise ShapeMismatch(f"observable has length {f.shape[0]}, expected {model.d}")
    profile = occupation_profile(model, n)
    return float(f @ profile)


# --- simulation ---------------------------------------------------------


def _trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    # per-trajectory stream keyed on (seed, index): identical results
    # regardless of how trajectories are distributed over workers
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=(int(seed), int(index)))))


def _uniform_stream(rng: np.random.Generator, chunk: int = 256):
    """Yield uniforms one by one, drawn in chunks for speed.

    Chunked draws consume the PCG64 stream in the same order as repeated
    scalar draws, so the trajectory is a function of (seed, index) alone.
    """
    while True:
        for u in rng.random(chunk).tolist():
            yield u


def _transition_tables(model: SubstochasticModel):
    # cumulative rows of (R | Q): index 0 absorbs, 1..d are transient targets
    cum = np.cumsum(np.hstack([model.R[:, None], model.Q]), axis=1)
    return [row.tolist() for row in cum], np.cumsum(model.pi).tolist()


def simulate_trajectory(model: SubstochasticModel, seed: int, _index: int = 0):
    """Sample one trajectory; returns (path, T) with 1-based states.

    path holds the visited transient states X_0, ..., X_{T-1}; T is the
    absorption step.  Deterministic given (seed, _index).
    """
    return _simulate_capped(model, seed, _index, None)


def monte_carlo_occupation(model: SubstochasticModel, n: int, trials: int, seed: int):
    """Monte Carlo estimate of the per-state conditioned occupation at horizon n.

    Only trajectories with T > n contribute.  Returns a list of d
    OccupationEstimate values with standard errors and the surviving count.
    Raises NoSurvivors when no trajectory survives.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = model.d
    sums = np.zeros(d)
    sq_sums = np.zeros(d)
    surviving = 0
    tables = _transition_tables(model)
    for i in range(trials):
        path, T = _simulate_capped(model, seed, i, n + 1, tables)
        if T <= n:
            continue
        surviving += 1
        counts = np.bincount(np.asarray(path[: n + 1]) - 1, minlength=d) / (n + 1)
        sums += counts
        sq_sums += counts * counts
    if surviving == 0:
        raise NoSurvivors(f"none of {trials} trajectories survived past n={n}")
    means = sums / surviving
    if surviving > 1:
        var = (sq_sums - surviving * means**2) / (surviving - 1)
        stderr = np.sqrt(np.clip(var, 0.0, None) / surviving)
    else:
        stderr = np.full(d, np.inf)
    return [
        OccupationEstimate(value=float(means[j]), n=n, stderr=float(stderr[j]), trials_surviving=surviving)
        for j in range(d)
    ]


def _simulate_capped(model: SubstochasticModel, seed: int, index: int, cap, tables=None):
    """Sample one trajectory, optionally stopping once cap states are seen.

    Returns (path, T); with a cap, T = cap means "still alive after cap
    states".  With cap None, runs until absorption (almost surely finite by
    transience).
    """
    from bisect import bisect_right

    if tables is None:
        tables = _transition_tables(model)
    cum, pi_cum = tables
    uniforms = _uniform_stream(_trajectory_rng(seed, index))
    state = bisect_right(pi_cum, next(uniforms))
    if state >= model.d:
        state = model.d - 1
    path = [state + 1]
    while cap is None or len(path) < cap:
        nxt = bisect_right(cum[state], next(uniforms))
        if nxt == 0:
            return path, len(path)
        state = min(nxt - 1, model.d - 1)
        path.append(state + 1)
    return path, cap
