"""Closed-form conditioned limits: the irreducible case, the block-level and
state-level formulas for reducible chains, the scalar-chain and single-path
shortcuts, and the end-to-end pipeline including the periodic lift.

The reducible-case formula weights each dominant admissible path theta by

    alpha_theta * pi_mass(theta) * prod over below-maximum positions of
    1 / (rho_max - rho_u)

and distributes mass over blocks in proportion to the weights of the dominant
paths passing through them, divided by h_max (the shared count of
root-attaining positions), which makes the block masses sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import (
    AssumptionViolation,
    NotIrreducible,
    NotScalarChain,
    NotSinglePath,
    SurvivalUnderflow,
)
from .model import SubstochasticModel, validate
from .paths import AdmissiblePath, PathFamily, classify_path, enumerate_paths, maximal_paths
from .spectral import SpectrumSet, perron_block, spectrum_set, _power_iteration
from .structure import FrobeniusForm, _is_strongly_connected, aperiodic_lift, condense

ALPHA_TOL = 1e-12
RHO_EQ_TOL = 1e-9


@dataclass(frozen=True)
class AssumptionReport:
    scalar_ok: bool
    witness_path: Optional[AdmissiblePath]
    alpha_values: Dict[Tuple[int, ...], float]
    violations: Tuple[str, ...]
    used_pi_restriction: bool

    @property
    def certified(self) -> bool:
        return self.scalar_ok and self.witness_path is not None


@dataclass(frozen=True)
class QuasiErgodicResult:
    block_measure: np.ndarray
    state_measure: np.ndarray  # normal-form order
    state_measure_input: np.ndarray  # caller's original state order
    perm: Tuple[int, ...]
    rho_max: float
    h_max: int
    report: AssumptionReport


def irreducible_qed(Q) -> np.ndarray:
    """Limit occupation measure of an irreducible chain: the componentwise
    product u_j v_j of the normalized left and right Perron eigenvectors.

    The cyclic case gives the same answer: u and v are shared between the
    chain and its aperiodic power, and only u and v enter."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise NotIrreducible("expected a square matrix")
    if not _is_strongly_connected(Q):
        raise NotIrreducible("matrix is not irreducible")
    s = perron_block(Q)
    return s.u * s.v


def quasi_stationary_distribution(Q) -> np.ndarray:
    """Left eigenvector of Q for its spectral radius, normalized to sum 1.

    Power iteration runs on (Q + I)^T so that periodic chains still converge;
    the shift moves every eigenvalue by 1 without changing eigenvectors.
    """
    Q = np.asarray(Q, dtype=float)
    _, x = _power_iteration(Q.T + np.eye(Q.shape[0]), tol=1e-14, max_iter=10**6)
    return x / x.sum()


def check_assumptions(
    form: FrobeniusForm,
    spectra: SpectrumSet,
    family: PathFamily,
    alpha_tol: float = ALPHA_TOL,
) -> AssumptionReport:
    """Certify applicability of the closed-form limit.

    Two requirements: every block whose root falls below the dominant root
    and which lies on a path that carries initial mass must be scalar, and
    some dominant path must have a nonzero combined weight alpha * pi_mass
    (decided relative to the largest such weight, to avoid certifying an
    ill-conditioned limit)."""
    violations: List[str] = []
    relevant = family.all if not family.pi_restricted else tuple(p for p in family.all if p.pi_mass != 0.0)
    scalar_ok = True
    flagged = set()
    for p in relevant:
        for t in p.theta:
            if not spectra.attains(t, family.rho_max_eff) and not spectra.blocks[t - 1].scalar:
                if t not in flagged:
                    flagged.add(t)
                    violations.append(
                        f"block {t} has root {spectra.rho(t):.6g} below the dominant root "
                        f"but is not scalar (size {form.block_sizes[t - 1]})"
                    )
                scalar_ok = False
    alpha_values = {p.theta: p.alpha * p.pi_mass for p in family.maximal}
    max_weight = max((abs(w) for w in alpha_values.values()), default=0.0)
    witness = None
    if max_weight > 0.0:
        for p in family.maximal:
            if abs(alpha_values[p.theta]) > alpha_tol * max_weight:
                witness = p
                break
    if witness is None:
        violations.append("every dominant path has vanishing weight alpha * pi_mass")
    return AssumptionReport(
        scalar_ok=scalar_ok,
        witness_path=witness,
        alpha_values=alpha_values,
        violations=tuple(violations),
        used_pi_restriction=family.pi_restricted,
    )


def _path_weight(p: AdmissiblePath, spectra: SpectrumSet, rho_max: float) -> float:
    w = p.alpha * p.pi_mass
    for pos in p.H_minus:
        w /= rho_max - spectra.rho(p.theta[pos - 1])
    return w


def block_qed(
    form: FrobeniusForm,
    spectra: SpectrumSet,
    family: PathFamily,
    report: Optional[AssumptionReport] = None,
) -> np.ndarray:
    """Block-level limit measure.

    Blocks whose root falls below the dominant root, and blocks missed by
    every dominant path, get exactly zero."""
    if report is None:
        report = check_assumptions(form, spectra, family)
    if not report.certified:
        raise AssumptionViolation("closed-form limit is not certified: " + "; ".join(report.violations), report=report)
    rho_max = family.rho_max_eff
    weights = {p.theta: _path_weight(p, spectra, rho_max) for p in family.maximal}
    denom = family.h_max * sum(weights.values())
    out = np.zeros(form.k)
    for ell in range(1, form.k + 1):
        if not spectra.attains(ell, rho_max):
            continue
        group = family.per_block[ell]
        if not group:
            continue
        out[ell - 1] = sum(weights[p.theta] for p in group) / denom
    return out


def state_qed(
    form: FrobeniusForm,
    spectra: SpectrumSet,
    family: PathFamily,
    report: Optional[AssumptionReport] = None,
) -> np.ndarray:
    """State-level limit measure in normal-form order: within a block, the
    block mass is spread proportionally to u_t v_t (which sums to one)."""
    blocks = block_qed(form, spectra, family, report)
    out = np.zeros(sum(form.block_sizes))
    for ell in range(1, form.k + 1):
        if blocks[ell - 1] == 0.0:
            continue
        s = spectra.blocks[ell - 1]
        for t, p in enumerate(form.index_sets[ell - 1]):
            out[p] = s.u[t] * s.v[t] * blocks[ell - 1]
    return out


def scalar_case_qed(
    form: FrobeniusForm,
    spectra: SpectrumSet,
    family: PathFamily,
    pi_nf: np.ndarray,
) -> np.ndarray:
    """Independent evaluation for chains whose blocks are all 1x1.

    Weights are rebuilt from raw matrix entries: the path weight is the
    initial mass of the start state times the product of connecting entries,
    with below-maximum diagonal entries contributing 1/(rho_max - q_uu).
    No eigenvector machinery is involved; must agree with block_qed.
    """
    if any(size != 1 for size in form.block_sizes):
        raise NotScalarChain("scalar evaluation requires all blocks of size 1")
    Q = form.permuted_Q
    pi_nf = np.asarray(pi_nf, dtype=float)
    rho_max = family.rho_max_eff

    def raw_weight(theta: Tuple[int, ...]) -> float:
        w = pi_nf[theta[0] - 1]
        for a, b in zip(theta, theta[1:]):
            w *= Q[a - 1, b - 1]
        for t in theta:
            q = Q[t - 1, t - 1]
            if q != rho_max:  # scalar blocks compare exactly
                w /= rho_max - q
        return w

    weights = {p.theta: raw_weight(p.theta) for p in family.maximal}
    denom = family.h_max * sum(weights.values())
    out = np.zeros(form.k)
    for ell in range(1, form.k + 1):
        if Q[ell - 1, ell - 1] != rho_max:
            continue
        group = family.per_block[ell]
        if group:
            out[ell - 1] = sum(weights[p.theta] for p in group) / denom
    return out


def single_path_qed(family: PathFamily, spectra: SpectrumSet) -> np.ndarray:
    """Shortcut when exactly one dominant path exists: mass 1/h_max on each
    of its root-attaining blocks."""
    if len(family.maximal) != 1:
        raise NotSinglePath(f"expected one dominant path, found {len(family.maximal)}")
    p = family.maximal[0]
    out = np.zeros(family.k)
    for pos, t in enumerate(p.theta, start=1):
        if pos not in p.H_minus:
            out[t - 1] = 1.0 / family.h_max
    return out


def observable_limit(result: QuasiErgodicResult, f) -> float:
    """Limit of the conditioned time average of f (given in input order)."""
    f = np.asarray(f, dtype=float).reshape(-1)
    return float(f @ result.state_measure_input)


def _aperiodic_qed(
    model: SubstochasticModel,
    form: FrobeniusForm,
    spectra: SpectrumSet,
    pi_input: np.ndarray,
    restrict_to_pi_support: bool,
    alpha_tol: float,
) -> QuasiErgodicResult:
    pi_nf = np.asarray(pi_input, dtype=float)[list(form.perm)]
    thetas = enumerate_paths(form)
    classified = [classify_path(form, spectra, th, pi_nf) for th in thetas]
    family = maximal_paths(classified, spectra, restrict_to_pi_support)
    report = check_assumptions(form, spectra, family, alpha_tol)
    blocks = block_qed(form, spectra, family, report)
    states = state_qed(form, spectra, family, report)
    state_input = np.zeros_like(states)
    for p, orig in enumerate(form.perm):
        state_input[orig] = states[p]
    return QuasiErgodicResult(
        block_measure=blocks,
        state_measure=states,
        state_measure_input=state_input,
        perm=form.perm,
        rho_max=family.rho_max_eff,
        h_max=family.h_max,
        report=report,
    )


def full_qed(
    model: SubstochasticModel,
    rho_eq_tol: float = RHO_EQ_TOL,
    alpha_tol: float = ALPHA_TOL,
    restrict_to_pi_support: bool = True,
) -> QuasiErgodicResult:
    """End-to-end pipeline: normal form, spectra, path family, limits.

    If some diagonal block is cyclic, the analysis runs on Q^N (N the lcm of
    the block periods) for each of the N shifted initial vectors pi Q^i, and
    the N state measures are averaged with equal weight; the result is then
    reported against the original chain's blocks."""
    form = condense(model)
    spectra = spectrum_set(form, rho_eq_tol)
    if all(s.primitive for s in spectra.blocks):
        return _aperiodic_qed(model, form, spectra, model.pi, restrict_to_pi_support, alpha_tol)

    lift = aperiodic_lift(model, form)
    avg = np.zeros(model.d)
    last_result: Optional[QuasiErgodicResult] = None
    for pi_i in lift.shifted_pis:
        s = pi_i.sum()
        if s == 0.0:
            raise SurvivalUnderflow("a shifted initial vector is zero")
        model_i = validate(lift.lifted_Q, pi_i / s)
        form_i = condense(model_i)
        spectra_i = spectrum_set(form_i, rho_eq_tol)
        res_i = _aperiodic_qed(model_i, form_i, spectra_i, model_i.pi, restrict_to_pi_support, alpha_tol)
        avg += res_i.state_measure_input
        last_result = res_i
    avg /= lift.N

    states_nf = avg[list(form.perm)]
    blocks = np.array([sum(states_nf[p] for p in r) for r in form.index_sets])
    return QuasiErgodicResult(
        block_measure=blocks,
        state_measure=states_nf,
        state_measure_input=avg,
        perm=form.perm,
        rho_max=spectra.rho_max,
        h_max=last_result.h_max,
        report=last_result.report,
    )
