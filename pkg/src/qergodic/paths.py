"""Admissible block paths, their classification, the maximal family, and the
composition combinatorics used by the brute-force oracles.

An admissible path is a strictly decreasing sequence of block indices in
which each consecutive pair is connected by a structurally nonzero
off-diagonal block.  Its weight data (largest root along the path, the
positions attaining it, the projection weight alpha, and the initial mass)
determine the closed-form limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import BlockNotOnPath, EmptyFamily, GammaOverflow, PathExplosion
from .spectral import SpectrumSet, path_alpha
from .structure import FrobeniusForm

PATH_CAP = 10**6
_MAX_COUNT = 2**62


@dataclass(frozen=True)
class AdmissiblePath:
    theta: Tuple[int, ...]
    kappa: int
    rho_theta: float
    h_plus: int
    h_minus: int
    H_minus: Tuple[int, ...]  # 1-based positions along theta with root below rho_theta
    alpha: float
    pi_mass: float


@dataclass(frozen=True)
class PathFamily:
    all: Tuple[AdmissiblePath, ...]
    rho_max_eff: float
    h_max: int
    maximal: Tuple[AdmissiblePath, ...]
    per_block: Dict[int, Tuple[AdmissiblePath, ...]]
    pi_restricted: bool
    k: int


def enumerate_paths(form: FrobeniusForm, cap: int = PATH_CAP) -> List[Tuple[int, ...]]:
    """All admissible paths in the block DAG, sorted lexicographically.

    Singletons are always included (a length-1 path is vacuously admissible).
    """
    k = form.k
    succ = [[] for _ in range(k + 1)]
    for (i, j) in form.sub_blocks:
        succ[i].append(j)
    for lst in succ:
        lst.sort()
    out: List[Tuple[int, ...]] = []
    stack: List[Tuple[int, ...]] = [(i,) for i in range(1, k + 1)]
    while stack:
        theta = stack.pop()
        out.append(theta)
        if len(out) > cap:
            raise PathExplosion(f"more than {cap} admissible paths")
        for j in succ[theta[-1]]:
            stack.append(theta + (j,))
    out.sort()
    return out


def classify_path(
    form: FrobeniusForm,
    spectra: SpectrumSet,
    theta: Sequence[int],
    pi: np.ndarray,
) -> AdmissiblePath:
    """Fill in the weight data of one admissible path.

    pi must be given in normal-form state order.  pi_mass is the inner
    product of pi restricted to the start block with that block's right
    eigenvector; since the eigenvector is strictly positive, pi_mass is zero
    exactly when the start block carries no initial mass.
    """
    theta = tuple(int(t) for t in theta)
    kappa = len(theta)
    rho_theta = max(spectra.rho(t) for t in theta)
    # classify positions against the path maximum under the equality policy
    H_minus = tuple(
        pos + 1 for pos, t in enumerate(theta) if not spectra.attains(t, rho_theta)
    )
    h_minus = len(H_minus)
    h_plus = kappa - h_minus
    alpha = path_alpha(form, spectra, theta)
    start = theta[0]
    pi_block = np.asarray(pi, dtype=float)[list(form.index_sets[start - 1])]
    pi_mass = float(pi_block @ spectra.blocks[start - 1].v)
    return AdmissiblePath(
        theta=theta,
        kappa=kappa,
        rho_theta=rho_theta,
        h_plus=h_plus,
        h_minus=h_minus,
        H_minus=H_minus,
        alpha=alpha,
        pi_mass=pi_mass,
    )


def maximal_paths(
    paths: Sequence[AdmissiblePath],
    spectra: SpectrumSet,
    restrict_to_pi_support: bool = True,
) -> PathFamily:
    """Select the dominant family: paths attaining the largest root with the
    largest count of attaining positions.

    With restrict_to_pi_support (the default), paths whose start block
    carries no initial mass are dropped before taking the maxima, so the
    family always reflects where the chain can actually start.
    """
    paths = tuple(paths)
    admitted = tuple(p for p in paths if p.pi_mass != 0.0) if restrict_to_pi_support else paths
    if not admitted:
        raise EmptyFamily("no admissible path carries initial mass")
    rho_max_eff = max(p.rho_theta for p in admitted)

    def at_max(p: AdmissiblePath) -> bool:
        return _rho_close(spectra, p.rho_theta, rho_max_eff)

    top = [p for p in admitted if at_max(p)]
    h_max = max(p.h_plus for p in top)
    maximal = tuple(p for p in top if p.h_plus == h_max)
    per_block: Dict[int, Tuple[AdmissiblePath, ...]] = {}
    for ell in range(1, len(spectra.blocks) + 1):
        per_block[ell] = tuple(p for p in maximal if ell in p.theta)
    return PathFamily(
        all=paths,
        rho_max_eff=rho_max_eff,
        h_max=h_max,
        maximal=maximal,
        per_block=per_block,
        pi_restricted=restrict_to_pi_support,
        k=len(spectra.blocks),
    )


def _rho_close(spectra: SpectrumSet, a: float, b: float) -> bool:
    if a == b:
        return True
    return abs(a - b) <= spectra.rho_eq_tol * max(a, b)


def split_at(theta: Sequence[int], ell: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Split a path at block ell into the part down to ell and the part from
    ell on; the two halves share the split block, so their lengths sum to
    kappa + 1."""
    theta = tuple(int(t) for t in theta)
    if ell not in theta:
        raise BlockNotOnPath(f"block {ell} does not appear on path {theta}")
    pos = theta.index(ell)
    return theta[: pos + 1], theta[pos:]


def gamma_count(kappa: int, m: int) -> int:
    """Number of nonnegative kappa-tuples summing to m: C(kappa + m - 1, m)."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if m < 0:
        return 0
    c = math.comb(kappa + m - 1, m)
    if c > _MAX_COUNT:
        raise GammaOverflow(f"composition count {c} exceeds the supported range")
    return c


def gamma_enumerate(kappa: int, m: int) -> List[Tuple[int, ...]]:
    """All nonnegative kappa-tuples summing to m, in lexicographic order."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if m < 0:
        return []
    gamma_count(kappa, m)  # overflow guard before materializing
    out: List[Tuple[int, ...]] = []

    def rec(prefix: Tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for first in range(remaining + 1):
            rec(prefix + (first,), remaining - first, slots - 1)

    rec((), m, kappa)
    return out
