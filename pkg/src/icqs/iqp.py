"""Exact minimization of strictly convex quadratics over the integer lattice.

The objective is f(x) = 0.5 x'Qx + d'x with Q symmetric positive definite.
Its continuous minimizer is u = -Q^{-1}d, and the integer minimizer is found
by depth-first enumeration over the triangular factor of Q: writing
f(x) = f(u) + 0.5 ||L'(x - u)||^2, coordinates are fixed from the last row of
L' upward, children are visited in zig-zag order around each coordinate's
conditional center, and branches whose accumulated cost already exceeds the
best known objective are pruned.  The rounded continuous minimizer seeds the
incumbent.  This is the classical closest-vector enumeration scheme; it is
exact, and fast at the dimensions used here (n <= ~25).

The module also provides the closed-form proximity data for Q: an upper bound
on how far the integer minimizer can sit from u (uniform over all d), and the
matching bound on the objective gap.  Both are stated in terms of a flatness
constant Flt(n) <= n^{5/2}.  For 1x1 and other scaled-identity matrices the
flatness-based distance bound understates the true worst case (which is
sqrt(n)/2 there, attained with u at a cube center), so `guarantee_prox`
returns the larger of the two whenever the exact value is known; internal
correctness checks and the certified radii that must actually hold use that
variant, while `prox_bound` reports the plain flatness formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EnumerationBudgetExceeded,
    OracleBudgetExceeded,
)
from .linalg import as_vector, cholesky, require_symmetric, solve_with_factor, sym_eigen

DEFAULT_NODE_BUDGET = 10**8
DEFAULT_ORACLE_BUDGET = 2_000_000

# Flt(n) <= coeff * n**exponent; the default is the proven n^{5/2} bound.
# Sharper conjectured bounds (e.g. O(n)) can be installed process-wide with
# set_flatness_rule; every prox-derived quantity picks the rule up at call
# time.
FLATNESS_EXPONENT = 2.5
FLATNESS_COEFF = 1.0


def set_flatness_rule(coeff: float, exponent: float) -> None:
    """Override the dimension bound used by every flatness-based formula."""
    global FLATNESS_COEFF, FLATNESS_EXPONENT
    if coeff <= 0.0:
        raise ValueError("flatness coefficient must be positive")
    FLATNESS_COEFF = float(coeff)
    FLATNESS_EXPONENT = float(exponent)

_SCALED_IDENTITY_RTOL = 1e-12

# Cholesky factors and eigenvalue extremes keyed by the Q buffer; best-response
# loops minimize against the same Q thousands of times.
_FACTOR_CACHE: dict[bytes, tuple[np.ndarray, float, float]] = {}
_FACTOR_CACHE_CAP = 512


@dataclass(frozen=True)
class Quadratic:
    """f(x) = 0.5 x'Qx + d'x with symmetric positive definite Q."""

    Q: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        Q = require_symmetric(self.Q, "Q")
        d = as_vector(self.d, "d")
        if Q.shape[0] != d.shape[0]:
            raise DimensionMismatch(
                f"Q is {Q.shape[0]}x{Q.shape[1]} but d has length {d.shape[0]}"
            )
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def value(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(0.5 * x @ self.Q @ x + self.d @ x)


@dataclass(frozen=True)
class ProxBound:
    """Closed-form proximity data for a positive definite Q.

    prox_value = (flatness / 4) * sqrt(lambda_max / lambda_min) bounds the
    distance between continuous and integer minimizers uniformly over d, and
    obj_gap = lambda_max * flatness^2 / 32 bounds the objective difference.
    """

    prox_value: float
    lambda_max: float
    lambda_min: float
    flatness: float
    obj_gap: float


def flatness_constant(
    n: int, exponent: float | None = None, coeff: float | None = None
) -> float:
    """Flt(n) bound used in the proximity formulas; default n^{5/2}.

    Overridable (per call or via set_flatness_rule) because sharper
    dimension-dependent bounds are conjectured; every downstream formula is
    stated in terms of Flt(n), so a better constant propagates directly.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if exponent is None:
        exponent = FLATNESS_EXPONENT
    if coeff is None:
        coeff = FLATNESS_COEFF
    return coeff * float(n) ** exponent


def _factor(Q: np.ndarray) -> tuple[np.ndarray, float, float]:
    key = Q.tobytes()
    hit = _FACTOR_CACHE.get(key)
    if hit is not None:
        return hit
    L = cholesky(Q)
    eig = sym_eigen(Q)
    entry = (L, eig.lambda_max, eig.lambda_min)
    if len(_FACTOR_CACHE) >= _FACTOR_CACHE_CAP:
        _FACTOR_CACHE.clear()
    _FACTOR_CACHE[key] = entry
    return entry


def continuous_min(q: Quadratic) -> np.ndarray:
    """The unconstrained minimizer u = -Q^{-1} d."""
    L, _, _ = _factor(q.Q)
    return solve_with_factor(L, -q.d)


def prox_bound(
    q: Quadratic, exponent: float | None = None, coeff: float | None = None
) -> ProxBound:
    """Flatness-based proximity bound for q's quadratic part."""
    _, lam_max, lam_min = _factor(q.Q)
    flt = flatness_constant(q.n, exponent, coeff)
    return ProxBound(
        prox_value=(flt / 4.0) * math.sqrt(lam_max / lam_min),
        lambda_max=lam_max,
        lambda_min=lam_min,
        flatness=flt,
        obj_gap=lam_max * flt * flt / 32.0,
    )


def is_scaled_identity(Q: np.ndarray, rtol: float = _SCALED_IDENTITY_RTOL) -> bool:
    n = Q.shape[0]
    c = float(np.trace(Q)) / n
    return bool(np.abs(Q - c * np.eye(n)).max() <= rtol * max(1.0, abs(c)))


def exact_prox(q: Quadratic) -> float | None:
    """sqrt(n)/2 when Q is a scaled identity (the true worst case), else None.

    For c*I the integer minimizer is the componentwise rounding of u, so the
    worst distance is attained with u at a cube center.
    """
    if is_scaled_identity(q.Q):
        return math.sqrt(q.n) / 2.0
    return None


def guarantee_prox(
    q: Quadratic, exponent: float | None = None, coeff: float | None = None
) -> float:
    """A proximity radius that is a valid upper bound for this Q.

    The flatness formula with Flt(n) = n^{5/2} is provably valid for n >= 2
    but understates the 1-D worst case (0.25 vs the true 0.5), so scaled
    identities take the exact sqrt(n)/2 value when it is larger.
    """
    bound = prox_bound(q, exponent, coeff).prox_value
    exact = exact_prox(q)
    if exact is not None:
        bound = max(bound, exact)
    return bound


def guarantee_obj_gap(q: Quadratic) -> float:
    """Objective-gap bound valid for this Q (see guarantee_prox)."""
    pb = prox_bound(q)
    gap = pb.obj_gap
    if is_scaled_identity(q.Q):
        # distance <= sqrt(n)/2 translates to a gap of lambda_max * n / 8
        gap = max(gap, pb.lambda_max * q.n / 8.0)
    return gap


def _zigzag(center: float, k: int, base: float, direction: float) -> float:
    # k-th candidate around `center`: base, base+dir, base-dir, base+2*dir, ...
    if k == 0:
        return base
    if k % 2 == 1:
        return base + direction * ((k + 1) // 2)
    return base - direction * (k // 2)


def integer_min(
    q: Quadratic, node_budget: int = DEFAULT_NODE_BUDGET
) -> tuple[np.ndarray, float]:
    """Global integer minimizer of q and its objective value.

    Ties between co-optimal lattice points are broken toward the
    lexicographically smallest vector so repeated runs (and cycle detection
    built on them) are reproducible.  Raises EnumerationBudgetExceeded when
    the search tree outgrows ``node_budget``, which at desk scale only happens
    for pathologically conditioned Q.
    """
    n = q.n
    L, lam_max, lam_min = _factor(q.Q)
    u = solve_with_factor(L, -q.d)
    G = np.ascontiguousarray(L.T)
    gdiag = np.diag(G).copy()

    inc = np.rint(u)
    # Excess energy 0.5*||G(x-u)||^2 accumulated row by row, matching the
    # association order of the DFS partial sums so exact ties stay exact.
    w = inc - u
    best_excess = 0.0
    for j in range(n - 1, -1, -1):
        best_excess += 0.5 * float(G[j, j:] @ w[j:]) ** 2
    best_vec = inc.copy()

    # Rounded point is certifiably the unique optimum when its excess is
    # below the energy any other lattice point must pay in the softest
    # direction of Q.
    max_frac = float(np.max(np.abs(w))) if n else 0.0
    if max_frac < 0.5:
        guard = 0.5 * lam_min * (1.0 - max_frac) ** 2
        if best_excess < 0.999 * guard:
            v = best_vec.astype(np.int64)
            _check_proximity(q, u, best_vec, best_excess)
            return v, q.value(best_vec)

    x = np.zeros(n, dtype=np.float64)
    centers = np.zeros(n, dtype=np.float64)
    bases = np.zeros(n, dtype=np.float64)
    dirs = np.zeros(n, dtype=np.float64)
    ctr = np.zeros(n, dtype=np.int64)
    acc = np.zeros(n, dtype=np.float64)  # acc[j]: cost of rows j+1..n-1

    def enter(j: int) -> None:
        if j == n - 1:
            t = 0.0
        else:
            t = float(G[j, j + 1 :] @ (x[j + 1 :] - u[j + 1 :]))
        c = u[j] - t / gdiag[j]
        centers[j] = c
        bases[j] = np.rint(c)
        dirs[j] = 1.0 if c >= bases[j] else -1.0
        ctr[j] = 0

    nodes = 0
    j = n - 1
    acc[j] = 0.0
    enter(j)
    while True:
        cand = _zigzag(centers[j], int(ctr[j]), bases[j], dirs[j])
        row_cost = 0.5 * (gdiag[j] * (cand - centers[j])) ** 2
        total = acc[j] + row_cost
        if total > best_excess:
            # zig-zag order is monotone in |cand - center|: level exhausted
            j += 1
            if j == n:
                break
            ctr[j] += 1
            continue
        nodes += 1
        if nodes > node_budget:
            raise EnumerationBudgetExceeded(
                f"enumeration exceeded {node_budget} nodes"
            )
        x[j] = cand
        if j == 0:
            if total < best_excess or (
                total == best_excess and _lex_less(x, best_vec)
            ):
                best_excess = total
                best_vec = x.copy()
            ctr[0] += 1
        else:
            acc[j - 1] = total
            j -= 1
            enter(j)

    _check_proximity(q, u, best_vec, best_excess)
    return best_vec.astype(np.int64), q.value(best_vec)


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    for ai, bi in zip(a, b):
        if ai != bi:
            return ai < bi
    return False


def _check_proximity(q: Quadratic, u: np.ndarray, v: np.ndarray, excess: float) -> None:
    # Postcondition guard: the returned minimizer must respect the proximity
    # radius and objective-gap bound that are provable for this Q.  ``excess``
    # is the gap computed in the translated frame 0.5||L'(v-u)||^2, which
    # stays accurate where f(v) - f(u) would cancel catastrophically.
    dist = float(np.linalg.norm(v - u))
    radius = guarantee_prox(q)
    slack = 1e-9 * max(1.0, float(np.abs(u).max()))
    if dist > radius * (1.0 + 1e-9) + slack:
        raise AssertionError(
            f"integer minimizer at distance {dist:.6g} exceeds proximity radius {radius:.6g}"
        )
    gap_bound = guarantee_obj_gap(q)
    if excess > gap_bound * (1.0 + 1e-9) + slack:
        raise AssertionError(
            f"objective gap {excess:.6g} exceeds bound {gap_bound:.6g}"
        )


def brute_force_min(
    q: Quadratic,
    radius: float | None = None,
    point_budget: int = DEFAULT_ORACLE_BUDGET,
) -> tuple[np.ndarray, float]:
    """Exhaustive lattice scan; the independent oracle for integer_min.

    With an explicit ``radius`` the scan covers the integer box of half-width
    ceil(radius + 1/2) around the rounded continuous minimizer (the extra 1/2
    absorbs the rounding offset, so a box with radius >= the proximity bound
    always contains the global minimizer).  With ``radius=None`` the box is
    derived from the incumbent level set: every global minimizer satisfies
    f(x) <= f(round(u)), hence lies in the ellipsoid of that level, whose
    axis-aligned extent is sqrt(2 gamma (Q^{-1})_jj) per coordinate.  That box
    is exact and usually far smaller than the proximity-radius box.
    """
    n = q.n
    L, _, _ = _factor(q.Q)
    u = solve_with_factor(L, -q.d)
    center = np.rint(u)

    if radius is not None:
        half = math.ceil(radius + 0.5)
        lo = center - half
        hi = center + half
    else:
        gamma = max(q.value(center) - q.value(u), 0.0)
        qinv_diag = np.diag(solve_with_factor(L, np.eye(n)))
        h = np.sqrt(np.maximum(2.0 * gamma * qinv_diag, 0.0)) * (1.0 + 1e-12) + 1e-9
        lo = np.minimum(np.ceil(u - h), center)
        hi = np.maximum(np.floor(u + h), center)

    total = 1
    for c in (hi - lo + 1).astype(np.int64):
        total *= int(c)  # python int: immune to overflow for huge boxes
        if total > point_budget:
            raise OracleBudgetExceeded(
                f"box holds more than {point_budget} lattice points"
            )

    axes = [np.arange(int(lo[j]), int(hi[j]) + 1, dtype=np.float64) for j in range(n)]
    grid = np.meshgrid(*axes, indexing="ij")
    X = np.stack([g.ravel() for g in grid], axis=1)
    values = 0.5 * np.einsum("ij,jk,ik->i", X, q.Q, X) + X @ q.d
    vmin = values.min()
    ties = X[values == vmin]
    order = np.lexsort(ties[:, ::-1].T)
    v = ties[order[0]]
    return v.astype(np.int64), float(vmin)
