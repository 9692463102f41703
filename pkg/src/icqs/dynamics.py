"""Simultaneous best-response iteration with certified outcomes.

One iteration replaces every player's strategy at once with its best response
to the *previous* joint profile (a Jacobi sweep; a Gauss-Seidel variant is
available behind a flag for exploration but is excluded from the certified
paths).  A run ends in one of four ways:

* ``cycle``        -- the joint profile repeated exactly (integer mode); the
                      window between the two occurrences is the cycle.
* ``fixed_point``  -- two consecutive profiles coincide (exactly in integer
                      mode, within ``fp_tolerance`` in continuous mode).
* ``divergence``   -- the instance is negatively adequate, an iterate's norm
                      exceeded the divergence radius and the norms kept
                      growing monotonically from there on.  Once the growth
                      condition latches, iteration continues (so the doubling
                      pattern is observable in the trace) until the iteration
                      cap or a norm cap that prevents float blow-up.
* ``cap``          -- the iteration limit was reached with no certificate.

Cycle detection hashes each joint integer profile to its first-seen index, so
a repeat is found in O(1) per iteration; this is semantically the "equal to
some earlier iterate" test.

Continuous mode replaces the integer best response with the continuous one,
turning the sweep into the affine fixed-point iteration whose contraction /
expansion behaviour mirrors the adequacy classification.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import game, iqp
from .errors import DimensionMismatch, NoCycle

INTEGER = "integer"
CONTINUOUS = "continuous"

OUTCOME_CYCLE = "cycle"
OUTCOME_FIXED_POINT = "fixed_point"
OUTCOME_DIVERGENCE = "divergence"
OUTCOME_CAP = "cap"

DEFAULT_MAX_ITERS = 10_000
# Continuous-mode fixed-point tolerance on the joint step norm.
FP_TOLERANCE = 1e-10
# Stop once divergence is certified and iterates grow past this joint norm;
# also truncates uncertified blow-ups before float64 precision degrades.
DIVERGENCE_NORM_CAP = 1e14


@dataclass(frozen=True)
class BrTrace:
    """Ordered joint profiles produced by one run, plus the certified outcome.

    ``profiles[t][i]`` is player i's strategy after t sweeps (index 0 is the
    start).  ``norms[t]`` is the joint l2 norm of profile t.
    """

    profiles: tuple[tuple[np.ndarray, ...], ...]
    norms: tuple[float, ...]
    outcome: str
    mode: str
    cycle_start: int | None = None   # k with profiles[k] == profiles[repeat]
    cycle_repeat: int | None = None
    fixed_index: int | None = None   # index of the settled profile
    divergence_index: int | None = None  # first index with certified growth

    @property
    def iterations(self) -> int:
        return len(self.profiles) - 1

    def cycle_window(self) -> tuple[int, int]:
        """Half-open index range [start, stop) of the recurring profiles."""
        if self.outcome == OUTCOME_CYCLE:
            return self.cycle_start, self.cycle_repeat
        if self.outcome == OUTCOME_FIXED_POINT:
            return self.fixed_index, self.fixed_index + 1
        raise NoCycle(f"trace ended with outcome {self.outcome!r}")


@dataclass(frozen=True)
class CycleSets:
    """Per-player deduplicated strategies visited inside the cycle window."""

    strategies: tuple[tuple[np.ndarray, ...], ...]
    joint_profiles: tuple[tuple[np.ndarray, ...], ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.strategies)


def _joint_norm(profile: Sequence[np.ndarray]) -> float:
    # float64 throughout: int64 squares overflow once iterates grow large
    return math.sqrt(
        sum(float(np.dot(xf, xf)) for xf in (np.asarray(x, np.float64) for x in profile))
    )


def _profile_key(profile: Sequence[np.ndarray]) -> bytes:
    return np.concatenate([np.asarray(x, dtype=np.int64) for x in profile]).tobytes()


def continuous_step(inst: game.IcqsInstance, profile: Sequence[np.ndarray]) -> list[np.ndarray]:
    """One Jacobi sweep of continuous best responses."""
    return [
        game.continuous_response(inst, i, [profile[j] for j in inst.opponents(i)])
        for i in range(inst.k)
    ]


def _integer_step(
    inst: game.IcqsInstance, profile: Sequence[np.ndarray], node_budget: int
) -> list[np.ndarray]:
    return [
        game.best_response(
            inst, i, [profile[j] for j in inst.opponents(i)], node_budget=node_budget
        )
        for i in range(inst.k)
    ]


def _validate_start(inst: game.IcqsInstance, start, mode: str) -> list[np.ndarray]:
    if start is None:
        if mode == INTEGER:
            return [np.zeros(n, dtype=np.int64) for n in inst.dims]
        return [np.zeros(n, dtype=np.float64) for n in inst.dims]
    if len(start) != inst.k:
        raise DimensionMismatch(f"start has {len(start)} players, expected {inst.k}")
    out = []
    for i, vec in enumerate(start):
        v = np.asarray(vec, dtype=np.float64).ravel()
        if v.shape[0] != inst.dims[i]:
            raise DimensionMismatch(
                f"start for player {i} has length {v.shape[0]}, expected {inst.dims[i]}"
            )
        if mode == INTEGER:
            if not np.all(np.rint(v) == v):
                raise DimensionMismatch(f"start for player {i} is not integral")
            out.append(v.astype(np.int64))
        else:
            out.append(v)
    return out


def run_br(
    inst: game.IcqsInstance,
    start=None,
    max_iters: int = DEFAULT_MAX_ITERS,
    mode: str = INTEGER,
    update: str = "jacobi",
    fp_tolerance: float = FP_TOLERANCE,
    node_budget: int = iqp.DEFAULT_NODE_BUDGET,
) -> BrTrace:
    """Run best-response iteration from ``start`` (all zeros by default).

    Deterministic: the same instance, start and configuration always produce
    the identical trace.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if mode not in (INTEGER, CONTINUOUS):
        raise ValueError(f"unknown mode {mode!r}")
    if update not in ("jacobi", "gauss_seidel"):
        raise ValueError(f"unknown update order {update!r}")

    current = _validate_start(inst, start, mode)
    profiles = [tuple(current)]
    norms = [_joint_norm(current)]
    seen: dict[bytes, int] = {}
    if mode == INTEGER:
        seen[_profile_key(current)] = 0

    div_radius = divergence_radius(inst)
    latch: int | None = None

    outcome = OUTCOME_CAP
    cycle_start = cycle_repeat = fixed_index = None

    for t in range(1, max_iters + 1):
        prev = profiles[-1]
        if update == "jacobi":
            if mode == INTEGER:
                nxt = _integer_step(inst, prev, node_budget)
            else:
                nxt = continuous_step(inst, prev)
        else:
            nxt = list(prev)
            for i in range(inst.k):
                others = [nxt[j] for j in inst.opponents(i)]
                if mode == INTEGER:
                    nxt[i] = game.best_response(inst, i, others, node_budget=node_budget)
                else:
                    nxt[i] = game.continuous_response(inst, i, others)

        profiles.append(tuple(nxt))
        norms.append(_joint_norm(nxt))

        if mode == INTEGER:
            key = _profile_key(nxt)
            first = seen.get(key)
            if first is not None:
                if first == t - 1:
                    outcome, fixed_index = OUTCOME_FIXED_POINT, t
                else:
                    outcome, cycle_start, cycle_repeat = OUTCOME_CYCLE, first, t
                break
            seen[key] = t
        else:
            step = math.sqrt(
                sum(float(np.sum((a - b) ** 2)) for a, b in zip(nxt, prev))
            )
            if step < fp_tolerance:
                outcome, fixed_index = OUTCOME_FIXED_POINT, t
                break

        if div_radius is not None:
            if latch is None:
                if norms[t - 1] > div_radius and norms[t] > norms[t - 1]:
                    latch = t - 1
            elif norms[t] <= norms[t - 1]:
                latch = None  # growth broke; certificate must re-establish
        if norms[t] > DIVERGENCE_NORM_CAP:
            break

    if outcome == OUTCOME_CAP and latch is not None:
        outcome = OUTCOME_DIVERGENCE

    return BrTrace(
        profiles=tuple(profiles),
        norms=tuple(norms),
        outcome=outcome,
        mode=mode,
        cycle_start=cycle_start,
        cycle_repeat=cycle_repeat,
        fixed_index=fixed_index,
        divergence_index=latch if outcome == OUTCOME_DIVERGENCE else None,
    )


def cycle_sets(trace: BrTrace) -> CycleSets:
    """Per-player distinct strategies over the cycle window, insertion order.

    Raises NoCycle unless the trace ended in a cycle or fixed point.
    """
    start, stop = trace.cycle_window()
    k = len(trace.profiles[0])
    per_player: list[dict[bytes, np.ndarray]] = [dict() for _ in range(k)]
    joint = []
    for t in range(start, stop):
        profile = trace.profiles[t]
        joint.append(profile)
        for i, x in enumerate(profile):
            per_player[i].setdefault(np.asarray(x).tobytes(), x)
    return CycleSets(
        strategies=tuple(tuple(d.values()) for d in per_player),
        joint_profiles=tuple(joint),
    )


def _radius(inst: game.IcqsInstance, rho: float, prox_variant: str) -> float:
    d_part = np.concatenate(
        [iqp.continuous_min(iqp.Quadratic(p.Q, p.d)) for p in inst.players]
    )
    proxes = []
    for p in inst.players:
        q = iqp.Quadratic(p.Q, p.d)
        if prox_variant == "exact":
            proxes.append(iqp.guarantee_prox(q))
        else:
            proxes.append(iqp.prox_bound(q).prox_value)
    return (float(np.linalg.norm(d_part)) + float(np.linalg.norm(proxes))) / rho


def termination_radius(
    inst: game.IcqsInstance,
    report: game.AdequacyReport | None = None,
    prox_variant: str = "flatness",
) -> float | None:
    """Norm level below which a positively adequate run must eventually stay.

    L = (||(Q_1^{-1}d_1; ...; Q_k^{-1}d_k)|| + ||(prox_1; ...; prox_k)||) / rho
    with rho = 1 - max sigma.  Outside L the joint norm strictly decreases,
    so only finitely many profiles are reachable infinitely often.  Returns
    None unless the instance is positively adequate.  ``prox_variant`` picks
    the flatness-formula radii (default, matching the reported bounds) or the
    certified ``"exact"`` ones used by the descent guarantee.
    """
    if report is None:
        report = game.classify(inst)
    if report.classification is not game.Adequacy.POSITIVE:
        return None
    return _radius(inst, report.rho, prox_variant)


def divergence_radius(
    inst: game.IcqsInstance,
    report: game.AdequacyReport | None = None,
    prox_variant: str = "flatness",
) -> float | None:
    """Norm level beyond which negatively adequate iterates grow forever.

    Same formula as the termination radius with rho = min sigma - 1.  Returns
    None unless the instance is negatively adequate.
    """
    if report is None:
        report = game.classify(inst)
    if report.classification is not game.Adequacy.NEGATIVE:
        return None
    return _radius(inst, report.rho, prox_variant)


def cycle_telemetry(trace: BrTrace) -> np.ndarray:
    """Per-iteration l2 distance from each profile to the nearest cycle profile.

    Profiles inside the cycle report zero; the pre-cycle tail shows the
    approach, whose step-to-step ratio empirically checks the linear
    contraction rate.  Raises NoCycle for divergent or capped traces.
    """
    sets = cycle_sets(trace)
    targets = [np.concatenate([np.asarray(x, float) for x in p]) for p in sets.joint_profiles]
    out = []
    for profile in trace.profiles:
        flat = np.concatenate([np.asarray(x, float) for x in profile])
        out.append(min(float(np.linalg.norm(flat - tgt)) for tgt in targets))
    return np.asarray(out)


def export_trace(trace: BrTrace, path) -> None:
    """Write one CSV row per iteration: index, flattened profile, joint norm."""
    k = len(trace.profiles[0])
    dims = [len(trace.profiles[0][i]) for i in range(k)]
    header = ["iter"]
    for i in range(k):
        header.extend(f"p{i}_{j}" for j in range(dims[i]))
    header.append("norm")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t, profile in enumerate(trace.profiles):
            row = [t]
            for x in profile:
                row.extend(np.asarray(x).tolist())
            row.append(repr(trace.norms[t]))
            writer.writerow(row)
