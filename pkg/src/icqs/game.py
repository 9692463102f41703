"""Instance model for integer convex quadratic simultaneous games.

Each of the k >= 2 players i minimizes

    0.5 * x_i' Q_i x_i + (sum_j C_i[j] x_j + d_i)' x_i      over x_i in Z^{n_i}

with Q_i symmetric positive definite and one coupling block C_i[j] per
opponent j.  The interaction matrix R_i = Q_i^{-1} [C_i[j] for j != i,
concatenated in ascending player order] is the linear map from the joint
opponent strategy to the shift of player i's continuous best response; the
singular values of the R_i decide whether best-response iteration contracts
(all below one: "positively adequate") or expands (all above one:
"negatively adequate").

Instances are immutable after construction and every operation is a pure
function, so instances can be shared and evaluated in parallel freely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import iqp, linalg
from .errors import DimensionMismatch

# Singular values within this margin of 1 are treated as "on the boundary":
# the instance is classified neither positively nor negatively adequate.
ADEQUACY_EPS = 1e-9


class Adequacy(str, Enum):
    POSITIVE = "positively_adequate"
    NEGATIVE = "negatively_adequate"
    NEITHER = "neither"


@dataclass(frozen=True)
class PlayerProblem:
    """One player's quadratic cost and coupling to each opponent."""

    Q: np.ndarray
    C: Mapping[int, np.ndarray]  # opponent player index -> (n_i x n_j) block
    d: np.ndarray

    @property
    def n(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class IcqsInstance:
    players: tuple[PlayerProblem, ...]
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def k(self) -> int:
        return len(self.players)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(p.n for p in self.players)

    def opponents(self, i: int) -> tuple[int, ...]:
        return tuple(j for j in range(self.k) if j != i)


def make_instance(players: Sequence[PlayerProblem], meta: dict | None = None) -> IcqsInstance:
    """Validate and freeze an instance.

    Checks k >= 2, symmetry and positive definiteness of every Q_i (via
    Cholesky), and that each coupling block's shape matches the opponent's
    variable count.
    """
    players = tuple(
        PlayerProblem(
            Q=linalg.require_symmetric(p.Q, f"Q[{i}]"),
            C={int(j): linalg.as_matrix(B, f"C[{i}][{j}]") for j, B in p.C.items()},
            d=linalg.as_vector(p.d, f"d[{i}]"),
        )
        for i, p in enumerate(players)
    )
    k = len(players)
    if k < 2:
        raise DimensionMismatch("an instance needs at least two players")
    dims = [p.n for p in players]
    for i, p in enumerate(players):
        linalg.cholesky(p.Q)  # raises NotPositiveDefinite on failure
        if p.d.shape[0] != dims[i]:
            raise DimensionMismatch(f"player {i}: d has length {p.d.shape[0]}, expected {dims[i]}")
        expected = {j for j in range(k) if j != i}
        if set(p.C.keys()) != expected:
            raise DimensionMismatch(f"player {i}: coupling blocks for {sorted(p.C)} instead of {sorted(expected)}")
        for j, block in p.C.items():
            if block.shape != (dims[i], dims[j]):
                raise DimensionMismatch(
                    f"player {i}: block against player {j} is {block.shape}, expected {(dims[i], dims[j])}"
                )
    return IcqsInstance(players=players, meta=dict(meta or {}))


def coupling_concat(inst: IcqsInstance, i: int) -> np.ndarray:
    """Player i's coupling blocks concatenated in ascending opponent order."""
    return np.hstack([inst.players[i].C[j] for j in inst.opponents(i)])


def interaction_matrix(inst: IcqsInstance, i: int) -> np.ndarray:
    """R_i = Q_i^{-1} [C_i blocks, opponents in player order]."""
    return linalg.solve_spd(inst.players[i].Q, coupling_concat(inst, i))


@dataclass(frozen=True)
class AdequacyReport:
    sigma_max: tuple[float, ...]  # per player, largest singular value of R_i
    sigma_min: tuple[float, ...]  # per player, smallest singular value of R_i
    classification: Adequacy
    rho: float | None  # margin: 1 - max sigma, or min sigma - 1

    @property
    def max_sigma(self) -> float:
        return max(self.sigma_max)

    @property
    def min_sigma(self) -> float:
        return min(self.sigma_min)


def classify(inst: IcqsInstance, adequacy_eps: float = ADEQUACY_EPS) -> AdequacyReport:
    """Adequacy classification from the interaction matrices' singular values.

    Strict inequalities with an epsilon margin; singular values numerically
    equal to one land in NEITHER rather than being misclassified.
    """
    smax, smin = [], []
    for i in range(inst.k):
        sv = linalg.singular_values(interaction_matrix(inst, i))
        smax.append(float(sv[0]))
        smin.append(float(sv[-1]))
    overall_max = max(smax)
    overall_min = min(smin)
    if overall_max < 1.0 - adequacy_eps:
        cls, rho = Adequacy.POSITIVE, 1.0 - overall_max
    elif overall_min > 1.0 + adequacy_eps:
        cls, rho = Adequacy.NEGATIVE, overall_min - 1.0
    else:
        cls, rho = Adequacy.NEITHER, None
    return AdequacyReport(
        sigma_max=tuple(smax), sigma_min=tuple(smin), classification=cls, rho=rho
    )


def _others_concat(inst: IcqsInstance, i: int, others: Sequence[np.ndarray]) -> np.ndarray:
    opp = inst.opponents(i)
    if len(others) != len(opp):
        raise DimensionMismatch(
            f"player {i} has {len(opp)} opponents, got {len(others)} vectors"
        )
    parts = []
    for j, vec in zip(opp, others):
        v = np.asarray(vec, dtype=np.float64).ravel()
        if v.shape[0] != inst.dims[j]:
            raise DimensionMismatch(
                f"opponent {j} vector has length {v.shape[0]}, expected {inst.dims[j]}"
            )
        parts.append(v)
    return np.concatenate(parts)


def effective_quadratic(
    inst: IcqsInstance, i: int, others: Sequence[np.ndarray]
) -> iqp.Quadratic:
    """Player i's subproblem with the opponents' strategies folded into d.

    ``others`` holds one vector per opponent in ascending player order.  Real
    entries are allowed: the coupling is linear in the opponents' variables,
    so responding to a mixed profile is exactly responding to its mean.
    """
    p = inst.players[i]
    y = _others_concat(inst, i, others)
    return iqp.Quadratic(Q=p.Q, d=coupling_concat(inst, i) @ y + p.d)


def objective(
    inst: IcqsInstance, i: int, own: np.ndarray, others: Sequence[np.ndarray]
) -> float:
    """Player i's exact cost at (own, others)."""
    own = np.asarray(own, dtype=np.float64).ravel()
    if own.shape[0] != inst.dims[i]:
        raise DimensionMismatch(
            f"player {i} vector has length {own.shape[0]}, expected {inst.dims[i]}"
        )
    return effective_quadratic(inst, i, others).value(own)


def best_response(
    inst: IcqsInstance,
    i: int,
    others: Sequence[np.ndarray],
    node_budget: int = iqp.DEFAULT_NODE_BUDGET,
) -> np.ndarray:
    """Integer best response of player i to the opponents' (mean) strategies.

    Deterministic: co-optimal responses resolve to the lexicographically
    smallest vector.
    """
    v, _ = iqp.integer_min(effective_quadratic(inst, i, others), node_budget=node_budget)
    return v


def continuous_response(inst: IcqsInstance, i: int, others: Sequence[np.ndarray]) -> np.ndarray:
    """Continuous best response -Q_i^{-1} (C_i y + d_i)."""
    return iqp.continuous_min(effective_quadratic(inst, i, others))


# ---------------------------------------------------------------------------
# Instance files: one JSON document per instance.  Floats round-trip exactly
# (json emits shortest repr), so any decimal literal with <= 12 significant
# digits survives load -> save -> load unchanged.

def instance_to_dict(inst: IcqsInstance) -> dict:
    return {
        "players": [
            {
                "Q": p.Q.tolist(),
                "C": {str(j): block.tolist() for j, block in sorted(p.C.items())},
                "d": p.d.tolist(),
            }
            for p in inst.players
        ],
        "meta": inst.meta,
    }


def instance_from_dict(doc: dict) -> IcqsInstance:
    players = [
        PlayerProblem(
            Q=np.asarray(entry["Q"], dtype=np.float64),
            C={int(j): np.asarray(block, dtype=np.float64) for j, block in entry["C"].items()},
            d=np.asarray(entry["d"], dtype=np.float64),
        )
        for entry in doc["players"]
    ]
    return make_instance(players, meta=doc.get("meta", {}))


def save_instance(inst: IcqsInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_instance(path) -> IcqsInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))
