"""Multiplicity and deluxe scaling matrices per equivalence class."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .decomposition import VERTEX, Decomposition, EquivalenceClass
from .linalg import pseudo_inverse

MULTIPLICITY, DELUXE = "multiplicity", "deluxe"


@dataclass
class ScalingSet:
    """``blocks[c][s]`` is ``D_C^(s)`` for class id ``c`` and sharing subdomain ``s``."""

    kind: str
    blocks: dict[int, dict[int, np.ndarray]] = field(default_factory=dict)

    def __getitem__(self, cid):
        return self.blocks[cid]

    def __contains__(self, cid):
        return cid in self.blocks

    def partition_error(self) -> float:
        """Largest ``|| sum_s D_C^(s) - I ||_max`` over all classes."""
        err = 0.0
        for Ds in self.blocks.values():
            total = sum(Ds.values())
            err = max(err, float(np.abs(total - np.eye(total.shape[0])).max(initial=0.0)))
        return err


def multiplicity_scaling(cls: EquivalenceClass) -> dict[int, np.ndarray]:
    return {s: np.eye(cls.size) / cls.q for s in cls.sharing}


def deluxe_scaling(blocks: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """``D^(m) = (sum_l S^(l))^{-1} S^(m)``.

    A singular sum falls back to its pseudo-inverse; the result is then
    corrected on the null space so the blocks still sum to the identity.
    """
    total = sum(blocks.values())
    n = total.shape[0]
    try:
        factor = sla.cho_factor(total)
        return {s: sla.cho_solve(factor, S) for s, S in blocks.items()}
    except np.linalg.LinAlgError:
        pass
    warnings.warn("deluxe: singular sum of class blocks, using pseudo-inverse", RuntimeWarning)
    pinv = pseudo_inverse(total)
    null_proj = np.eye(n) - pinv @ total
    q = len(blocks)
    return {s: pinv @ S + null_proj / q for s, S in blocks.items()}


def transform_scaling(D: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Scaling in transformed coordinates ``P^{-1} D P``."""
    return np.linalg.solve(P, D @ P)


def transformed_deluxe(transformed_blocks: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Deluxe scaling built from ``P^T S P`` blocks; equals ``P^{-1} D P``."""
    return deluxe_scaling(transformed_blocks)


def partition_blocks(D: np.ndarray, k: int) -> dict[str, np.ndarray]:
    """Split ``D`` at index ``k`` into primal (first k) / dual blocks."""
    return {"PP": D[:k, :k], "PD": D[:k, k:], "DP": D[k:, :k], "DD": D[k:, k:]}


def build_scaling(dec: Decomposition, kind: str, principal_blocks=None) -> ScalingSet:
    """Scaling for every face/edge class plus multiplicity on vertices.

    ``principal_blocks[c][s]`` supplies ``S_C^(s)`` for the deluxe kind.
    """
    out = ScalingSet(kind)
    for c in dec.classes:
        if c.kind == VERTEX or kind == MULTIPLICITY:
            out.blocks[c.id] = multiplicity_scaling(c)
        elif kind == DELUXE:
            out.blocks[c.id] = deluxe_scaling(principal_blocks[c.id])
        else:
            raise ValueError(f"unknown scaling kind {kind!r}")
    return out
