"""Time-scheduling protocols: Round-Robin and Try-Once-Discard.

A network's error vector is split into ``ell`` node blocks.  At each
successful transmission exactly one node is granted access and its block of
the error is reset to zero; every other block passes through unchanged.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class NodePartition:
    """Node block sizes ``[n_1, ..., n_ell]`` of a network's error vector."""

    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s <= 0 for s in sizes):
            raise ValueError(f"node sizes must be positive and nonempty, got {self.sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def scalar(cls, ell: int) -> "NodePartition":
        return cls((1,) * ell)

    @property
    def ell(self) -> int:
        return len(self.sizes)

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    def blocks(self) -> list:
        offsets = np.cumsum((0,) + self.sizes)
        return [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]

    def check(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e, float).reshape(-1)
        if e.size != self.dim:
            raise DimensionMismatch(f"error has dimension {e.size}, partition expects {self.dim}")
        return e


class ProtocolKind(enum.Enum):
    ROUND_ROBIN = "rr"
    TRY_ONCE_DISCARD = "tod"

    @classmethod
    def parse(cls, tag) -> "ProtocolKind":
        if isinstance(tag, cls):
            return tag
        key = str(tag).strip().lower().replace("-", "_")
        aliases = {"rr": cls.ROUND_ROBIN, "round_robin": cls.ROUND_ROBIN,
                   "roundrobin": cls.ROUND_ROBIN, "tod": cls.TRY_ONCE_DISCARD,
                   "try_once_discard": cls.TRY_ONCE_DISCARD,
                   "tryoncediscard": cls.TRY_ONCE_DISCARD}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown protocol {tag!r}") from None


def rr_node(kappa: int, ell: int, order: Optional[Sequence[int]] = None) -> int:
    """Zero-based index of the node granted at counter ``kappa`` (``kappa >= 1``).

    ``order`` is an optional 1-based cyclic visiting order such as ``(3, 2, 1)``;
    the default visits nodes ``1, 2, ..., ell``.
    """
    slot = (int(kappa) - 1) % ell
    if order is None:
        return slot
    return int(order[slot]) - 1


def _zero_block(e: np.ndarray, block: slice) -> np.ndarray:
    out = e.copy()
    out[block] = 0.0
    return out


def rr_update(kappa: int, e, part: NodePartition,
              order: Optional[Sequence[int]] = None) -> np.ndarray:
    """Round-Robin update ``(I - Psi(kappa)) e``."""
    e = part.check(e)
    return _zero_block(e, part.blocks()[rr_node(kappa, part.ell, order)])


def tod_node(e, part: NodePartition) -> int:
    """Zero-based index of the block with the largest norm (lowest index on ties)."""
    e = part.check(e)
    norms = [float(np.linalg.norm(e[s])) for s in part.blocks()]
    best = 0
    for k, n in enumerate(norms):
        if n > norms[best]:
            best = k
    return best


def tod_update(e, part: NodePartition) -> np.ndarray:
    """Try-Once-Discard update: zero the largest-norm block."""
    e = part.check(e)
    return _zero_block(e, part.blocks()[tod_node(e, part)])


def protocol_update(kind: ProtocolKind, kappa: int, e, part: NodePartition,
                    order: Optional[Sequence[int]] = None) -> np.ndarray:
    """Dispatch to :func:`rr_update` or :func:`tod_update`."""
    if ProtocolKind.parse(kind) is ProtocolKind.ROUND_ROBIN:
        return rr_update(kappa, e, part, order)
    return tod_update(e, part)


def contraction_factor(kind: ProtocolKind, part: NodePartition) -> float:
    """Contraction constant ``sqrt((ell - 1) / ell)``, shared by both protocols."""
    ell = part.ell
    return math.sqrt((ell - 1) / ell)


def rr_storage(kappa: int, e, part: NodePartition,
               order: Optional[Sequence[int]] = None) -> float:
    """Round-Robin storage function: root-sum-square of the error over one cycle.

    ``W(kappa, e)^2 = sum_{k=0}^{ell-1} |e_k|^2`` where ``e_0 = e`` and
    ``e_{k+1}`` is the Round-Robin update of ``e_k`` at counter ``kappa + k``.
    It satisfies ``|e| <= W <= sqrt(ell) |e|`` and contracts by
    ``sqrt((ell - 1) / ell)`` at every transmission.
    """
    cur = part.check(e)
    total = 0.0
    for k in range(part.ell):
        total += float(cur @ cur)
        cur = rr_update(kappa + k, cur, part, order)
    return math.sqrt(total)
