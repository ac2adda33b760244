"""Fast evaluation path for search.

Three layers of machinery, in order of appearance: a sparse product for
the 773-input first layer (board vectors are <5% ones, so summing active
weight columns beats a dense matvec), a fixed-size feature cache keyed
by the position's Zobrist hash, and the pairwise comparison operations
the search tree is built on.

All comparisons here are from White's perspective; callers acting for
Black invert the result. An exact softmax tie resolves to SecondBetter
so that every comparison is decided and search stays deterministic.
"""

from __future__ import annotations

from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .board import Color, Position
from .encoding import VECTOR_BITS, active_bits
from .nn.layers import DenseLayer, LINEAR, RELU, softmax_rows
from .nn.model import FeatureExtractor, SiameseNetwork


class IndexOutOfRange(IndexError):
    pass


class Ordering(Enum):
    FIRST_BETTER = 0
    SECOND_BETTER = 1


def sparse_affine(layer: DenseLayer, active: Sequence[int]) -> np.ndarray:
    """First-layer preactivation from the indices of the set bits alone.

    Equivalent to `W @ x + b` for the 0/1 vector with ones at `active`,
    up to 32-bit accumulation order. Empty input returns the bias
    exactly.
    """
    if len(active) == 0:
        return layer.bias.copy()
    idx = np.asarray(active, dtype=np.intp)
    if idx.min() < 0 or idx.max() >= layer.in_dim:
        raise IndexOutOfRange(
            f"bit index outside [0, {layer.in_dim}): {idx.min()}..{idx.max()}")
    return layer.weights[:, idx].sum(axis=1) + layer.bias


class FeatureCache:
    """Fixed-size position -> feature-vector cache.

    Direct-mapped: slot = key mod capacity, always-replace on collision.
    Entries are (key, vector) tuples swapped in one assignment, so
    concurrent readers can at worst see a stale miss, never a wrong hit.
    Cached vectors are frozen (non-writeable) so a hit can be handed out
    without copying.
    """

    __slots__ = ("capacity", "slots", "hits", "misses", "evictions")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.slots: list = [None] * capacity
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    # A slot holds the key plus a ~100-float32 vector; 600 bytes covers
    # the array, the tuple, and list-slot overhead well enough for a
    # size knob.
    BYTES_PER_SLOT = 600

    @classmethod
    def from_megabytes(cls, megabytes: float) -> "FeatureCache":
        return cls(max(1, int(megabytes * (1 << 20) / cls.BYTES_PER_SLOT)))

    def __len__(self) -> int:
        return sum(1 for s in self.slots if s is not None)

    def get(self, key: int) -> Optional[np.ndarray]:
        entry = self.slots[key % self.capacity]
        if entry is not None and entry[0] == key:
            self.hits += 1
            return entry[1]
        self.misses += 1
        return None

    def put(self, key: int, vector: np.ndarray) -> None:
        i = key % self.capacity
        old = self.slots[i]
        if old is not None and old[0] != key:
            self.evictions += 1
        vector.setflags(write=False)
        self.slots[i] = (key, vector)

    def stats(self) -> dict:
        return {"hits": self.hits, "misses": self.misses,
                "evictions": self.evictions, "size": len(self),
                "capacity": self.capacity}


def _extractor_of(net) -> FeatureExtractor:
    return getattr(net, "extractor", net)


def _run_layers(layers, x: np.ndarray) -> np.ndarray:
    for layer in layers:
        z = layer.weights @ x + layer.bias
        if layer.activation == RELU:
            x = np.maximum(z, 0)
        elif layer.activation == LINEAR:
            x = z
        else:
            x = softmax_rows(z)
    return x


def features_of(p: Position, net, cache: Optional[FeatureCache] = None
                ) -> np.ndarray:
    """Feature vector of a position: sparse first layer, dense rest.

    With a cache, repeat queries for the same position (by Zobrist key)
    return the stored vector; cold and warm results are identical.
    """
    if cache is not None:
        hit = cache.get(p.zobrist)
        if hit is not None:
            return hit
    ext = _extractor_of(net)
    first = ext.layers[0]
    z = sparse_affine(first, active_bits(p))
    x = np.maximum(z, 0) if first.activation == RELU else z
    x = _run_layers(ext.layers[1:], x)
    if cache is not None:
        cache.put(p.zobrist, x)
    return x


def compare(net, fa: np.ndarray, fb: np.ndarray) -> tuple:
    """Order two feature vectors with the comparison head.

    Returns (ordering, confidence) where confidence is the winning
    softmax component. An exact tie is SecondBetter by convention.
    """
    head = getattr(net, "head", net)
    probs = _run_layers(head, np.concatenate([fa, fb]))
    if probs[0] > probs[1]:
        return Ordering.FIRST_BETTER, float(probs[0])
    return Ordering.SECOND_BETTER, float(probs[1])


def compare_white_perspective(net: SiameseNetwork, pa: Position, pb: Position,
                              cache: Optional[FeatureCache] = None) -> Ordering:
    """Which of two positions is better for White, per the model."""
    fa = features_of(pa, net, cache)
    fb = features_of(pb, net, cache)
    return compare(net, fa, fb)[0]


# --- comparators ---------------------------------------------------------
#
# A comparator is a callable (Position, Position) -> Ordering, always
# from White's perspective. The search layer inverts it for Black.

class LearnedComparator:
    """Model-backed comparator with an optional shared feature cache."""

    def __init__(self, net: SiameseNetwork,
                 cache: Optional[FeatureCache] = None):
        self.net = net
        self.cache = cache
        self.calls = 0

    def __call__(self, pa: Position, pb: Position) -> Ordering:
        self.calls += 1
        return compare_white_perspective(self.net, pa, pb, self.cache)


# value per piece kind, indexed by abs(cell): -, P, N, B, R, Q, K
CELL_VALUES = (0, 1, 3, 3, 5, 9, 0)


def material_balance(p: Position) -> int:
    """Piece-value sum, White minus Black (pawn=1, N=B=3, R=5, Q=9)."""
    total = 0
    for cell in p.board:
        if cell > 0:
            total += CELL_VALUES[cell]
        elif cell < 0:
            total -= CELL_VALUES[-cell]
    return total


def _piece_activity(kind: int, sq: int, white: bool) -> int:
    r, f = divmod(sq, 8)
    rel_rank = r if white else 7 - r
    if kind == 1:  # pawns press toward promotion
        score = 2 * rel_rank
    elif kind in (2, 3, 5):  # minors and the queen like the middle
        score = 3 - max(abs(2 * f - 7), abs(2 * r - 7)) // 2
    elif kind == 4:
        score = 1 if rel_rank == 6 else 0  # rook on the seventh
    else:
        score = 0
    # per-square grain so equally-placed pieces still compare strictly
    return 2 * score + ((kind * 64 + sq) * 2654435761 >> 12 & 1)


def baseline_eval(p: Position) -> int:
    """Integer White-perspective score: material plus a small tiebreak.

    Material counts in units of 256 per pawn; the remainder is a
    bounded (< 1 pawn) activity term: pawn advancement, piece
    centrality, and — for the side that is ahead — driving the enemy
    king to the edge and toward one's own. Being scalar it induces a
    transitive order, and the activity term keeps the baseline engine
    making progress in won positions instead of shuffling into
    repetition draws it cannot see.
    """
    material = 0
    activity = 0
    for sq, cell in enumerate(p.board):
        if cell > 0:
            material += CELL_VALUES[cell]
            activity += _piece_activity(cell, sq, True)
        elif cell < 0:
            material -= CELL_VALUES[-cell]
            activity -= _piece_activity(-cell, sq, False)
    if material:
        strong = Color.WHITE if material > 0 else Color.BLACK
        weak_king = p.king_square(Color(1 - strong))
        strong_king = p.king_square(strong)
        wr, wf = divmod(weak_king, 8)
        edge = max(abs(2 * wf - 7), abs(2 * wr - 7)) // 2
        sr, sf = divmod(strong_king, 8)
        closeness = 7 - max(abs(sr - wr), abs(sf - wf))
        drive = 3 * edge + closeness
        activity += drive if strong == Color.WHITE else -drive
    return 256 * material + activity


class MaterialComparator:
    """Orders positions by material, activity breaking ties.

    The order is induced by the scalar `baseline_eval`, hence
    transitive: it doubles as the correctness oracle for search tests.
    Exact ties (equal scores) read SecondBetter.
    """

    def __init__(self):
        self.calls = 0
        self._scores: dict = {}  # searches revisit positions heavily

    def _score(self, p: Position) -> int:
        s = self._scores.get(p.zobrist)
        if s is None:
            s = self._scores[p.zobrist] = baseline_eval(p)
        return s

    def __call__(self, pa: Position, pb: Position) -> Ordering:
        self.calls += 1
        if self._score(pa) > self._score(pb):
            return Ordering.FIRST_BETTER
        return Ordering.SECOND_BETTER


def _mix64(x: int) -> int:
    # splitmix64 finalizer: deterministic, hash-seed independent
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


class RandomComparator:
    """Arbitrary but reproducible orderings, as a baseline opponent.

    The verdict for a pair is a pure function of (seed, both position
    hashes), so repeated queries agree but the relation is generally
    intransitive.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls = 0

    def __call__(self, pa: Position, pb: Position) -> Ordering:
        self.calls += 1
        h = _mix64(self.seed ^ _mix64(pa.zobrist) ^ _mix64(pb.zobrist * 3))
        return Ordering.FIRST_BETTER if h & 1 else Ordering.SECOND_BETTER


class ConsistencyReport(NamedTuple):
    triples: int
    cycles: int
    cycle_rate: float


def audit_consistency(cmp, positions: Sequence[Position], triples: int,
                      seed: int = 0) -> ConsistencyReport:
    """Estimate how often the comparator is cyclic on sampled triples.

    A triple (a, b, c) counts as a cycle when the three pairwise
    verdicts chain strictly around (a>b>c>a in either direction). A
    transitive comparator scores 0.
    """
    import random

    if len(positions) < 3:
        raise ValueError("need at least 3 positions to audit")
    rng = random.Random(seed)

    def beats(x: Position, y: Position) -> bool:
        return cmp(x, y) is Ordering.FIRST_BETTER

    cycles = 0
    for _ in range(triples):
        a, b, c = rng.sample(range(len(positions)), 3)
        pa, pb, pc = positions[a], positions[b], positions[c]
        # each direction queried explicitly: SecondBetter alone could be
        # a tie, which must not register as a reverse cycle
        if ((beats(pa, pb) and beats(pb, pc) and beats(pc, pa))
                or (beats(pb, pa) and beats(pc, pb) and beats(pa, pc))):
            cycles += 1
    return ConsistencyReport(triples, cycles, cycles / triples)
