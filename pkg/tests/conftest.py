import random

import pytest

from cmpchess.board import legal_moves, apply_move, startpos


def collect_playout(seed: int, plies: int):
    """Positions along one random legal playout from the start position."""
    rng = random.Random(seed)
    p = startpos()
    out = [p]
    for _ in range(plies):
        moves = legal_moves(p)
        if not moves:
            break
        p = apply_move(p, rng.choice(moves))
        out.append(p)
    return out


@pytest.fixture(scope="session")
def playout_positions():
    """A batch of assorted reachable positions, fixed across runs."""
    positions = []
    for seed in range(32):
        positions.extend(collect_playout(1000 + seed, 40))
    return positions
