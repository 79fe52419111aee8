"""Seeded corpus of toric surface pairs built by iterated blow-ups of P^2.

Each blow-up pulls the current ample class back and subtracts a small
multiple of the exceptional curve, halving the multiple until the result is
ample again.  Random rationals keep threshold ties rare without excluding
them.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import toric
from .mmp import MmpPair
from .toric import ToricSurfaceFan, WeilDivisor

DEFAULT_SEED = 20240611


def blow_up_ample(fan: ToricSurfaceFan, H: WeilDivisor, i: int,
                  eps: Fraction) -> tuple[ToricSurfaceFan, WeilDivisor]:
    new, D = toric.pullback(fan, H, i)
    e = toric.blow_up_index(fan, new, i)
    while True:
        coeffs = list(D.coeffs)
        coeffs[e] -= eps
        cand = WeilDivisor(tuple(coeffs))
        if toric.is_ample(new, cand):
            return new, cand
        eps /= 2


def random_pair(rng: np.random.Generator, blowups: int) -> MmpPair:
    fan = toric.validate_fan(toric.P2)
    H = WeilDivisor.of([0, 0, int(rng.integers(1, 5))])
    for _ in range(blowups):
        i = int(rng.integers(len(fan)))
        eps = Fraction(int(rng.integers(1, 8)), int(rng.integers(8, 40)))
        fan, H = blow_up_ample(fan, H, i, eps)
    return MmpPair(fan, H)


def blowup_corpus(count: int = 50, seed: int = DEFAULT_SEED, max_blowups: int = 6) -> list[MmpPair]:
    """``count`` pairs with 0..max_blowups blow-ups, one generator per index."""
    out = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        out.append(random_pair(rng, int(rng.integers(0, max_blowups + 1))))
    return out
