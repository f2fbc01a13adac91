"""Ground-truth oracles for the functional-equation machinery.

Words of the free product are tuples of (factor_index, element) letters in
normal form.  bfs_convolution propagates exact probability mass over words;
states whose minimal erase cost already exceeds the remaining step budget can
never contribute a return, so the reachable state space is only the radius
N/2 ball (mass crossing that boundary is accumulated in an escape bucket to
keep the per-step totals at exactly 1).  simulate runs seeded Monte Carlo
trajectories with counter-based per-block streams, so results are independent
of how walks are partitioned across workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StateExplosion
from .product import FreeProductSpec
from .series import PowerSeries

DEFAULT_STATE_CAP = 50_000_000
_SIM_BLOCK = 4096  # walks per RNG stream; fixed so seeding is partition-proof

Word = tuple


def word_multiply(factors, word: Word, factor: int, g) -> Word:
    """Right-multiply a normal-form word by group element g of one factor."""
    spec = factors[factor]
    if g == spec.identity_elem():
        return word
    if word and word[-1][0] == factor:
        merged = spec.combine(word[-1][1], g)
        if merged == spec.identity_elem():
            return word[:-1]
        return word[:-1] + ((factor, merged),)
    return word + ((factor, g),)


def word_is_normal(factors, word: Word) -> bool:
    """Normal-form invariant: no identity letters, no equal adjacent factors."""
    for idx, (i, g) in enumerate(word):
        if g == factors[i].identity_elem():
            return False
        if idx > 0 and word[idx - 1][0] == i:
            return False
    return True


def word_erase_cost(factors, word: Word) -> int:
    """Lower bound on the steps needed to walk the word back to the identity."""
    return sum(factors[i].dist_to_identity(g) for i, g in word)


def _support(spec: FreeProductSpec):
    out = []
    for i, (f, a) in enumerate(zip(spec.factors, spec.weights)):
        for g, p in f.step_support():
            out.append((i, g, a * p))
    return out


def bfs_convolution(
    spec: FreeProductSpec, order: int, state_cap: int = DEFAULT_STATE_CAP
) -> PowerSeries:
    """Exact return probabilities mu^(n)(e) for n <= order by mass propagation."""
    factors = spec.factors
    support = _support(spec)
    budget = order // 2

    states = [()]
    index = {(): 0}
    frontier = [()]
    while frontier:
        nxt = []
        for w in frontier:
            for i, g, _ in support:
                t = word_multiply(factors, w, i, g)
                if t not in index and word_erase_cost(factors, t) <= budget:
                    index[t] = len(states)
                    states.append(t)
                    nxt.append(t)
                    if len(states) > state_cap:
                        raise StateExplosion(
                            f"more than {state_cap} words within reach; lower the order"
                        )
        frontier = nxt

    nstates = len(states)
    targets = np.empty((len(support), nstates), dtype=np.int64)
    for k, (i, g, _) in enumerate(support):
        for s, w in enumerate(states):
            targets[k, s] = index.get(word_multiply(factors, w, i, g), -1)
    probs = np.array([p for _, _, p in support])

    mass = np.zeros(nstates)
    mass[0] = 1.0
    escaped = 0.0
    out = np.zeros(order + 1)
    out[0] = 1.0
    for n in range(1, order + 1):
        nxt = np.zeros(nstates)
        for k in range(len(support)):
            tgt = targets[k]
            keep = tgt >= 0
            np.add.at(nxt, tgt[keep], probs[k] * mass[keep])
            escaped += probs[k] * float(np.sum(mass[~keep]))
        mass = nxt
        total = float(np.sum(mass)) + escaped
        if abs(total - 1.0) > 1e-12:
            raise StateExplosion(f"probability mass drifted to {total}")
        out[n] = mass[0]
    return PowerSeries(out)


@dataclass(frozen=True)
class SimulationResult:
    """Per-step return counts over independent walks."""

    steps: int
    walks: int
    seed: int
    returns: tuple  # returns[n] walks found at the identity after n steps

    def frequencies(self) -> np.ndarray:
        return np.array(self.returns, dtype=float) / self.walks


def _simulate_block(args):
    factors, support, seed, block, nwalks, steps = args
    rng = np.random.Generator(np.random.Philox(key=[seed, block]))
    probs = np.array([p for _, _, p in support])
    counts = np.zeros(steps + 1, dtype=np.int64)
    counts[0] = nwalks
    draws = rng.choice(len(support), size=(nwalks, steps), p=probs)
    for row in draws:
        word = ()
        for n, k in enumerate(row, start=1):
            i, g, _ = support[k]
            word = word_multiply(factors, word, i, g)
            if not word:
                counts[n] += 1
    return counts


def simulate(spec: FreeProductSpec, steps: int, walks: int, seed: int) -> SimulationResult:
    """Empirical return profile from `walks` seeded trajectories.

    Walks are grouped in fixed-size blocks, each drawn from the Philox stream
    keyed (seed, block index); FPRW_THREADS > 1 distributes blocks over
    processes without changing any draw.
    """
    if steps < 0 or walks < 1:
        raise ConfigError("need steps >= 0 and walks >= 1")
    factors = spec.factors
    support = _support(spec)
    blocks = []
    lo = 0
    b = 0
    while lo < walks:
        n = min(_SIM_BLOCK, walks - lo)
        blocks.append((factors, support, seed, b, n, steps))
        lo += n
        b += 1
    threads = int(os.environ.get("FPRW_THREADS", "1"))
    if threads > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_simulate_block, blocks))
    else:
        parts = [_simulate_block(a) for a in blocks]
    counts = np.sum(parts, axis=0)
    return SimulationResult(steps=steps, walks=walks, seed=seed, returns=tuple(int(c) for c in counts))
