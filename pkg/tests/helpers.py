"""Shared test oracles: finite differences, path enumeration, fixtures."""

from __future__ import annotations

import itertools

import numpy as np

from casefold.corpus import Sentence, Token


def finite_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar f() w.r.t. array x,
    mutating x in place around each evaluation."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        f_hi = f()
        x[idx] = orig - h
        f_lo = f()
        x[idx] = orig
        g[idx] = (f_hi - f_lo) / (2.0 * h)
    return g


def max_rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))


def enumerate_crf_paths(emissions: np.ndarray, trans: np.ndarray,
                        start: np.ndarray, end: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All tag paths and their scores, brute force."""
    t_max, c = emissions.shape
    paths = np.array(list(itertools.product(range(c), repeat=t_max)), dtype=np.int64)
    scores = start[paths[:, 0]] + end[paths[:, -1]]
    for t in range(t_max):
        scores = scores + emissions[t, paths[:, t]]
    for t in range(t_max - 1):
        scores = scores + trans[paths[:, t], paths[:, t + 1]]
    return paths, scores


def brute_log_partition(emissions, trans, start, end) -> float:
    _, scores = enumerate_crf_paths(emissions, trans, start, end)
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()))


def brute_viterbi(emissions, trans, start, end) -> tuple[list[int], float]:
    paths, scores = enumerate_crf_paths(emissions, trans, start, end)
    k = int(np.argmax(scores))
    return paths[k].tolist(), float(scores[k])


def sent(*pairs: str) -> Sentence:
    """sent("The/DT", "cat/NN") -> Sentence."""
    toks = []
    for p in pairs:
        surface, _, label = p.rpartition("/")
        toks.append(Token(surface, label))
    return Sentence(tuple(toks))


def random_sentences(rng: np.random.Generator, n: int, labels=("A", "B"),
                     words=("Alpha", "beta", "Gamma", "delta", "EPS", "zeta")) -> list[Sentence]:
    out = []
    for _ in range(n):
        k = int(rng.integers(1, 6))
        toks = [
            Token(words[rng.integers(len(words))], labels[rng.integers(len(labels))])
            for _ in range(k)
        ]
        out.append(Sentence(tuple(toks)))
    return out
