"""Linear-chain CRF output layer: log-likelihood objective and Viterbi.

Scores use dedicated start/end vectors plus a [C x C] from-tag -> to-tag
transition matrix. Gradients come from reverse-mode differentiation through
the log-space forward recurrence. Masks are trailing-padding masks: a masked
step contributes nothing to partition, score, or decode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from casefold import autodiff as ad
from casefold.autodiff import ClassOutOfRange, Parameter, Value


class EmptySequence(ValueError):
    """No unmasked timesteps remain."""


@dataclass
class CrfParams:
    transitions: Parameter  # [C, C]
    start: Parameter  # [C]
    end: Parameter  # [C]

    @property
    def num_tags(self) -> int:
        return self.start.data.shape[0]

    @classmethod
    def init(cls, rng: np.random.Generator, num_tags: int) -> "CrfParams":
        scale = 0.1
        return cls(
            transitions=Parameter(rng.uniform(-scale, scale, (num_tags, num_tags)), "crf.transitions"),
            start=Parameter(rng.uniform(-scale, scale, num_tags), "crf.start"),
            end=Parameter(rng.uniform(-scale, scale, num_tags), "crf.end"),
        )

    def parameters(self) -> list[Parameter]:
        return [self.transitions, self.start, self.end]


def _as_batch(emissions: Value, mask) -> tuple[Value, np.ndarray]:
    if emissions.ndim == 2:
        emissions = ad.reshape(emissions, (1,) + emissions.shape)
        if mask is not None:
            mask = np.asarray(mask)[None, :]
    b, t, _ = emissions.shape
    mask = np.ones((b, t)) if mask is None else np.asarray(mask, dtype=np.float64)
    if not mask.any(axis=1).all():
        raise EmptySequence("a sequence has no unmasked steps")
    if not mask[:, 0].all():
        raise EmptySequence("masks must be trailing-padding masks (step 0 live)")
    return emissions, mask


def log_partition_batch(emissions: Value, p: CrfParams, mask=None) -> Value:
    """Forward algorithm in log space; [B, T, C] emissions -> [B] log Z."""
    emissions, mask = _as_batch(emissions, mask)
    b, t_max, c = emissions.shape
    alpha = ad.add(emissions[:, 0, :], p.start)
    for t in range(1, t_max):
        scores = ad.add(ad.reshape(alpha, (b, c, 1)), p.transitions)
        new = ad.logsumexp(scores, axis=1) + emissions[:, t, :]
        m = mask[:, t:t + 1]
        if m.all():
            alpha = new
        else:
            alpha = new * m + alpha * (1.0 - m)
    return ad.logsumexp(ad.add(alpha, p.end), axis=1)


def path_score_batch(emissions: Value, tags: np.ndarray, p: CrfParams, mask=None) -> Value:
    """Score of given tag paths; [B, T, C] emissions, [B, T] tags -> [B]."""
    emissions, mask = _as_batch(emissions, mask)
    b, t_max, c = emissions.shape
    tags = np.asarray(tags, dtype=np.int64).reshape(b, t_max)
    live = mask > 0.0
    if ((tags[live] < 0) | (tags[live] >= c)).any():
        raise ClassOutOfRange(f"tag ids outside [0, {c})")
    safe_tags = np.where(live, tags, 0)

    onehot = np.zeros((b, t_max, c))
    bi, ti = np.nonzero(live)
    onehot[bi, ti, safe_tags[bi, ti]] = 1.0
    em_sum = (emissions * onehot).sum(axis=(1, 2))

    start_sel = p.start[tags[:, 0]]
    lengths = live.sum(axis=1).astype(np.int64)
    last_tags = safe_tags[np.arange(b), lengths - 1]
    end_sel = p.end[last_tags]

    score = em_sum + start_sel + end_sel
    if t_max > 1:
        pair_live = (live[:, :-1] & live[:, 1:]).astype(np.float64)
        frm = safe_tags[:, :-1].ravel()
        to = safe_tags[:, 1:].ravel()
        trans_sel = p.transitions[(frm, to)] * pair_live.ravel()
        score = score + ad.reshape(trans_sel, (b, t_max - 1)).sum(axis=1)
    return score


def nll_batch(emissions: Value, tags: np.ndarray, p: CrfParams, mask=None) -> Value:
    """Mean per-sequence negative log-likelihood over the batch."""
    log_z = log_partition_batch(emissions, p, mask)
    score = path_score_batch(emissions, tags, p, mask)
    b = log_z.shape[0]
    return (log_z - score).sum() * (1.0 / b)


def crf_log_partition(emissions: Value, p: CrfParams, mask=None) -> Value:
    """log sum over all tag paths of exp(path score), one [T, C] sequence."""
    out = log_partition_batch(emissions, p, mask)
    return ad.reshape(out, ())


def crf_score(emissions: Value, tags, p: CrfParams, mask=None) -> Value:
    """Score of one tag path for a [T, C] sequence."""
    tags = np.asarray(tags, dtype=np.int64)
    out = path_score_batch(emissions, tags[None, :], p, mask)
    return ad.reshape(out, ())


def crf_neg_log_likelihood(emissions: Value, tags, p: CrfParams, mask=None) -> Value:
    """crf_log_partition - crf_score; non-negative, differentiable."""
    return crf_log_partition(emissions, p, mask) - crf_score(emissions, tags, p, mask)


def viterbi_decode(emissions, p: CrfParams, mask=None) -> tuple[list[int], float]:
    """Maximum-scoring tag path and its score.

    Ties break toward the lower tag id at every backpointer decision. Masked
    positions are skipped and report tag 0 in the returned path.
    """
    e = emissions.data if isinstance(emissions, Value) else np.asarray(emissions, dtype=np.float64)
    if e.ndim != 2:
        raise ValueError(f"viterbi_decode expects [T, C] emissions, got {e.shape}")
    t_max, c = e.shape
    live = np.ones(t_max, bool) if mask is None else np.asarray(mask).astype(bool)
    steps = np.nonzero(live)[0]
    if len(steps) == 0:
        raise EmptySequence("no unmasked steps to decode")
    trans = p.transitions.data
    score = p.start.data + e[steps[0]]
    backptr: list[np.ndarray] = []
    for t in steps[1:]:
        cand = score[:, None] + trans
        best_prev = np.argmax(cand, axis=0)
        score = cand[best_prev, np.arange(c)] + e[t]
        backptr.append(best_prev)
    final = score + p.end.data
    tag = int(np.argmax(final))
    best_score = float(final[tag])
    rev = [tag]
    for bp in reversed(backptr):
        tag = int(bp[tag])
        rev.append(tag)
    rev.reverse()
    path = np.zeros(t_max, dtype=np.int64)
    path[steps] = rev
    return path.tolist(), best_score
