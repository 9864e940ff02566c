"""Linear-chain CRF over BIO tags: forward log-partition, posterior marginals,
Viterbi decoding, and the NLL gradient in terms of (marginal - gold) counts.

Structural BIO constraints are boolean masks; disallowed cells contribute
-inf to scores and receive zero gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NEG_INF = -np.inf


def logsumexp(a: np.ndarray, axis=None) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    amax_safe = np.where(np.isfinite(amax), amax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - amax_safe), axis=axis, keepdims=True)) + amax_safe
    out = np.where(np.isfinite(amax), out, NEG_INF)
    if axis is None:
        return out.reshape(())
    return np.squeeze(out, axis=axis)


def bio_tags(entity_types: list[str]) -> list[str]:
    tags = ["O"]
    for t in entity_types:
        tags.append(f"B-{t}")
        tags.append(f"I-{t}")
    return tags


def bio_masks(tags: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """(start_allowed[K], transition_allowed[K, K]) for BIO well-formedness.

    I-x may only follow B-x or I-x; sequences may not start with I-x.
    """
    k = len(tags)
    start = np.ones(k, dtype=bool)
    trans = np.ones((k, k), dtype=bool)
    for j, tj in enumerate(tags):
        if tj.startswith("I-"):
            start[j] = False
            body = tj[2:]
            for i, ti in enumerate(tags):
                if ti == f"B-{body}" or ti == f"I-{body}":
                    continue
                trans[i, j] = False
    return start, trans


@dataclass
class CrfScores:
    """Effective (masked) scores for one sequence."""

    emissions: np.ndarray  # (T, K)
    transitions: np.ndarray  # (K, K), -inf at disallowed cells
    start: np.ndarray  # (K,), -inf at disallowed tags
    end: np.ndarray  # (K,)


def sequence_score(s: CrfScores, tags: list[int]) -> float:
    total = s.start[tags[0]] + s.emissions[0, tags[0]]
    for t in range(1, len(tags)):
        total += s.transitions[tags[t - 1], tags[t]] + s.emissions[t, tags[t]]
    return float(total + s.end[tags[-1]])


def forward_alpha(s: CrfScores) -> np.ndarray:
    t_len, k = s.emissions.shape
    alpha = np.empty((t_len, k))
    alpha[0] = s.start + s.emissions[0]
    for t in range(1, t_len):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + s.transitions, axis=0) + s.emissions[t]
    return alpha


def backward_beta(s: CrfScores) -> np.ndarray:
    t_len, k = s.emissions.shape
    beta = np.empty((t_len, k))
    beta[-1] = s.end
    for t in range(t_len - 2, -1, -1):
        beta[t] = logsumexp(s.transitions + (s.emissions[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(s: CrfScores) -> float:
    alpha = forward_alpha(s)
    return float(logsumexp(alpha[-1] + s.end))


def marginals(s: CrfScores) -> tuple[np.ndarray, np.ndarray, float]:
    """Unary P(y_t = k), pairwise P(y_t = i, y_{t+1} = j), and log Z."""
    alpha = forward_alpha(s)
    beta = backward_beta(s)
    log_z = float(logsumexp(alpha[-1] + s.end))
    unary = np.exp(alpha + beta - log_z)
    t_len, k = s.emissions.shape
    pair = np.zeros((max(t_len - 1, 0), k, k))
    for t in range(t_len - 1):
        m = (
            alpha[t][:, None]
            + s.transitions
            + (s.emissions[t + 1] + beta[t + 1])[None, :]
            - log_z
        )
        pair[t] = np.exp(m)
    return unary, pair, log_z


def viterbi(s: CrfScores) -> tuple[list[int], float]:
    t_len, k = s.emissions.shape
    score = s.start + s.emissions[0]
    back: list[np.ndarray] = []
    for t in range(1, t_len):
        grid = score[:, None] + s.transitions
        best_prev = np.argmax(grid, axis=0)
        score = grid[best_prev, np.arange(k)] + s.emissions[t]
        back.append(best_prev)
    score = score + s.end
    last = int(np.argmax(score))
    best_score = float(score[last])
    path = [last]
    for bp in reversed(back):
        path.append(int(bp[path[-1]]))
    path.reverse()
    return path, best_score


def nll_and_grads(s: CrfScores, gold: list[int]) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Negative log-likelihood plus gradients wrt emissions/transitions/start/end.

    Gradients are (expected counts under the model) - (gold counts);
    -inf cells have probability 0 and therefore zero gradient.
    """
    t_len, k = s.emissions.shape
    unary, pair, log_z = marginals(s)
    nll = log_z - sequence_score(s, gold)

    d_em = unary.copy()
    for t, g in enumerate(gold):
        d_em[t, g] -= 1.0
    d_trans = pair.sum(axis=0) if t_len > 1 else np.zeros((k, k))
    for t in range(1, t_len):
        d_trans[gold[t - 1], gold[t]] -= 1.0
    d_start = unary[0].copy()
    d_start[gold[0]] -= 1.0
    d_end = unary[-1].copy()
    d_end[gold[-1]] -= 1.0
    return float(nll), d_em, d_trans, d_start, d_end


def tags_to_spans(tag_ids: list[int], tags: list[str]) -> list[tuple[int, int, str]]:
    """BIO ids -> [start, end) typed spans. Decoded sequences are well-formed by
    construction (masked transitions), but stray I- tags are treated as B-."""
    spans = []
    start = None
    cur_type = None
    for i, tid in enumerate(tag_ids):
        tag = tags[tid]
        if tag == "O":
            if start is not None:
                spans.append((start, i, cur_type))
                start, cur_type = None, None
        elif tag.startswith("B-"):
            if start is not None:
                spans.append((start, i, cur_type))
            start, cur_type = i, tag[2:]
        else:  # I-x
            if start is None or cur_type != tag[2:]:
                if start is not None:
                    spans.append((start, i, cur_type))
                start, cur_type = i, tag[2:]
    if start is not None:
        spans.append((start, len(tag_ids), cur_type))
    return spans


def spans_to_tags(spans: list[tuple[int, int, str]], length: int, tags: list[str]) -> list[int]:
    index = {t: i for i, t in enumerate(tags)}
    out = [index["O"]] * length
    for start, end, etype in spans:
        out[start] = index[f"B-{etype}"]
        for i in range(start + 1, end):
            out[i] = index[f"I-{etype}"]
    return out
