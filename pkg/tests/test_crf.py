import numpy as np
import pytest

from oracles import brute_log_partition, brute_marginals, brute_viterbi

from prefteach import crf


def random_instance(rng, t_len, k, masked=False):
    emissions = rng.normal(size=(t_len, k))
    transitions = rng.normal(size=(k, k))
    start = rng.normal(size=k)
    end = rng.normal(size=k)
    if masked:
        # knock out a few transitions the way BIO constraints do
        forbid = rng.random((k, k)) < 0.2
        transitions = np.where(forbid, -np.inf, transitions)
        if k > 1:
            start[rng.integers(k)] = -np.inf
    return crf.CrfScores(emissions=emissions, transitions=transitions, start=start, end=end)


@pytest.mark.parametrize("masked", [False, True])
def test_forward_matches_enumeration(masked):
    rng = np.random.default_rng(0 if not masked else 1)
    for _ in range(60):
        t_len = int(rng.integers(1, 6))
        k = int(rng.integers(2, 6))
        s = random_instance(rng, t_len, k, masked)
        assert crf.log_partition(s) == pytest.approx(
            brute_log_partition(s.emissions, s.transitions, s.start, s.end), abs=1e-6
        )


def test_marginals_match_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(40):
        t_len = int(rng.integers(1, 6))
        k = int(rng.integers(2, 6))
        s = random_instance(rng, t_len, k, masked=bool(rng.integers(2)))
        unary, pair, log_z = crf.marginals(s)
        b_unary, b_pair, b_log_z = brute_marginals(s.emissions, s.transitions, s.start, s.end)
        assert log_z == pytest.approx(b_log_z, abs=1e-6)
        assert np.allclose(unary, b_unary, atol=1e-6)
        assert np.allclose(pair, b_pair, atol=1e-6)
        assert np.allclose(unary.sum(axis=1), 1.0, atol=1e-9)


def test_viterbi_matches_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(60):
        t_len = int(rng.integers(1, 6))
        k = int(rng.integers(2, 6))
        s = random_instance(rng, t_len, k, masked=bool(rng.integers(2)))
        path, score = crf.viterbi(s)
        b_path, b_score = brute_viterbi(s.emissions, s.transitions, s.start, s.end)
        assert score == pytest.approx(b_score, abs=1e-6)
        assert crf.sequence_score(s, path) == pytest.approx(b_score, abs=1e-6)


def test_length_one_forward_is_softmax_denominator():
    rng = np.random.default_rng(4)
    k = 3
    s = crf.CrfScores(
        emissions=rng.normal(size=(1, k)),
        transitions=rng.normal(size=(k, k)),
        start=rng.normal(size=k),
        end=rng.normal(size=k),
    )
    gold = [1]
    nll, *_ = crf.nll_and_grads(s, gold)
    total = s.start + s.emissions[0] + s.end
    expected = -(total[1] - crf.logsumexp(total))
    assert nll == pytest.approx(float(expected), abs=1e-9)


def test_nll_grad_matches_finite_difference_on_scores():
    rng = np.random.default_rng(5)
    t_len, k = 4, 3
    s = random_instance(rng, t_len, k)
    gold = [int(g) for g in rng.integers(0, k, size=t_len)]
    nll, d_em, d_trans, d_start, d_end = crf.nll_and_grads(s, gold)
    h = 1e-5

    def loss():
        return crf.nll_and_grads(s, gold)[0]

    for arr, grad in ((s.emissions, d_em), (s.transitions, d_trans), (s.start, d_start), (s.end, d_end)):
        idx = tuple(rng.integers(0, n) for n in arr.shape)
        orig = arr[idx]
        arr[idx] = orig + h
        up = loss()
        arr[idx] = orig - h
        down = loss()
        arr[idx] = orig
        fd = (up - down) / (2 * h)
        assert grad[idx] == pytest.approx(fd, abs=1e-5)


def test_bio_masks_forbid_bad_transitions():
    tags = crf.bio_tags(["x", "y"])
    start, trans = crf.bio_masks(tags)
    i = {t: n for n, t in enumerate(tags)}
    assert not start[i["I-x"]]
    assert start[i["B-x"]] and start[i["O"]]
    assert not trans[i["O"], i["I-x"]]
    assert not trans[i["B-x"], i["I-y"]]
    assert not trans[i["I-y"], i["I-x"]]
    assert trans[i["B-x"], i["I-x"]]
    assert trans[i["I-x"], i["I-x"]]
    assert trans[i["B-x"], i["B-y"]]


def test_span_tag_roundtrip():
    tags = crf.bio_tags(["sport_team", "cuisine"])
    spans = [(1, 3, "sport_team"), (4, 5, "cuisine")]
    ids = crf.spans_to_tags(spans, 6, tags)
    assert crf.tags_to_spans(ids, tags) == spans


def test_logsumexp_handles_all_neg_inf():
    assert crf.logsumexp(np.array([-np.inf, -np.inf])) == -np.inf


def test_bio_decode_wellformed_fuzz_10k():
    """Viterbi under the BIO masks never emits I-x without B-x/I-x before it."""
    tags = crf.bio_tags(["a", "b", "c", "d", "e"])
    start_mask, trans_mask = crf.bio_masks(tags)
    k = len(tags)
    rng = np.random.default_rng(123)
    for _ in range(10_000):
        t_len = int(rng.integers(1, 11))
        s = crf.CrfScores(
            emissions=rng.normal(size=(t_len, k)) * 3.0,
            transitions=np.where(trans_mask, rng.normal(size=(k, k)), crf.NEG_INF),
            start=np.where(start_mask, rng.normal(size=k), crf.NEG_INF),
            end=rng.normal(size=k),
        )
        path, _score = crf.viterbi(s)
        prev = "O"
        for tid in path:
            tag = tags[tid]
            if tag.startswith("I-"):
                body = tag[2:]
                assert prev in (f"B-{body}", f"I-{body}"), [tags[t] for t in path]
            prev = tag
