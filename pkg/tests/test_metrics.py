import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dfa_mt.metrics import (BleuStats, Corpus, bleu, bleu_from_stats, chrf2, chrf_from_stats, chrf_segment_stats,
                            metric_signature, score_corpus, sentence_bleu4, tokenize_for_bleu)


@pytest.mark.parametrize("text,lang,tokens", [
    ("Hello, world.", "en", ["Hello", ",", "world", "."]),
    ("It costs 13.5 euros!", "en", ["It", "costs", "13.5", "euros", "!"]),
    ("Gehen Sie (bitte) zur Startseite.", "de", ["Gehen", "Sie", "(", "bitte", ")", "zur", "Startseite", "."]),
    ("我爱北京abc。", "zh", ["我", "爱", "北", "京", "abc", "。"]),
    ("", "en", []),
])
def test_tokenizer_examples(text, lang, tokens):
    assert tokenize_for_bleu(text, lang) == tokens


def test_two_segment_example_by_hand():
    two = Corpus(["the cat sat on the mat", "a quick brown fox"],
                 ["the cat is on the mat", "the quick brown fox"], "en")
    res = bleu(two)
    assert res.precisions == pytest.approx((80.0, 62.5, 100 / 3, 12.5))
    assert res.brevity_penalty == 1.0
    assert res.score == pytest.approx(100 * (0.8 * 5 / 8 * 2 / 6 * 1 / 8) ** 0.25)


def test_brevity_penalty_value():
    res = bleu(Corpus(["the cat"], ["the cat sat on the mat"], "en"))
    assert res.brevity_penalty == pytest.approx(math.exp(1 - 6 / 2))


def test_empty_hypothesis_is_flagged():
    res = bleu(Corpus([""], ["the cat"], "en"))
    assert res.score == 0.0 and res.empty_hypothesis
    assert score_corpus(Corpus([""], ["the cat"], "en")).empty_hypothesis


def test_corpus_validation():
    with pytest.raises(ValueError, match="2 hypotheses vs 1"):
        Corpus(["a", "b"], ["a"], "en")
    with pytest.raises(ValueError):
        Corpus([], [], "en")


def test_smoothing_of_zero_match_orders():
    stats = BleuStats(correct=(3, 0, 0, 0), total=(4, 3, 2, 1), sys_len=4, ref_len=4)
    res = bleu_from_stats(stats)
    expected = (3 / 4 * 1 / (2 * 3) * 1 / (4 * 2) * 1 / (8 * 1)) ** 0.25
    assert res.score == pytest.approx(100 * expected)


def test_chrf_ignores_whitespace():
    assert chrf_segment_stats("a b c", "abc") == chrf_segment_stats("abc", "abc")


def test_report_and_signature():
    rep = score_corpus(Corpus(["the cat sat"], ["the cat sat"], "zh"))
    d = rep.to_dict()
    assert d["bleu"] == 100.0 and d["bleu4"] == 100.0 and d["chrf2"] == 100.0
    assert d["n_segments"] == 1
    assert "tok=zh" in d["signature"] and "tok=13a" in metric_signature("de")


WORDS = st.sampled_from(["the", "cat", "sat", "on", "mat", "a", "dog", "bank", "river", "."])
SEG = st.lists(WORDS, min_size=1, max_size=10).map(" ".join)
PAIRS = st.lists(st.tuples(SEG, SEG), min_size=1, max_size=6)


def _corpus(pairs, lang="en"):
    return Corpus([h for h, _ in pairs], [r for _, r in pairs], lang)


@settings(max_examples=200, deadline=None)
@given(PAIRS, st.randoms(use_true_random=False))
def test_corpus_scores_are_permutation_invariant(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a, b = _corpus(pairs), _corpus(shuffled)
    assert bleu(a).score == pytest.approx(bleu(b).score, abs=1e-9)
    assert chrf2(a) == pytest.approx(chrf2(b), abs=1e-9)
    assert sentence_bleu4(a) == pytest.approx(sentence_bleu4(b), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(PAIRS)
def test_scores_in_range_and_identity(pairs):
    c = _corpus(pairs)
    rep = score_corpus(c)
    for v in (rep.bleu, rep.bleu4, rep.chrf2):
        assert 0.0 <= v <= 100.0 + 1e-9
    refs = [r for _, r in pairs]
    same = Corpus(refs, refs, "en")
    assert bleu(same).score == pytest.approx(100.0)
    assert chrf2(same) == pytest.approx(100.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30))
def test_brevity_penalty_monotone_in_length(c, r):
    def bp(sys_len):
        return bleu_from_stats(BleuStats((1, 0, 0, 0), (sys_len, 0, 0, 0), sys_len, r)).brevity_penalty

    assert 0.0 < bp(c) <= 1.0
    assert bp(c) <= bp(c + 1)
    assert (bp(c) == 1.0) == (c >= r)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=18, max_size=18))
def test_beta_weights_recall(raw):
    # build consistent stats: match <= min(hyp, ref)
    stats = []
    for n in range(6):
        h, r, m = raw[3 * n: 3 * n + 3]
        h, r = h + 1, r + 1
        stats += [h, r, min(m, h, r)]
    prec = sum(stats[3 * n + 2] / stats[3 * n] for n in range(6)) / 6
    rec = sum(stats[3 * n + 2] / stats[3 * n + 1] for n in range(6)) / 6
    f1, f2 = chrf_from_stats(stats, beta=1), chrf_from_stats(stats, beta=2)
    if rec > prec:
        assert f2 >= f1 - 1e-9
    elif rec < prec:
        assert f2 <= f1 + 1e-9


# optional cross-check against the reference implementation

TEXT_SEG = st.lists(st.sampled_from(["the", "cat", "sat", "on", "mat", "a", "Dog", "13.5", ",", "bank's"]),
                    min_size=1, max_size=12).map(" ".join)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(TEXT_SEG, TEXT_SEG), min_size=1, max_size=5))
def test_agrees_with_sacrebleu(pairs):
    sacrebleu = pytest.importorskip("sacrebleu")
    hyps, refs = [h for h, _ in pairs], [r for _, r in pairs]
    c = Corpus(hyps, refs, "en")
    assert chrf2(c) == pytest.approx(sacrebleu.corpus_chrf(hyps, [refs]).score, abs=1e-6)
    for h, r in pairs:
        ours = sentence_bleu4(Corpus([h], [r], "en"))
        assert ours == pytest.approx(sacrebleu.sentence_bleu(h, [r]).score, abs=1e-6)
    # corpus BLEU differs only when an order has no hypothesis n-grams at all
    assume(any(len(tokenize_for_bleu(h, "en")) >= 4 for h in hyps))
    assert bleu(c).score == pytest.approx(sacrebleu.corpus_bleu(hyps, [refs]).score, abs=1e-6)
