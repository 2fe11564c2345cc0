import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.autodiff.tape import Tape, backward
from src.autodiff.tensor import Tensor
from src.decoders import (
    FastqRecord, RNAHead, context_encode, ctc_beam_decode, ctc_greedy_decode, ctc_loss, decode,
    emission_posteriors, encode, phred_string, read_fastq, reduce_path, rna_beam_decode,
    rna_emission_posteriors, rna_log_likelihood, rna_loss, sequence_log_likelihood, write_fastq,
)
from src.decoders.alphabet import context_codes
from src.decoders.ctc import log_softmax
from src.errors import UnalignableError


def _paths(L):
    return itertools.product(range(5), repeat=L)


def _brute_ctc(logits, collapse):
    """Total probability of every reduced sequence, by enumerating all label paths."""
    logp = log_softmax(logits)
    totals = {}
    for path in _paths(len(logits)):
        seq = reduce_path(path, collapse)
        totals[seq] = totals.get(seq, 0.0) + np.exp(sum(logp[i, c] for i, c in enumerate(path)))
    return totals


def _brute_rna(h, head):
    totals = {}
    for path in _paths(len(h)):
        prefix, prob = [], 1.0
        for i, c in enumerate(path):
            prob *= head.step_distribution(h[i], prefix)[c]
            if c != 4:
                prefix.append(c)
        seq = decode(prefix)
        totals[seq] = totals.get(seq, 0.0) + prob
    return totals


def _random_head(rng, k=2, H=3):
    head = RNAHead(H, rng, k=k)
    head.W.assign(rng.standard_normal(head.W.shape))
    head.b.assign(0.5 * rng.standard_normal(head.b.shape))
    head.start_bias.assign(0.5 * rng.standard_normal(head.start_bias.shape))
    return head


# ── alphabet ──────────────────────────────────────────────────────────────────

def test_reduction_drops_blanks_and_keeps_repeats():
    assert reduce_path([0, 4, 0]) == "AA"
    assert reduce_path([0, 0]) == "AA"
    assert reduce_path([4, 4]) == ""
    assert reduce_path([0, 0], collapse_repeats=True) == "A"
    assert reduce_path([0, 4, 0], collapse_repeats=True) == "AA"


def test_encode_decode():
    assert decode(encode("GATTACA")) == "GATTACA"
    assert encode("ACGT").tolist() == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        encode("ACGN")


def test_context_index_is_left_padded_with_a():
    assert context_encode("", 6) == 0
    assert context_encode("C", 6) == 1
    assert context_encode("CA", 2) == 4
    assert context_encode("GACGTAC", 6) == 433
    z = encode("TGCAAGT")
    codes = context_codes(z, 3)
    assert codes.tolist() == [context_encode(z[:j], 3) for j in range(len(z) + 1)]


# ── CTC ───────────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("collapse", [False, True])
def test_ctc_likelihood_matches_path_enumeration(collapse):
    rng = np.random.default_rng(0)
    logits = rng.standard_normal((4, 5))
    totals = _brute_ctc(logits, collapse)
    assert sum(totals.values()) == pytest.approx(1.0)
    for seq in ("", "A", "AC", "GG", "TAC", "CCCC"):
        expected = np.log(totals[seq]) if seq in totals else -np.inf
        assert sequence_log_likelihood(logits, seq, collapse) == pytest.approx(expected, rel=1e-9)


def test_repeats_need_a_separating_blank_only_when_collapsing():
    logits = np.zeros((2, 5))
    assert np.isfinite(sequence_log_likelihood(logits, "AA"))
    assert sequence_log_likelihood(logits, "AA", collapse_repeats=True) == -np.inf
    with pytest.raises(UnalignableError):
        ctc_loss(Tensor(logits[None]), [encode("AA")], [2], collapse_repeats=True)


def test_ctc_loss_is_per_read_and_respects_input_lengths():
    rng = np.random.default_rng(1)
    logits = rng.standard_normal((2, 6, 5))
    targets = [encode("ACG"), encode("TT")]
    nll = ctc_loss(Tensor(logits), targets, [6, 4]).data
    assert nll.shape == (2,)
    assert nll[0] == pytest.approx(-sequence_log_likelihood(logits[0], "ACG"), rel=1e-5)
    assert nll[1] == pytest.approx(-sequence_log_likelihood(logits[1, :4], "TT"), rel=1e-5)


def test_ctc_loss_rejects_targets_longer_than_the_input():
    with pytest.raises(UnalignableError) as info:
        ctc_loss(Tensor(np.zeros((1, 3, 5))), [encode("ACGT")], [3])
    assert (info.value.input_length, info.value.target_length) == (3, 4)


def test_ctc_gradient_is_softmax_minus_posteriors():
    rng = np.random.default_rng(2)
    logits = Tensor(rng.standard_normal((1, 5, 5)))
    with Tape() as tape:
        loss = ctc_loss(logits, [encode("CA")], [5]).sum()
    backward(loss, tape)
    grad = tape.grad(logits)
    # every step's gradient sums to zero (softmax rows and posteriors both sum to one)
    assert_allclose(grad.sum(axis=-1), 0.0, atol=1e-5)


def test_greedy_decoding():
    def onehot(path):
        return 10.0 * np.eye(5)[path]

    assert ctc_greedy_decode(onehot([0, 4, 0])) == "AA"
    assert ctc_greedy_decode(onehot([0, 0, 1])) == "AAC"
    assert ctc_greedy_decode(onehot([0, 0, 1]), collapse_repeats=True) == "AC"
    assert ctc_greedy_decode(np.zeros((0, 5))) == ""


@pytest.mark.parametrize("collapse", [False, True])
def test_full_width_beam_finds_the_most_likely_sequence(collapse):
    rng = np.random.default_rng(3)
    for _ in range(5):
        logits = 1.5 * rng.standard_normal((4, 5))
        totals = _brute_ctc(logits, collapse)
        best = max(totals, key=totals.get)
        assert ctc_beam_decode(logits, beam_width=400, collapse_repeats=collapse) == best


@pytest.mark.parametrize("collapse", [False, True])
def test_beam_is_never_less_likely_than_greedy(collapse):
    rng = np.random.default_rng(4)
    for width in (1, 2, 4):
        for _ in range(10):
            logits = 2.0 * rng.standard_normal((10, 5))
            beam = ctc_beam_decode(logits, width, collapse)
            greedy = ctc_greedy_decode(logits, collapse)
            assert sequence_log_likelihood(logits, beam, collapse) >= sequence_log_likelihood(logits, greedy, collapse) - 1e-9


def test_emission_posteriors_of_a_confident_call():
    logits = 20.0 * np.eye(5)[[2, 4, 0, 4, 3]]
    post = emission_posteriors(logits, "GAT")
    assert post.shape == (3,)
    assert_allclose(post, 1.0, atol=1e-6)
    assert emission_posteriors(logits, "").shape == (0,)


# ── RNA head ──────────────────────────────────────────────────────────────────

def test_context_free_table_reduces_to_ctc():
    rng = np.random.default_rng(5)
    head = RNAHead(3, rng, k=2)
    h = rng.standard_normal((6, 3))
    logits = h @ head.W.value.data[0].astype(np.float64).T
    for seq in ("", "A", "GT", "CCA"):
        assert rna_log_likelihood(h, seq, head) == pytest.approx(sequence_log_likelihood(logits, seq), rel=1e-5)


def test_padding_context_uses_a_and_start_biases_separate_prefix_lengths():
    rng = np.random.default_rng(6)
    head = RNAHead(3, rng, k=2)
    head.W.assign(rng.standard_normal(head.W.shape))
    h_i = rng.standard_normal(3)
    assert_allclose(head.step_distribution(h_i, []), head.step_distribution(h_i, [0, 0]))
    assert_allclose(head.step_distribution(h_i, [0]), head.step_distribution(h_i, [2, 0, 0]))
    head.start_bias.assign(np.array([[1.0, 0, 0, 0, 0], [0, 0, 0, 0, 0]]))
    assert not np.allclose(head.step_distribution(h_i, []), head.step_distribution(h_i, [0, 0]))


def test_rna_likelihood_matches_path_enumeration():
    rng = np.random.default_rng(7)
    head = _random_head(rng)
    h = rng.standard_normal((4, 3))
    totals = _brute_rna(h, head)
    assert sum(totals.values()) == pytest.approx(1.0)
    for seq in ("", "A", "CG", "AAA", "TGCA"):
        assert rna_log_likelihood(h, seq, head) == pytest.approx(np.log(totals[seq]), rel=1e-5)
    assert rna_loss(h, "CG", head) == pytest.approx(-np.log(totals["CG"]), rel=1e-5)


def test_rna_loss_op_agrees_with_the_single_read_form():
    rng = np.random.default_rng(8)
    head = _random_head(rng)
    h = rng.standard_normal((2, 7, 3))
    nll = head.loss(Tensor(h), [encode("ACT"), encode("GG")], [7, 5]).data
    assert nll[0] == pytest.approx(rna_loss(h[0], "ACT", head), rel=1e-4)
    assert nll[1] == pytest.approx(rna_loss(h[1, :5], "GG", head), rel=1e-4)


def test_rna_rejects_unalignable_targets():
    head = RNAHead(2, np.random.default_rng(9), k=2)
    with pytest.raises(UnalignableError):
        rna_loss(np.zeros((2, 2)), "ACG", head)
    assert rna_log_likelihood(np.zeros((2, 2)), "ACG", head) == -np.inf


def test_full_width_rna_beam_finds_the_most_likely_sequence():
    rng = np.random.default_rng(10)
    for _ in range(3):
        head = _random_head(rng)
        h = 1.5 * rng.standard_normal((4, 3))
        totals = _brute_rna(h, head)
        assert rna_beam_decode(h, head, beam_width=400) == max(totals, key=totals.get)


def test_rna_emission_posteriors_are_probabilities():
    rng = np.random.default_rng(11)
    head = _random_head(rng)
    h = rng.standard_normal((8, 3))
    post = rna_emission_posteriors(h, "ACGT", head)
    assert post.shape == (4,)
    assert ((post >= 0.0) & (post <= 1.0 + 1e-9)).all()


# ── FASTQ ─────────────────────────────────────────────────────────────────────

def test_phred_qualities():
    assert phred_string([0.0, 0.5, 0.9, 0.99, 1.0]) == "!$+5I"
    assert phred_string([]) == ""


def test_fastq_records(tmp_path):
    with pytest.raises(ValueError):
        FastqRecord("r", "ACG", "II")
    records = [FastqRecord("read_0", "ACGT", "IIII"), FastqRecord("read_1", "", "")]
    path = write_fastq(records, tmp_path / "calls.fastq")
    assert path.read_text().startswith("@read_0\nACGT\n+\nIIII\n")
    assert read_fastq(path) == records
