import json
import logging

import numpy as np
import pandas as pd
import pytest

from src.data.ingestion import load_split
from src.decoders.ctc import ctc_beam_decode, ctc_greedy_decode
from src.decoders.fastq import FastqRecord, write_fastq
from src.dynpool.trace import write_tsv
from src.models.evaluation import Alignment, align, edit_distance, evaluate, speed_fit, write_report
from src.models.experiments import evaluate_calls, run_ablation
from src.models.plots import export_plots


def _levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


# ── alignment ─────────────────────────────────────────────────────────────────

def test_one_substitution_in_a_hundred():
    ref = "ACGT" * 25
    call = "T" + ref[1:]
    aln = align(call, ref)
    assert aln == Alignment(matches=99, mismatches=1, insertions=0, deletions=0)
    assert aln.accuracy == pytest.approx(0.99)


def test_indels_are_counted_by_side():
    assert align("ACGTT", "ACGT") == Alignment(4, 0, 1, 0)
    assert align("ACT", "ACGT") == Alignment(3, 0, 0, 1)
    assert align("", "ACG").accuracy == 0.0
    assert align("", "").accuracy == 0.0


def test_edit_distance_matches_a_reference_implementation():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = "".join(rng.choice(list("ACGT"), rng.integers(0, 30)))
        b = "".join(rng.choice(list("ACGT"), rng.integers(0, 30)))
        expected = _levenshtein(a, b)
        assert edit_distance(a, b) == expected
        assert align(a, b).distance == expected


# ── speed fit ─────────────────────────────────────────────────────────────────

def test_exact_linear_relation():
    speeds = np.linspace(5.0, 15.0, 20)
    fit = speed_fit(0.1 + 0.02 * speeds, speeds)
    assert fit["r2"] == pytest.approx(1.0)
    assert fit["slope"] == pytest.approx(0.02)
    assert fit["intercept"] == pytest.approx(0.1)
    assert fit["flag"] is None


def test_degenerate_fits_are_flagged():
    constant = speed_fit(np.full(5, 0.3), np.arange(5.0))
    assert constant["r2"] == 0.0 and constant["flag"] == "constant_input"
    single = speed_fit([0.3], [10.0])
    assert single["r2"] is None and single["flag"] == "too_few_reads"


# ── reports ───────────────────────────────────────────────────────────────────

def test_empty_calls_score_zero_and_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="src.models.evaluation"):
        report = evaluate({"a": "ACGT", "b": ""}, {"a": "ACGT", "b": "ACGT"})
    assert report.flagged == ["b"]
    assert report.per_read.set_index("read_id").loc["b", "accuracy"] == 0.0
    assert report.median_accuracy == pytest.approx(0.5)
    assert "empty call for b" in caplog.text


def test_report_is_independent_of_read_order():
    calls = {"r1": "ACGTT", "r2": "GGCA", "r3": "TTT"}
    refs = {"r1": "ACGT", "r2": "GGCC", "r3": "TATT", "r4": "A"}
    speeds = {"r1": 9.0, "r2": 11.0, "r3": 10.0}
    factors = {"r1": 0.30, "r2": 0.36, "r3": 0.33}
    forward = evaluate(calls, refs, speeds, factors)
    backward = evaluate(dict(reversed(list(calls.items()))), refs, speeds, factors)
    assert forward.to_dict() == backward.to_dict()
    pd.testing.assert_frame_equal(forward.per_read, backward.per_read)
    assert forward.speed_fit["n"] == 3


def _hesitant_emissions(rng, n_bases):
    """Two frames per base, each leaning to blank; the base is still the likeliest reduction per pair."""
    codes = [int(rng.integers(4))]
    while len(codes) < n_bases:
        codes.append(int((codes[-1] + rng.integers(1, 4)) % 4))
    probs = np.full((2 * n_bases, 5), 1e-3)
    for i, c in enumerate(codes):
        probs[2 * i:2 * i + 2, c] = 0.4
    probs[:, 4] = 1.0 - probs[:, :4].sum(axis=1)
    logits = np.log(probs) + 0.02 * rng.standard_normal(probs.shape)
    return "".join("ACGT"[c] for c in codes), logits


def test_wide_beam_beats_greedy_on_hesitant_emissions():
    rng = np.random.default_rng(11)
    refs, greedy, beam = {}, {}, {}
    for i in range(20):
        ref, logits = _hesitant_emissions(rng, 8)
        refs[f"r{i}"] = ref
        greedy[f"r{i}"] = ctc_greedy_decode(logits)
        beam[f"r{i}"] = ctc_beam_decode(logits, beam_width=50)
    greedy_report = evaluate(greedy, refs)
    beam_report = evaluate(beam, refs)
    assert greedy_report.median_accuracy == 0.0
    assert beam_report.median_accuracy >= 0.9
    assert beam_report.median_accuracy > greedy_report.median_accuracy


def test_calls_without_references_are_rejected():
    with pytest.raises(ValueError):
        evaluate({"stray": "ACGT"}, {"a": "ACGT"})


def test_written_report(tmp_path):
    report = evaluate({"a": "ACGT"}, {"a": "ACGA"})
    paths = write_report(report, tmp_path / "eval")
    summary = json.loads(paths["report"].read_text())
    assert summary["n_reads"] == 1
    assert summary["median_accuracy"] == pytest.approx(0.75)
    table = pd.read_csv(paths["per_read"], sep="\t")
    assert table.loc[0, "mismatches"] == 1


# ── file workflows ────────────────────────────────────────────────────────────

def _perfect_calls(records, path):
    return write_fastq([FastqRecord(r.read_id, r.sequence, "I" * len(r.sequence)) for r in records], path)


def test_evaluating_perfect_calls_with_traces(small_dataset_dir, tmp_path):
    records = load_split("train", small_dataset_dir)
    calls = _perfect_calls(records, tmp_path / "calls.fastq")
    traces = write_tsv(
        pd.DataFrame({
            "read_id": [r.read_id for r in records],
            "T": [r.n_signals for r in records],
            "output_length": [len(r.sequence) for r in records],
            "mean_length_factor": [0.01 * r.speed for r in records],
        }),
        tmp_path / "pooling_summary.tsv",
    )
    report = evaluate_calls(calls, small_dataset_dir, "train", traces, tmp_path / "eval")
    assert report.median_accuracy == 1.0
    assert report.speed_fit["r2"] == pytest.approx(1.0, abs=1e-4)
    assert (tmp_path / "eval" / "eval_report.json").exists()

    written = export_plots(tmp_path / "eval", tmp_path / "plots", render=True)
    for key in ("accuracy_tsv", "scatter_tsv", "accuracy_png", "scatter_png"):
        assert key in written
    scatter = pd.read_csv(written["scatter_tsv"], sep="\t")
    assert len(scatter) == len(records)


def test_missing_calls_file(small_dataset_dir, tmp_path):
    with pytest.raises(FileNotFoundError):
        evaluate_calls(tmp_path / "absent.fastq", small_dataset_dir)


def test_plots_without_rendering_include_traces(smoke_run, dataset_dir, tmp_path):
    from src.models.basecaller import basecall

    called = basecall(smoke_run["checkpoint"], dataset_dir, tmp_path / "calls")
    evaluate_calls(called["outputs"]["calls"], dataset_dir, "test",
                   called["outputs"]["pooling_summary"], tmp_path / "eval")
    written = export_plots(tmp_path / "eval", tmp_path / "plots", tmp_path / "calls", render=False)
    assert "traces_tsv" in written
    assert not any(key.endswith("_png") for key in written)
    assert not list((tmp_path / "plots").glob("*.png"))


def test_ablation_rejects_unknown_families(tmp_path):
    with pytest.raises(ValueError):
        run_ablation("condor", tmp_path, tmp_path / "out")
