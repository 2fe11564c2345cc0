import json
import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from src.autodiff.checkpoint import load_checkpoint, save_checkpoint
from src.autodiff.tape import Tape, backward
from src.autodiff.tensor import Parameter, Tensor
from src.config import (
    CONFIG_DIR, ScheduleSpec, TrainConfig, env_default, list_presets, load_preset, resolve_model_config,
    resolve_train_config,
)
from src.data.chunks import Batch
from src.data.ingestion import load_split
from src.decoders.fastq import read_fastq
from src.errors import CheckpointError, ConfigError, NonFiniteError, TrainingDivergedError
from src.models import trainer
from src.models.basecaller import basecall, basecall_records, call_one, load_model
from src.models.network import BasecallerNet
from src.models.optimizer import AdamW
from src.models.schedule import cycle_ends, cycle_of, lr_at

from conftest import SMOKE_BATCHES


# ── optimizer ─────────────────────────────────────────────────────────────────

def test_adamw_minimizes_a_quadratic():
    x = Parameter("x", [1.0])
    opt = AdamW([x], weight_decay=0.0)
    for _ in range(500):
        opt.zero_grad()
        with Tape() as tape:
            d = x.use() - 1.5
            loss = (d * d).sum()
        backward(loss, tape)
        opt.step(1e-2)
    assert abs(float(x.value.data[0]) - 1.5) < 1e-3


def test_weight_decay_skips_biases_and_vectors():
    w = Parameter("conv.weight", np.ones((2, 2)))
    b = Parameter("conv.bias", np.ones(2))
    opt = AdamW([w, b], weight_decay=0.5)
    assert opt.no_decay == {"conv.bias"}
    opt.step(0.1)
    assert np.allclose(w.value.data, 0.95)
    assert_array_equal(b.value.data, 1.0)


def test_non_finite_gradients_stop_the_step():
    w = Parameter("w", np.ones((2, 2)))
    opt = AdamW([w])
    w.grad[0, 0] = np.nan
    with pytest.raises(NonFiniteError, match="gradient of w"):
        opt.step(1e-3)
    assert_array_equal(w.value.data, 1.0)
    assert opt.state.step == 0


# ── schedule ──────────────────────────────────────────────────────────────────

SPEC = ScheduleSpec(max_lr=1e-3, warmup_batches=100, first_cycle_batches=400, cycle_growth=2, cycles=4)


def test_warmup_and_cosine_cycles():
    assert lr_at(0, SPEC) == 0.0
    assert lr_at(50, SPEC) == pytest.approx(5e-4)
    assert lr_at(100, SPEC) == pytest.approx(1e-3)
    assert lr_at(300, SPEC) == pytest.approx(5e-4)
    assert 0.0 < lr_at(499, SPEC) < 1e-7
    for restart in (500, 1300, 2900):
        assert lr_at(restart, SPEC) == 1e-3
        assert lr_at(restart - 1, SPEC) < lr_at(restart, SPEC)


def test_cycle_bookkeeping():
    assert SPEC.cycle_lengths() == [400, 800, 1600, 3200]
    assert SPEC.total_batches == 6100
    assert cycle_ends(SPEC) == [499, 1299, 2899, 6099]
    assert cycle_of(1300, SPEC) == (2, 0, 1600)
    assert lr_at(10_000, SPEC) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        lr_at(-1, SPEC)


def test_training_recipes():
    assert TrainConfig().budget == 6100
    smoke = resolve_train_config("smoke", {"max_batches": 6})
    assert smoke.budget == 6
    assert (smoke.batch_size, smoke.chunk_signals) == (8, 1000)
    assert resolve_train_config("smoke", {"seed": None}).seed == 0
    with pytest.raises(ConfigError):
        resolve_train_config("marathon")


def test_environment_defaults(monkeypatch):
    monkeypatch.setenv("DYNPOOL_THREADS", "3")
    assert env_default("THREADS", "1") == "3"
    monkeypatch.delenv("DYNPOOL_THREADS")
    assert env_default("THREADS", "1") == "1"


# ── presets and network ───────────────────────────────────────────────────────

def test_shipped_presets():
    assert set(list_presets()) >= {"heron-mini", "heron-mini-dynpool", "osprey-mini", "osprey-mini-dynpool", "smoke"}
    for name in list_presets():
        assert load_preset(name).scaled_stand_in
    with pytest.raises(ConfigError):
        load_preset("albatross")


def test_invalid_config_files_raise_config_errors(tmp_path):
    preset = json.loads((CONFIG_DIR / "smoke.json").read_text())
    preset["stem"][0]["kernel"] = 4
    path = tmp_path / "even.json"
    path.write_text(json.dumps(preset))
    with pytest.raises(ConfigError) as info:
        resolve_model_config(str(path))
    assert info.value.field == "stem.0.kernel"
    assert "odd" in str(info.value)

    recipe = tmp_path / "recipe.json"
    recipe.write_text(json.dumps({"batch_size": 0}))
    with pytest.raises(ConfigError) as info:
        resolve_train_config(str(recipe))
    assert info.value.field == "batch_size"


@pytest.mark.parametrize("name,width", [("heron-mini", 16), ("osprey-mini-dynpool", 5)])
def test_network_output_shapes(name, width):
    model = BasecallerNet(load_preset(name), seed=0)
    signal = Tensor(np.random.default_rng(1).standard_normal((2, 240, 1)))
    out = model(signal, read_ids=["a", "b"])
    assert out.features.shape[0] == 2 and out.features.shape[2] == width
    assert out.features.shape[1] == int(out.lengths.max())
    if model.config.uses_dynpool:
        assert [t.read_id for t in out.traces] == ["a", "b"]
    else:
        assert out.traces is None
        assert_array_equal(out.lengths, [80, 80])


def test_fixed_and_dynamic_variants_differ_only_in_the_pooling_layer():
    fixed = BasecallerNet(load_preset("heron-mini"), seed=3).state_dict()
    dynamic = BasecallerNet(load_preset("heron-mini-dynpool"), seed=3).state_dict()
    assert all(name.startswith("pool.") for name in set(fixed) ^ set(dynamic))
    shared = [n for n in set(fixed) & set(dynamic) if not n.startswith("pool.")]
    assert any(n.startswith("block1.") for n in shared)
    for name in shared:
        assert_array_equal(fixed[name], dynamic[name])


def _random_batch(targets):
    signal = np.random.default_rng(2).standard_normal((len(targets), 60, 1)).astype(np.float32)
    return Batch(signal, targets, [f"r{i}" for i in range(len(targets))])


def test_unalignable_chunks_are_skipped(caplog):
    model = BasecallerNet(load_preset("smoke"), seed=0)
    opt = AdamW(model.parameters())
    before = {name: np.array(p.value.data) for name, p in model.named_parameters()}

    assert trainer.train_step(model, opt, _random_batch([np.zeros(100, dtype=np.int64)] * 2), 1e-3) is None
    for name, p in model.named_parameters():
        assert_array_equal(p.value.data, before[name])

    result = trainer.train_step(model, opt, _random_batch([np.zeros(100, dtype=np.int64), np.array([1, 2])]), 1e-3)
    assert result.skipped_reads == 1
    assert math.isfinite(result.loss)
    assert "unalignable" in caplog.text


# ── training run ──────────────────────────────────────────────────────────────

def _log(run):
    lines = (run["out_dir"] / trainer.LOG_NAME).read_text().splitlines()
    return [json.loads(line) for line in lines]


def test_smoke_run_log_and_checkpoint(smoke_run):
    records = _log(smoke_run)
    assert records[0]["event"] == "start"
    assert records[0]["budget"] == SMOKE_BATCHES
    steps = [r for r in records if "loss" in r]
    assert [r["step"] for r in steps] == list(range(SMOKE_BATCHES))
    for r in steps:
        assert math.isfinite(r["loss"])
        assert r["batch_mean_length_factor"] == pytest.approx(1.0 / 3.0, abs=1e-5)
        assert r["lr"] == lr_at(r["step"], resolve_train_config("smoke").schedule)
    assert records[-1]["event"] == "cycle_end"
    assert smoke_run["checkpoint"].endswith(trainer.FINAL_CHECKPOINT)
    assert math.isfinite(smoke_run["initial_valid_loss"])

    _, meta = load_checkpoint(smoke_run["checkpoint"])
    assert meta["step"] == SMOKE_BATCHES - 1
    assert meta["model"]["name"] == "smoke"


def test_training_lowers_the_heldout_loss(dataset_dir, tmp_path):
    recipe = resolve_train_config("smoke", {"max_batches": 40})
    result = trainer.train(load_preset("smoke"), dataset_dir, tmp_path, recipe)
    assert math.isfinite(result["final_valid_loss"])
    assert result["final_valid_loss"] < result["initial_valid_loss"]
    assert _log({"out_dir": tmp_path})[-1]["valid_loss"] == result["final_valid_loss"]


def test_divergence_is_reported_with_the_step(monkeypatch, dataset_dir, tmp_path):
    def explode(*args, **kwargs):
        raise NonFiniteError("loss")

    monkeypatch.setattr(trainer, "train_step", explode)
    recipe = resolve_train_config("smoke", {"max_batches": 3})
    with pytest.raises(TrainingDivergedError) as info:
        trainer.train(load_preset("smoke"), dataset_dir, tmp_path, recipe)
    assert info.value.step == 0
    assert info.value.last_checkpoint is None
    assert _log({"out_dir": tmp_path})[-1]["event"] == "diverged"


# ── base calling ──────────────────────────────────────────────────────────────

def test_basecall_outputs(smoke_run, dataset_dir, tmp_path):
    result = basecall(smoke_run["checkpoint"], dataset_dir, tmp_path / "calls")
    assert result["reads"] == 2
    out = tmp_path / "calls"
    for name in ("calls.fastq", "pooling_summary.tsv", "pooling_positions.tsv", "throughput.json"):
        assert (out / name).exists()
    calls = read_fastq(out / "calls.fastq")
    assert [c.read_id for c in calls] == [r.read_id for r in load_split("test", dataset_dir)]
    throughput = json.loads((out / "throughput.json").read_text())
    assert throughput["signals"] == sum(r.n_signals for r in load_split("test", dataset_dir))


def test_calls_do_not_depend_on_thread_count(smoke_run, dataset_dir):
    model = load_model(smoke_run["checkpoint"])
    records = load_split("train", dataset_dir, limit=4)
    one = basecall_records(model, records, threads=1)
    four = basecall_records(model, records, threads=4)
    assert [r.record for r in one] == [r.record for r in four]
    beam = basecall_records(model, records[:1], decoder="beam")
    assert len(beam[0].record.sequence) == len(beam[0].record.quality)


def test_empty_signal_gives_an_empty_call(smoke_run):
    model = load_model(smoke_run["checkpoint"])
    result = call_one(model, np.zeros(0, dtype=np.float32), "empty")
    assert result.record.sequence == "" and result.record.quality == ""
    assert result.trace is None


def test_checkpoint_must_fit_the_model(smoke_run, tmp_path):
    with pytest.raises(CheckpointError) as info:
        load_model(smoke_run["checkpoint"], load_preset("osprey-mini"))
    assert info.value.missing or info.value.unexpected

    tensors, _ = load_checkpoint(smoke_run["checkpoint"])
    bare = save_checkpoint(tmp_path / "bare.dpk", tensors)
    with pytest.raises(CheckpointError):
        load_model(bare)
    assert load_model(bare, load_preset("smoke")).config.name == "smoke"
