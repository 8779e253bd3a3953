"""Model assembly, shape bookkeeping, and checkpoint serialization checks."""

import numpy as np
import pytest

from artistid.crnn import (
    CHECKPOINT_MAGIC,
    CrnnConfig,
    build_model,
    load_checkpoint,
    save_checkpoint,
)
from artistid.nn import softmax, softmax_cross_entropy

# small architecture for fast tests: 16 mel bins collapse through (4,2),(4,2)
SMALL = CrnnConfig(n_mels=16, n_classes=3, conv_channels=(4, 8),
                   pools=((4, 2), (4, 2)), gru_units=(8, 8))


def small_inputs(batch=4, frames=8, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((batch, 1, 16, frames)).astype(np.float32)


class TestCrnnConfig:
    def test_default_frequency_chain(self):
        cfg = CrnnConfig()
        assert cfg.n_mels == 128
        assert cfg.pools == ((4, 2), (4, 2), (4, 2), (2, 2))

    def test_time_steps_chain(self):
        cfg = CrnnConfig()
        assert cfg.time_steps(93) == 5    # 93 -> 46 -> 23 -> 11 -> 5
        assert cfg.time_steps(31) == 1    # 31 -> 15 -> 7 -> 3 -> 1
        assert cfg.min_clip_frames == 16

    def test_frequency_pools_must_reduce_to_one(self):
        with pytest.raises(ValueError):
            CrnnConfig(n_mels=64)  # default pools multiply to 128

    def test_non_divisible_pools_rejected(self):
        with pytest.raises(ValueError):
            CrnnConfig(n_mels=18, conv_channels=(4, 4), pools=((4, 2), (4, 2)))

    def test_n_classes_minimum(self):
        with pytest.raises(ValueError):
            CrnnConfig(n_classes=1)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            CrnnConfig(kernel_size=4)

    def test_dropout_range(self):
        with pytest.raises(ValueError):
            CrnnConfig(final_dropout=1.0)


class TestBuildModel:
    def test_clip_too_short_states_minimum(self):
        with pytest.raises(ValueError, match="16"):
            build_model(CrnnConfig(), seed=0, clip_frames=15)

    def test_minimum_clip_accepted(self):
        build_model(CrnnConfig(n_classes=4), seed=0, clip_frames=16)

    def test_same_seed_same_weights(self):
        a = build_model(SMALL, seed=3)
        b = build_model(SMALL, seed=3)
        for (name_a, pa), (name_b, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert name_a == name_b
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_parameter_names_unique(self):
        model = build_model(SMALL, seed=0)
        names = [n for n, _ in model.named_parameters()] + [n for n, _ in model.named_buffers()]
        assert len(names) == len(set(names))


class TestForward:
    def test_output_shapes(self):
        model = build_model(SMALL, seed=1)
        logits, bottleneck = model.forward(small_inputs(), train=False)
        assert logits.shape == (4, 3)
        assert bottleneck.shape == (4, 8)

    def test_softmax_rows_normalized(self):
        model = build_model(SMALL, seed=2)
        logits, _ = model.forward(small_inputs(), train=False)
        np.testing.assert_allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-6)

    def test_untrained_loss_near_uniform(self):
        cfg = CrnnConfig(n_classes=20, conv_channels=(8, 8, 8, 8))
        model = build_model(cfg, seed=3)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((8, 1, 128, 16)).astype(np.float32)
        logits, _ = model.forward(x, train=False)
        loss, _ = softmax_cross_entropy(logits, rng.integers(0, 20, size=8))
        assert loss == pytest.approx(2.996, abs=0.3)

    def test_identical_rows_identical_logits(self):
        model = build_model(SMALL, seed=5)
        x = small_inputs(batch=1)
        doubled = np.concatenate([x, x])
        logits, _ = model.forward(doubled, train=False)
        np.testing.assert_array_equal(logits[0], logits[1])

    def test_shape_mismatch_reports_expectation(self):
        model = build_model(SMALL, seed=6)
        with pytest.raises(ValueError, match="16"):
            model.forward(np.zeros((2, 1, 32, 8), dtype=np.float32))

    def test_too_few_frames_rejected(self):
        model = build_model(SMALL, seed=6)
        with pytest.raises(ValueError):
            model.forward(np.zeros((2, 1, 16, 2), dtype=np.float32))

    def test_bottleneck_width_tracks_config(self):
        cfg = CrnnConfig(n_mels=16, n_classes=3, conv_channels=(4, 4),
                         pools=((4, 2), (4, 2)), gru_units=(8, 5))
        model = build_model(cfg, seed=7)
        _, bottleneck = model.forward(small_inputs(), train=False)
        assert bottleneck.shape[1] == 5

    def test_frequency_axis_collapses_for_any_valid_config(self):
        for cfg in (SMALL, CrnnConfig(n_classes=4, conv_channels=(4, 4, 4, 4))):
            model = build_model(cfg, seed=8)
            frames = cfg.min_clip_frames
            x = np.random.default_rng(9).standard_normal(
                (2, 1, cfg.n_mels, frames)).astype(np.float32)
            logits, _ = model.forward(x, train=False)
            assert logits.shape == (2, cfg.n_classes)


class TestBackward:
    def test_all_parameters_receive_gradient(self):
        model = build_model(SMALL, seed=10)
        x = small_inputs(seed=11)
        logits, _ = model.forward(x, train=True)
        _, dlogits = softmax_cross_entropy(logits, np.array([0, 1, 2, 0]))
        model.backward(dlogits)
        for name, p in model.named_parameters():
            assert np.isfinite(p.grad).all(), name
            if name.endswith((".weight", ".gamma")):
                assert np.abs(p.grad).sum() > 0.0, name

    def test_training_steps_reduce_loss(self):
        from artistid.nn import Adam

        cfg = CrnnConfig(n_mels=16, n_classes=3, conv_channels=(4, 8),
                         pools=((4, 2), (4, 2)), gru_units=(8, 8),
                         conv_dropout=0.0, final_dropout=0.0)
        model = build_model(cfg, seed=12)
        x = small_inputs(batch=6, seed=13)
        labels = np.array([0, 1, 2, 0, 1, 2])
        optimizer = Adam(model.parameters(), lr=1e-3)
        first = None
        for _ in range(150):
            logits, _ = model.forward(x, train=True)
            loss, dlogits = softmax_cross_entropy(logits, labels)
            if first is None:
                first = loss
            model.backward(dlogits)
            optimizer.step()
        logits, _ = model.forward(x, train=False)
        final, _ = softmax_cross_entropy(logits, labels)
        assert final < first * 0.5


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        model = build_model(SMALL, seed=14)
        x = small_inputs(seed=15)
        model.forward(x, train=True)  # move running stats off their defaults
        ref, _ = model.forward(x, train=False)
        path = tmp_path / "m.ckpt"
        model.metadata = {"epoch": "7", "best_val_loss": "0.25", "seed": "14"}
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        got, _ = loaded.forward(x, train=False)
        np.testing.assert_array_equal(got, ref)
        assert loaded.metadata["epoch"] == "7"
        assert loaded.config == SMALL

    def test_file_magic(self, tmp_path):
        model = build_model(SMALL, seed=16)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        assert path.read_bytes()[:4] == CHECKPOINT_MAGIC

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.ckpt"
        path.write_bytes(b"JUNK" + bytes(64))
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(path)

    def test_truncated_file(self, tmp_path):
        model = build_model(SMALL, seed=17)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        raw = path.read_bytes()
        for cut in (len(raw) // 3, len(raw) - 5):
            path.write_bytes(raw[:cut])
            with pytest.raises(ValueError):
                load_checkpoint(path)

    def test_config_mismatch(self, tmp_path):
        model = build_model(SMALL, seed=18)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        other = CrnnConfig(n_mels=16, n_classes=4, conv_channels=(4, 8),
                           pools=((4, 2), (4, 2)), gru_units=(8, 8))
        with pytest.raises(ValueError, match="mismatch"):
            load_checkpoint(path, expected_config=other)
        load_checkpoint(path, expected_config=SMALL)

    def test_missing_tensor_rejected(self, tmp_path):
        model = build_model(SMALL, seed=19)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        raw = path.read_bytes()
        # drop the final record (bias of the output layer is last before buffers)
        name = b"out.bias"
        idx = raw.rfind(name)
        path.write_bytes(raw[: idx - 2])
        with pytest.raises(ValueError, match="missing"):
            load_checkpoint(path)
