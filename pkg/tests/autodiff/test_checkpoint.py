import numpy as np
import pytest
import yaml
from pytest import mark as m

from npg_hpf.autodiff import GRUCell, Linear, Module
from npg_hpf.autodiff.checkpoint import (
    MANIFEST_FILE,
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)


class Network(Module):
    def __init__(self, rng):
        self.fc = Linear(3, 4, rng)
        self.rnn = GRUCell(4, 4, rng)


@m.describe("Checkpoints")
class TestCheckpoint:
    @m.context("When a module is saved and loaded")
    @m.it("Restores every parameter exactly")
    def test_save_load(self, tmp_path):
        source = Network(np.random.default_rng(0))
        save_checkpoint(tmp_path, source.state_dict(), metadata={"step": 7})

        parameters, metadata = load_checkpoint(tmp_path)
        target = Network(np.random.default_rng(1))
        target.load_state_dict(parameters)

        assert metadata == {"step": 7}
        assert list(parameters) == [n for n, _ in source.named_parameters()]
        for (name, a), (_, b) in zip(
            source.named_parameters(), target.named_parameters()
        ):
            np.testing.assert_array_equal(a.data, b.data, err_msg=name)

    @m.context("When a checkpoint is written")
    @m.it("Stores headerless little-endian float32 files and a manifest")
    def test_layout(self, tmp_path):
        weight = np.arange(6, dtype=np.float32).reshape(2, 3)
        save_checkpoint(tmp_path, {"fc.weight": weight})

        raw = (tmp_path / "fc.weight.f32").read_bytes()
        assert len(raw) == 6 * 4
        np.testing.assert_array_equal(
            np.frombuffer(raw, dtype="<f4"), weight.ravel()
        )

        with open(tmp_path / MANIFEST_FILE) as f:
            manifest = yaml.safe_load(f)
        assert manifest["dtype"] == "float32"
        assert manifest["byteorder"] == "little"
        assert manifest["parameters"] == [
            {"name": "fc.weight", "shape": [2, 3], "file": "fc.weight.f32"}
        ]

    @m.context("When the manifest is missing")
    @m.it("Raises a CheckpointError")
    def test_missing_manifest(self, tmp_path):
        with pytest.raises(CheckpointError, match="No manifest.yml"):
            load_checkpoint(tmp_path)

    @m.context("When a parameter file is truncated")
    @m.it("Raises a CheckpointError")
    def test_truncated(self, tmp_path):
        save_checkpoint(tmp_path, {"w": np.ones((2, 2))})
        (tmp_path / "w.f32").write_bytes(b"\x00" * 8)
        with pytest.raises(CheckpointError, match="has 2 values"):
            load_checkpoint(tmp_path)

    @m.context("When loaded names do not match the module")
    @m.it("Raises a ValueError naming the difference")
    def test_name_mismatch(self):
        network = Network(np.random.default_rng(0))
        state = network.state_dict()
        state.pop("fc.bias")
        with pytest.raises(ValueError, match=r"missing \['fc.bias'\]"):
            network.load_state_dict(state)
