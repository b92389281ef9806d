import numpy as np
import pytest

from artifact import persist, rng
from artifact.errors import ConfigError


class TestStreams:
    def test_same_seed_same_purpose_bitwise(self):
        a = rng.stream(123, "jumps").standard_normal(100)
        b = rng.stream(123, "jumps").standard_normal(100)
        assert np.array_equal(a, b)

    def test_purpose_separates_streams(self):
        a = rng.stream(123, "jumps").standard_normal(100)
        b = rng.stream(123, "driver").standard_normal(100)
        assert not np.array_equal(a, b)

    def test_spawn_children_distinct(self):
        kids = rng.spawn(9, "ensemble", 4)
        draws = [k.standard_normal(8) for k in kids]
        for i in range(4):
            for j in range(i + 1, 4):
                assert not np.array_equal(draws[i], draws[j])


class TestPersist:
    def test_round_trip_real(self, tmp_path):
        arr = np.linspace(0, 1, 37).reshape(37)
        persist.save_array(tmp_path / "a", arr, {"role": "test"})
        back, meta = persist.load_array(tmp_path / "a")
        assert np.array_equal(back, arr)
        assert meta["role"] == "test"

    def test_round_trip_complex(self, tmp_path):
        arr = np.exp(1j * np.linspace(0, 6, 64)).reshape(8, 8)
        persist.save_array(tmp_path / "c", arr, {})
        back, _ = persist.load_array(tmp_path / "c")
        assert np.array_equal(back, arr)

    def test_corruption_detected(self, tmp_path):
        persist.save_array(tmp_path / "x", np.ones(4), {})
        raw = (tmp_path / "x.bin").read_bytes()
        (tmp_path / "x.bin").write_bytes(raw[:-1] + bytes([raw[-1] ^ 1]))
        with pytest.raises(ConfigError):
            persist.load_array(tmp_path / "x")

    def test_byte_identical_across_saves(self, tmp_path):
        arr = np.sin(np.arange(100.0))
        persist.save_array(tmp_path / "one", arr, {})
        persist.save_array(tmp_path / "two", arr, {})
        assert (tmp_path / "one.bin").read_bytes() == (tmp_path / "two.bin").read_bytes()
