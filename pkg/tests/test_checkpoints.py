import numpy as np
import pytest

from simploss import checkpoints, netcore
from simploss.geometry import Simplex, SimplicialComplex, VertexStore


class TestModeCheckpoint:
    def test_lossless_round_trip(self, tmp_path):
        spec = netcore.ModelSpec((2, 5, 2))
        rng = np.random.default_rng(0)
        params = rng.normal(size=netcore.param_count(spec))
        path = tmp_path / "mode.json"
        history = [{"epoch": 0, "loss": 0.123456789123456789, "lr": 0.05}]
        checkpoints.save_mode(path, spec, params, 7, {"lr": 0.05}, history)
        loaded = checkpoints.load_mode(path)
        np.testing.assert_array_equal(loaded.params, params)
        assert loaded.spec == spec
        assert loaded.seed == 7
        assert loaded.history == history

    def test_missing_file(self, tmp_path):
        with pytest.raises(checkpoints.CheckpointError):
            checkpoints.load_mode(tmp_path / "none.json")

    def test_kind_mismatch(self, tmp_path):
        spec = netcore.ModelSpec((2, 2))
        store = VertexStore()
        store.add("w0", np.zeros(netcore.param_count(spec)), role="mode")
        cx = SimplicialComplex(store, [Simplex(("w0",))])
        path = tmp_path / "cx.json"
        checkpoints.save_complex(path, spec, cx, {}, {}, {})
        with pytest.raises(checkpoints.CheckpointError):
            checkpoints.load_mode(path)

    def test_param_count_checked(self, tmp_path):
        spec = netcore.ModelSpec((2, 5, 2))
        path = tmp_path / "bad.json"
        checkpoints.save_mode(path, spec, np.zeros(3), 0, {}, [])
        with pytest.raises(checkpoints.CheckpointError):
            checkpoints.load_mode(path)


class TestComplexCheckpoint:
    def _complex(self, spec, rng):
        d = netcore.param_count(spec)
        store = VertexStore()
        store.add("w0", rng.normal(size=d), role="mode")
        store.add("t0", rng.normal(size=d), role="connector", trainable=True)
        store.add("t1", rng.normal(size=d), role="connector", trainable=True)
        return SimplicialComplex(store, [Simplex(("w0", "t0", "t1"))])

    def test_lossless_round_trip(self, tmp_path):
        spec = netcore.ModelSpec((2, 4, 2))
        rng = np.random.default_rng(1)
        cx = self._complex(spec, rng)
        path = tmp_path / "complex.json"
        history = {"t0": [{"epoch": 0, "data_loss": 0.5, "log_volume": -1.25,
                           "lambda": 1e-8}]}
        checkpoints.save_complex(path, spec, cx, {"spro_train": 3},
                                 {"k": 2}, history)
        loaded = checkpoints.load_complex(path)
        assert loaded.spec == spec
        assert [s.vertex_ids for s in loaded.complex.simplexes] == [
            ("w0", "t0", "t1")
        ]
        for vid in ("w0", "t0", "t1"):
            np.testing.assert_array_equal(
                loaded.complex.store.values(vid), cx.store.values(vid)
            )
            assert loaded.complex.store.vertex(vid).role == cx.store.vertex(vid).role
        assert loaded.history == history
        assert loaded.seeds == {"spro_train": 3}

    def test_dimension_mismatch_rejected(self, tmp_path):
        spec = netcore.ModelSpec((2, 4, 2))
        rng = np.random.default_rng(2)
        cx = self._complex(spec, rng)
        path = tmp_path / "complex.json"
        checkpoints.save_complex(path, netcore.ModelSpec((2, 5, 2)), cx, {}, {}, {})
        with pytest.raises(checkpoints.CheckpointError):
            checkpoints.load_complex(path)

    def test_unknown_schema_version(self, tmp_path):
        path = tmp_path / "weird.json"
        path.write_text('{"schema_version": 99, "kind": "complex"}')
        with pytest.raises(checkpoints.CheckpointError):
            checkpoints.load_complex(path)
