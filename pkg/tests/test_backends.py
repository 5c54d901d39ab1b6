import numpy as np
import pytest
from conftest import ANISO, ISO

from segtrack3d import _backend
from segtrack3d.detection import SeedSet
from segtrack3d.slic import SlicConfig, slic
from segtrack3d.volume import Volume
from segtrack3d.watershed import WatershedConfig, watershed

needs_compiled = pytest.mark.skipif(
    "compiled" not in _backend.available_backends(),
    reason="compiled extension not built",
)


def random_prob(rng, shape):
    return np.clip(rng.random(shape) * 0.6 + 0.3, 0.0, 1.0)


def flood_with(backend, levels, fg, seeds, n_levels, offsets):
    labels = np.zeros(levels.shape, dtype=np.int32)
    backend.watershed_flood(
        levels, fg.astype(np.uint8), seeds, n_levels, offsets.astype(np.int64), labels
    )
    return labels


@needs_compiled
class TestKernelParity:
    def test_watershed_flood_bitwise(self, rng):
        from segtrack3d.volume import Connectivity

        compiled = _backend.get_backend("compiled")
        pure = _backend.get_backend("pure")
        offsets = Connectivity.FACE_6.offsets()
        for _ in range(10):
            shape = tuple(int(rng.integers(4, 9)) for _ in range(3))
            levels = rng.integers(0, 16, size=shape).astype(np.int32)
            fg = rng.random(shape) < 0.7
            flat_fg = np.flatnonzero(fg.ravel())
            if flat_fg.size == 0:
                continue
            n_seeds = int(rng.integers(1, min(4, flat_fg.size) + 1))
            seeds = rng.choice(flat_fg, size=n_seeds, replace=False).astype(np.int64)
            a = flood_with(compiled, levels, fg, seeds, 16, offsets)
            b = flood_with(pure, levels, fg, seeds, 16, offsets)
            assert np.array_equal(a, b)

    def test_full_watershed_identical(self, rng):
        prob = Volume(random_prob(rng, (8, 10, 12)), ANISO)
        seeds = SeedSet(np.array([[2, 3, 2], [9, 7, 6]]), np.array([1.0, 1.0]))
        import segtrack3d.watershed as ws_mod

        compiled = _backend.get_backend("compiled")
        pure = _backend.get_backend("pure")
        results = {}
        original = ws_mod._backend
        for name, impl in (("compiled", compiled), ("pure", pure)):
            ws_mod._backend = impl
            try:
                results[name] = watershed(prob, seeds, WatershedConfig()).data
            finally:
                ws_mod._backend = original
        assert np.array_equal(results["compiled"], results["pure"])

    def test_full_slic_identical(self, rng):
        vol = Volume(rng.random((7, 9, 11)), ANISO)
        import segtrack3d.slic as slic_mod

        compiled = _backend.get_backend("compiled")
        pure = _backend.get_backend("pure")
        results = {}
        original = slic_mod._backend
        for name, impl in (("compiled", compiled), ("pure", pure)):
            slic_mod._backend = impl
            try:
                results[name] = slic(vol, SlicConfig(k=12)).data
            finally:
                slic_mod._backend = original
        assert np.array_equal(results["compiled"], results["pure"])


class TestSelection:
    def test_pure_always_available(self):
        assert "pure" in _backend.available_backends()
        assert _backend.get_backend("pure").BACKEND_NAME == "pure"

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            _backend.get_backend("gpu")

    def test_active_backend_is_listed(self):
        assert _backend.BACKEND_NAME in _backend.available_backends()

    def test_env_override_selects_pure(self, tmp_path):
        import subprocess
        import sys

        code = "from segtrack3d import _backend; print(_backend.BACKEND_NAME)"
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={"PATH": "/usr/bin:/bin", "SEGTRACK3D_PURE": "1"},
            cwd=str(tmp_path),
        )
        assert out.stdout.strip() == "pure"
