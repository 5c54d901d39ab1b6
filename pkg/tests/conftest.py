import numpy as np
import pytest

from segtrack3d.volume import LabelVolume, Volume

ISO = (1.0, 1.0, 1.0)
ANISO = (0.09, 0.09, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_labels(data, spacing=ISO):
    return LabelVolume(np.asarray(data, dtype=np.int32), spacing)


def make_volume(data, spacing=ISO):
    return Volume(np.asarray(data, dtype=np.float64), spacing)
