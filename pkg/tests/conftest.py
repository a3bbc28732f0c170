import pytest

from emoloop.committee import pretrain
from emoloop.features import load_pool
from emoloop.gbt import TrainParams
from emoloop.synth import make_pool_dir, make_pretraining_records

FAST_PARAMS = TrainParams(rounds=4, learning_rate=0.3)


@pytest.fixture(scope="session")
def small_records():
    return make_pretraining_records(n=60, seed=1)


@pytest.fixture(scope="session")
def small_committee(small_records):
    return pretrain(small_records, params=FAST_PARAMS, k=3, seed=2, dataset_id="synth60")


@pytest.fixture(scope="session")
def small_pool_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("pool") / "small"
    make_pool_dir(out, n_per_type=10, seed=3)
    return out


@pytest.fixture(scope="session")
def small_pool(small_pool_dir):
    return load_pool(small_pool_dir)
