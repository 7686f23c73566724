import pytest

from exrank.alternating import build_vocabulary
from exrank.config import Config
from exrank.corpus import generate_synthetic
from exrank.retriever import init_retriever
from exrank.scorer import init_scorer


@pytest.fixture(scope="session")
def small_cfg():
    return Config(
        k=2, m=8, r=0.5, batch_size=2, lr=0.003, weight_decay=0.0,
        epochs_retriever=1, epochs_lm=1, t=1, d=16, d_r=16,
        max_len=128, max_gen_len=16, seed=0, warmup_epochs=1,
    )


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic(60, 12, 0)


@pytest.fixture(scope="session")
def small_vocab(small_corpus, small_cfg):
    train, _ = small_corpus
    return build_vocabulary(train, small_cfg)


@pytest.fixture()
def small_scorer(small_vocab, small_cfg):
    return init_scorer(small_vocab, d=small_cfg.d, max_len=small_cfg.max_len, seed=0)


@pytest.fixture()
def small_retriever(small_vocab, small_cfg):
    return init_retriever(
        small_vocab, d_r=small_cfg.d_r, max_len=small_cfg.max_len, seed=0
    )
