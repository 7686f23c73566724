import numpy as np
import pytest

from exrank.alternating import (
    build_vocabulary,
    finetune_lm,
    run_schedule,
    warmup_scorer,
)
from exrank.config import Config
from exrank.contrastive import train_retriever
from exrank.corpus import generate_synthetic, serialize_label
from exrank.retriever import init_retriever, load_retriever
from exrank.scorer import init_scorer, load_scorer, score
from exrank.template import definition_for, render, task_input


def _cfg(seed=0, **over):
    base = dict(
        k=2, m=8, r=0.5, batch_size=2, lr=0.003, weight_decay=0.0,
        epochs_retriever=1, epochs_lm=1, t=1, d=16, d_r=16,
        max_gen_len=16, seed=seed, warmup_epochs=1,
    )
    base.update(over)
    return Config(**base)


def _mean_dev_score(scorer, dev, cfg):
    definition = definition_for(dev.task)
    totals = []
    for s in dev.samples:
        prompt = render(definition, [], task_input(s, dev.task), 0)
        totals.append(score(scorer, prompt, serialize_label(s, dev.task)).total)
    return float(np.mean(totals))


class TestVocabulary:
    def test_covers_corpus_and_scaffolding(self):
        train, _ = generate_synthetic(40, 5, 0)
        vocab = build_vocabulary(train, _cfg())
        from exrank.vocab import UNK_ID

        for s in train.samples:
            assert UNK_ID not in vocab.encode(s.text)
            assert UNK_ID not in vocab.encode(serialize_label(s, train.task))
        prompt = render(definition_for(train.task), [], "x", 0)
        ids = vocab.encode(prompt)
        assert ids.count(UNK_ID) <= 1  # only the unseen input token

    def test_deterministic(self):
        train, _ = generate_synthetic(40, 5, 0)
        a = build_vocabulary(train, _cfg())
        b = build_vocabulary(train, _cfg())
        assert a.tokens == b.tokens


class TestWarmup:
    def test_improves_zero_example_likelihood(self):
        train, test, = generate_synthetic(60, 12, 0)
        cfg = _cfg(warmup_epochs=2)
        vocab = build_vocabulary(train, cfg)
        scorer = init_scorer(vocab, d=cfg.d, max_len=cfg.max_len, seed=0)
        before = _mean_dev_score(scorer, test, cfg)
        warmup_scorer(scorer, train, cfg)
        after = _mean_dev_score(scorer, test, cfg)
        assert after > before


class TestFinetuneLM:
    def test_zero_epochs_unchanged(self):
        train, _ = generate_synthetic(40, 5, 0)
        cfg = _cfg(epochs_lm=0)
        vocab = build_vocabulary(train, cfg)
        scorer = init_scorer(vocab, d=cfg.d, max_len=cfg.max_len, seed=0)
        retr = init_retriever(vocab, d_r=cfg.d_r, max_len=cfg.max_len, seed=0)
        before = {k: v.copy() for k, v in scorer.params.items()}
        finetune_lm(scorer, retr, train, cfg)
        for k in before:
            assert np.array_equal(before[k], scorer.params[k])

    def test_improves_mean_dev_score_over_seeds(self):
        wins = 0
        for seed in range(5):
            train, test = generate_synthetic(60, 12, seed)
            cfg = _cfg(seed=seed, epochs_lm=2)
            vocab = build_vocabulary(train, cfg)
            scorer = init_scorer(vocab, d=cfg.d, max_len=cfg.max_len, seed=seed)
            retr = init_retriever(vocab, d_r=cfg.d_r, max_len=cfg.max_len, seed=seed)
            before = _mean_dev_score(scorer, test, cfg)
            finetune_lm(scorer, retr, train, cfg)
            after = _mean_dev_score(scorer, test, cfg)
            if after > before:
                wins += 1
        assert wins >= 5

    def test_finetune_k_many_examples(self):
        train, _ = generate_synthetic(40, 5, 0)
        cfg = _cfg(finetune_k=3)
        vocab = build_vocabulary(train, cfg)
        scorer = init_scorer(vocab, d=cfg.d, max_len=cfg.max_len, seed=0)
        retr = init_retriever(vocab, d_r=cfg.d_r, max_len=cfg.max_len, seed=0)
        before = {k: v.copy() for k, v in scorer.params.items()}
        finetune_lm(scorer, retr, train, cfg)
        assert any(
            not np.array_equal(before[k], scorer.params[k]) for k in before
        )


class TestSchedule:
    def test_t3_lineage_of_four(self, tmp_path):
        train, test = generate_synthetic(40, 8, 0)
        cfg = _cfg(t=3, r=0.3, m=6)
        state = run_schedule(train, test, cfg, tmp_path)
        assert state.step == 3
        assert len(state.scorer_ckpts) == 4
        assert len(state.retriever_ckpts) == 4
        for s in range(4):
            assert (tmp_path / f"scorer_{s}.ckpt.npz").exists()
            assert (tmp_path / f"retriever_{s}.ckpt.npz").exists()
        assert (tmp_path / "scorer_init.ckpt.npz").exists()
        assert len(state.metrics_log) == 4  # step 0 plus one row per step

    def test_same_seed_identical_metrics(self, tmp_path):
        train, test = generate_synthetic(40, 8, 1)
        cfg = _cfg(seed=1, t=2, r=0.3, m=6)
        a = run_schedule(train, test, cfg, tmp_path / "a")
        b = run_schedule(train, test, cfg, tmp_path / "b")
        assert a.metrics_log == b.metrics_log

    def test_resume_replays_bit_identically(self, tmp_path):
        train, test = generate_synthetic(40, 8, 2)
        cfg = _cfg(seed=2, t=2, r=0.3, m=6)
        run_schedule(train, test, cfg, tmp_path / "full")
        # redo the run, then roll back to step 1 and resume
        run_schedule(train, test, cfg, tmp_path / "resumed")
        state = run_schedule(
            train, test, cfg, tmp_path / "resumed", resume_step=1
        )
        assert state.step == 2
        for name in ("scorer_2.ckpt.npz", "retriever_2.ckpt.npz"):
            a = np.load(tmp_path / "full" / name)
            b = np.load(tmp_path / "resumed" / name)
            for key in a.files:
                assert np.array_equal(a[key], b[key]), (name, key)
        full_rows = (tmp_path / "full" / "metrics.tsv").read_text()
        res_rows = (tmp_path / "resumed" / "metrics.tsv").read_text()
        assert full_rows == res_rows

    def test_t1_equals_non_alternating_pipeline(self, tmp_path):
        train, test = generate_synthetic(40, 8, 3)
        cfg = _cfg(seed=3, t=1, r=0.3, m=6)
        run_schedule(train, test, cfg, tmp_path)

        vocab = build_vocabulary(train, cfg)
        scorer = init_scorer(vocab, d=cfg.d, max_len=cfg.max_len, seed=cfg.seed)
        warmup_scorer(scorer, train, cfg)
        retr = init_retriever(vocab, d_r=cfg.d_r, max_len=cfg.max_len, seed=cfg.seed)
        train_retriever(retr, train, scorer, cfg, bootstrap_first_epoch=True,
                        seed_tag="step1/retriever-train")
        finetune_lm(scorer, retr, train, cfg, seed_tag="step1/finetune-lm")

        sched_scorer = load_scorer(tmp_path / "scorer_1.ckpt.npz")
        sched_retr = load_retriever(tmp_path / "retriever_1.ckpt.npz")
        for k, v in scorer.params.items():
            assert np.array_equal(v, sched_scorer.params[k])
        for k, v in retr.params.items():
            assert np.array_equal(v, sched_retr.params[k])

    def test_t_validation(self, tmp_path):
        train, test = generate_synthetic(40, 8, 0)
        with pytest.raises(ValueError):
            run_schedule(train, test, _cfg(t=0), tmp_path)

    def test_resume_step_validation(self, tmp_path):
        train, test = generate_synthetic(40, 8, 0)
        cfg = _cfg(t=1, r=0.3, m=6)
        run_schedule(train, test, cfg, tmp_path)
        with pytest.raises(ValueError):
            run_schedule(train, test, cfg, tmp_path, resume_step=5)
