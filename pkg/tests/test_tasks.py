"""Training pipelines: pretraining, fine-tuning, prediction contracts."""
import io

import numpy as np
import pytest

from breakscore.corruption import CorruptionConfig, build_pretrain_dataset
from breakscore.exceptions import DataError
from breakscore.nn import BiLstmConfig, EncoderConfig
from breakscore.ranks import Rank
from breakscore.rngs import make_rng
from breakscore.tasks import (
    RatedSample,
    TrainConfig,
    _pad_batch,
    finetune_finegrained,
    finetune_overall,
    predict_finegrained,
    predict_overall,
    pretrain_rbtd,
    rated_from_json,
    rated_to_json,
    read_rated,
)
from breakscore.vocab import BR_BASE_ID, CLS_ID, Vocabulary


def small_cfg(vocab_size):
    return EncoderConfig(
        vocab_size=vocab_size, d_model=16, n_heads=2, n_layers=1, ffn_dim=32,
        max_len=32, dropout_prob=0.0,
    )


def toy_vocab(n_words=4):
    return Vocabulary(word_to_id={f"w{i}": 8 + i for i in range(n_words)})


def encoded(word_ids, breaks):
    """[CLS] w b w b w ... as (ids, break_mask)."""
    ids = [CLS_ID, word_ids[0]]
    mask = [False, False]
    for b, w in zip(breaks, word_ids[1:]):
        ids += [BR_BASE_ID + b, w]
        mask += [True, False]
    return tuple(ids), tuple(mask)


class TestRatedSample:
    def test_fine_length_invariant(self):
        ids, mask = encoded([8, 9], [0])
        RatedSample(id="a", ids=ids, break_mask=mask, fine=(Rank.GREAT,))
        with pytest.raises(DataError):
            RatedSample(id="a", ids=ids, break_mask=mask, fine=(Rank.GREAT, Rank.POOR))

    def test_json_round_trip(self):
        ids, mask = encoded([8, 9, 10], [1, 3])
        s = RatedSample(
            id="a", ids=ids, break_mask=mask, overall=Rank.FAIR,
            fine=(Rank.GREAT, Rank.POOR),
        )
        assert rated_from_json(rated_to_json(s)) == s

    def test_optional_labels_survive(self):
        ids, mask = encoded([8, 9], [0])
        s = RatedSample(id="a", ids=ids, break_mask=mask)
        got = rated_from_json(rated_to_json(s))
        assert got.overall is None and got.fine is None

    def test_read_rated_reports_line(self):
        with pytest.raises(Exception, match="line 2"):
            read_rated(io.StringIO('{"id":"a","ids":[2,8],"break_mask":[false,false]}\n{"x":1}\n'))


class TestPadBatch:
    def test_padding_and_masks(self):
        a = encoded([8, 9], [0])
        b = encoded([8, 9, 10], [1, 2])
        ids, pad_mask, break_mask = _pad_batch([a, b], max_len=32)
        assert ids.shape == (2, 6)
        assert pad_mask[0].tolist() == [True] * 4 + [False] * 2
        assert ids[0, 4:].tolist() == [0, 0]
        assert break_mask[1].tolist() == [False, False, True, False, True, False]

    def test_max_len_truncates(self):
        a = encoded([8] * 10, [0] * 9)
        ids, pad_mask, _ = _pad_batch([a], max_len=7)
        assert ids.shape == (1, 7) and pad_mask.all()


def separable_corpus(n=64):
    """Class fully determined by the break token at the single break site."""
    out = []
    for i in range(n):
        cls = i % 2
        ids, mask = encoded([8, 9], [3 if cls else 0])
        out.append((f"s{i}", ids, mask, cls))
    return out


class TestPretrainRbtd:
    def _dataset(self):
        rng = make_rng(0, "data")
        corpus = []
        for i in range(40):
            word_ids = [8 + int(rng.integers(4)) for _ in range(5)]
            ids, mask = encoded(word_ids, [0, 0, 2, 3])
            corpus.append((f"u{i}", list(ids), list(mask)))
        return build_pretrain_dataset(corpus, CorruptionConfig(seed=0))

    def test_report_and_checkpoint_shape(self):
        data = self._dataset()
        tcfg = TrainConfig(batch_size=16, epochs=1, lr=1e-3, seed=0)
        ckpt, report = pretrain_rbtd(data, tcfg, small_cfg(12), toy_vocab())
        assert ckpt.kind == "rbtd" and ckpt.n_classes == 2
        assert "head_w" in ckpt.params
        assert 0.0 <= report["accuracy"] <= 1.0
        assert len(report["epoch_losses"]) == 1

    def test_deterministic(self):
        data = self._dataset()
        tcfg = TrainConfig(batch_size=16, epochs=1, seed=7)
        a, _ = pretrain_rbtd(data, tcfg, small_cfg(12), toy_vocab())
        b, _ = pretrain_rbtd(data, tcfg, small_cfg(12), toy_vocab())
        for k in a.params:
            np.testing.assert_array_equal(a.params[k], b.params[k])

    def test_single_label_rejected(self):
        data = [s for s in self._dataset() if s.label == 0]
        with pytest.raises(DataError):
            pretrain_rbtd(data, TrainConfig(), small_cfg(12), toy_vocab())


class TestFinetuneOverall:
    def test_overfits_separable_data(self):
        dataset = [
            RatedSample(id=i, ids=ids, break_mask=mask, overall=Rank.GREAT if c else Rank.POOR)
            for i, ids, mask, c in separable_corpus(64)
        ]
        tcfg = TrainConfig(batch_size=16, epochs=30, lr=3e-3, seed=0)
        ckpt = finetune_overall(dataset, None, tcfg, model="encoder",
                                model_cfg=small_cfg(12), vocab=toy_vocab())
        preds = [predict_overall(ckpt, s.ids, s.break_mask)[0] for s in dataset]
        acc = np.mean([p == s.overall for p, s in zip(preds, dataset)])
        assert acc == 1.0
        assert ckpt.extra["epoch_losses"][-1] < ckpt.extra["epoch_losses"][0]

    def test_generalizes_to_held_out_separable_data(self):
        items = separable_corpus(80)
        dataset = [
            RatedSample(id=i, ids=ids, break_mask=mask, overall=Rank.GREAT if c else Rank.POOR)
            for i, ids, mask, c in items
        ]
        tcfg = TrainConfig(batch_size=16, epochs=30, lr=3e-3, seed=1)
        ckpt = finetune_overall(dataset[:64], None, tcfg, model="encoder",
                                model_cfg=small_cfg(12), vocab=toy_vocab())
        held = dataset[64:]
        acc = np.mean([predict_overall(ckpt, s.ids, s.break_mask)[0] == s.overall for s in held])
        assert acc == 1.0

    def test_bilstm_model_trains(self):
        dataset = [
            RatedSample(id=i, ids=ids, break_mask=mask, overall=Rank.GREAT if c else Rank.POOR)
            for i, ids, mask, c in separable_corpus(32)
        ]
        tcfg = TrainConfig(batch_size=8, epochs=60, lr=1e-2, seed=0)
        cfg = BiLstmConfig(vocab_size=12, embed_dim=8, hidden_size=8)
        ckpt = finetune_overall(dataset, None, tcfg, model="bilstm",
                                model_cfg=cfg, vocab=toy_vocab())
        acc = np.mean(
            [predict_overall(ckpt, s.ids, s.break_mask)[0] == s.overall for s in dataset]
        )
        assert acc == 1.0

    def test_missing_labels_rejected(self):
        ids, mask = encoded([8, 9], [0])
        with pytest.raises(DataError):
            finetune_overall(
                [RatedSample(id="a", ids=ids, break_mask=mask)], None, TrainConfig(),
                model_cfg=small_cfg(12), vocab=toy_vocab(),
            )

    def test_init_mismatch_rejected(self):
        data = [
            RatedSample(id=i, ids=ids, break_mask=mask, overall=Rank.GREAT if c else Rank.POOR)
            for i, ids, mask, c in separable_corpus(8)
        ]
        corpus = [(s.id, list(s.ids), list(s.break_mask)) for s in data]
        pre = build_pretrain_dataset(corpus, CorruptionConfig(seed=0))
        ckpt, _ = pretrain_rbtd(pre, TrainConfig(batch_size=8, epochs=1), small_cfg(12), toy_vocab())
        other_cfg = small_cfg(13)
        with pytest.raises(DataError, match="config"):
            finetune_overall(data, ckpt, TrainConfig(), model_cfg=other_cfg, vocab=toy_vocab())


class TestFinetuneFinegrained:
    def _dataset(self, n=48):
        # Per-position label equals the break class band: br0/br1 -> Great,
        # br2 -> Fair, br3 -> Poor. Fully learnable from the token itself.
        band = {0: Rank.GREAT, 1: Rank.GREAT, 2: Rank.FAIR, 3: Rank.POOR}
        rng = make_rng(1, "fine-data")
        out = []
        for i in range(n):
            breaks = [int(rng.integers(4)) for _ in range(3)]
            word_ids = [8 + int(rng.integers(4)) for _ in range(4)]
            ids, mask = encoded(word_ids, breaks)
            out.append(
                RatedSample(
                    id=f"f{i}", ids=ids, break_mask=mask,
                    fine=tuple(band[b] for b in breaks),
                )
            )
        return out

    def test_learns_positionwise_rule(self):
        dataset = self._dataset()
        tcfg = TrainConfig(batch_size=16, epochs=30, lr=3e-3, seed=0)
        ckpt = finetune_finegrained(dataset, None, tcfg, model="encoder",
                                    model_cfg=small_cfg(12), vocab=toy_vocab())
        hits = total = 0
        for s in dataset:
            preds = predict_finegrained(ckpt, s.ids, s.break_mask)
            assert len(preds) == len(s.fine)
            hits += sum(p == t for p, t in zip(preds, s.fine))
            total += len(s.fine)
        assert hits / total == 1.0

    def test_loss_only_at_break_positions(self):
        # Moving a word id at a non-break position must not change fine logits
        # ordering constraints; check the API refuses misaligned labels instead.
        ids, mask = encoded([8, 9], [0])
        with pytest.raises(DataError):
            finetune_finegrained(
                [RatedSample(id="a", ids=ids, break_mask=mask)], None, TrainConfig(),
                model_cfg=small_cfg(12), vocab=toy_vocab(),
            )

    def test_prediction_kind_checked(self):
        dataset = self._dataset(8)
        tcfg = TrainConfig(batch_size=8, epochs=1, seed=0)
        ckpt = finetune_finegrained(dataset, None, tcfg, model="encoder",
                                    model_cfg=small_cfg(12), vocab=toy_vocab())
        with pytest.raises(DataError):
            predict_overall(ckpt, dataset[0].ids, dataset[0].break_mask)

    def test_out_of_vocab_sample_rejected_at_predict(self):
        dataset = self._dataset(8)
        tcfg = TrainConfig(batch_size=8, epochs=1, seed=0)
        ckpt = finetune_finegrained(dataset, None, tcfg, model="encoder",
                                    model_cfg=small_cfg(12), vocab=toy_vocab())
        bad_ids = tuple(list(dataset[0].ids[:-1]) + [99])
        with pytest.raises(DataError, match="vocabulary"):
            predict_finegrained(ckpt, bad_ids, dataset[0].break_mask)
