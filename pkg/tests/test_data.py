import numpy as np
import pytest

from convctc.ctc import Alphabet, ctc_loss, min_feasible_length
from convctc.data import (TaskSpec, Utterance, generate_synthetic,
                          load_dataset, load_manifest, make_batches,
                          synthetic_alphabet, write_manifest)
from convctc.features import fit_normalization
from convctc.network import ConvSpec, DenseSpec, Network, NetworkConfig
from convctc.optim import init_uniform
from convctc.tensor import load_tensor, save_tensor


@pytest.fixture
def alphabet():
    return Alphabet(["<blank>", "s1", "s2", "s3"])


@pytest.fixture
def tiny_corpus(tmp_path, alphabet):
    rng = np.random.default_rng(0)
    lines = []
    for i in range(5):
        uid = f"utt-{i}"
        save_tensor(tmp_path / f"{uid}.tnsr", rng.standard_normal((4, 10 + i)).astype(np.float32))
        labels = ["s1", "s2"] if i % 2 else ["s3"]
        lines.append(f"{uid}\t{uid}.tnsr\t{' '.join(labels)}")
    path = tmp_path / "train.tsv"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestManifest:
    def test_roundtrip(self, tmp_path, tiny_corpus, alphabet):
        manifest = load_manifest(tiny_corpus, alphabet)
        out = tmp_path / "copy.tsv"
        write_manifest(out, manifest)
        again = load_manifest(out, alphabet)
        assert [(e.uid, e.path, e.labels) for e in again.entries] == \
               [(e.uid, e.path, e.labels) for e in manifest.entries]

    def test_empty_manifest_is_valid(self, tmp_path, alphabet):
        path = tmp_path / "empty.tsv"
        path.write_text("")
        assert len(load_manifest(path, alphabet)) == 0

    def test_unknown_symbol_names_utterance_and_symbol(self, tmp_path, alphabet):
        save_tensor(tmp_path / "u.tnsr", np.ones((4, 5)))
        path = tmp_path / "bad.tsv"
        path.write_text("utt-x\tu.tnsr\ts1 zz\n")
        with pytest.raises(ValueError, match=r"utt-x.*'zz'"):
            load_manifest(path, alphabet)

    def test_missing_feature_file_names_path(self, tmp_path, alphabet):
        path = tmp_path / "bad.tsv"
        path.write_text("utt-x\tnowhere.tnsr\ts1\n")
        with pytest.raises(FileNotFoundError, match="nowhere.tnsr"):
            load_manifest(path, alphabet)

    def test_duplicate_id_rejected(self, tmp_path, alphabet):
        save_tensor(tmp_path / "u.tnsr", np.ones((4, 5)))
        path = tmp_path / "dup.tsv"
        path.write_text("utt-x\tu.tnsr\ts1\nutt-x\tu.tnsr\ts2\n")
        with pytest.raises(ValueError, match="duplicate"):
            load_manifest(path, alphabet)


def fake_items(rng, n, bands=4):
    items = []
    for i in range(n):
        f = int(rng.integers(5, 15))
        items.append(Utterance(f"u{i}", rng.standard_normal((3, bands, f)).astype(np.float32),
                               [1, 2]))
    return items


class TestBatches:
    def test_sizes_with_short_final_batch(self):
        rng = np.random.default_rng(1)
        batches = make_batches(fake_items(rng, 45), 20)
        assert [len(b.ids) for b in batches] == [20, 20, 5]

    def test_same_seed_same_composition(self):
        rng = np.random.default_rng(2)
        items = fake_items(rng, 13)
        a = make_batches(items, 4, np.random.default_rng(5), shuffle=True)
        b = make_batches(items, 4, np.random.default_rng(5), shuffle=True)
        assert [x.ids for x in a] == [x.ids for x in b]

    def test_epoch_covers_every_item_exactly_once(self):
        rng = np.random.default_rng(3)
        items = fake_items(rng, 23)
        batches = make_batches(items, 7, np.random.default_rng(0), shuffle=True)
        seen = [uid for b in batches for uid in b.ids]
        assert sorted(seen) == sorted(u.uid for u in items)

    def test_padding_is_zero_beyond_lengths(self):
        rng = np.random.default_rng(4)
        batches = make_batches(fake_items(rng, 6), 6)
        batch = batches[0]
        for i, length in enumerate(batch.lengths):
            assert length <= batch.features.shape[3]
            assert not batch.features[i, :, :, length:].any()
            np.testing.assert_array_equal(batch.item(i).shape[2], length)

    def test_bad_batch_size(self):
        with pytest.raises(ValueError):
            make_batches([], 0)

    def test_padded_and_unpadded_losses_agree(self):
        # zero padding plus zero-padded convolution: frames before the true
        # length are unaffected, so CTC over the sliced range matches exactly
        rng = np.random.default_rng(5)
        net = Network(NetworkConfig(3, 4, 4, [ConvSpec(3, 3, 5), DenseSpec(6)]))
        params = init_uniform(net.param_specs(), rng, dtype=np.float64)
        items = [Utterance("a", rng.standard_normal((3, 4, 9)), [1]),
                 Utterance("b", rng.standard_normal((3, 4, 14)), [2, 3])]
        batch = make_batches(items, 2)[0]
        assert batch.features.shape[3] == 14
        for i, utt in enumerate(items):
            padded = batch.features[i]
            lp_padded, _ = net.forward(padded, params)
            lp_sliced, _ = net.forward(utt.features, params)
            f = batch.lengths[i]
            np.testing.assert_allclose(lp_padded[:, :f], lp_sliced, atol=1e-9)
            loss_p, _ = ctc_loss(lp_padded[:, :f], utt.target)
            loss_s, _ = ctc_loss(lp_sliced, utt.target)
            assert loss_p == pytest.approx(loss_s, abs=1e-9)


class TestSyntheticTask:
    def test_same_seed_byte_identical_files(self, tmp_path):
        spec = TaskSpec(symbols=3, bands=8, min_frames=15, max_frames=30,
                        counts={"train": 6, "dev": 2, "test": 2}, seed=11)
        a = generate_synthetic(spec, tmp_path / "a")
        b = generate_synthetic(spec, tmp_path / "b")
        for split in ("train", "dev", "test"):
            assert open(a[split]).read() == open(b[split]).read()
        fa = sorted((tmp_path / "a" / "features").iterdir())
        fb = sorted((tmp_path / "b" / "features").iterdir())
        assert [p.name for p in fa] == [p.name for p in fb]
        for pa, pb in zip(fa, fb):
            assert pa.read_bytes() == pb.read_bytes()

    def test_every_utterance_is_ctc_feasible(self, tmp_path):
        for seed in (0, 1, 2):
            spec = TaskSpec(symbols=4, bands=6, min_frames=12, max_frames=40,
                            counts={"train": 25, "dev": 0, "test": 0}, seed=seed)
            paths = generate_synthetic(spec, tmp_path / f"s{seed}")
            alphabet = Alphabet.from_file(paths["alphabet"])
            manifest = load_manifest(paths["train"], alphabet)
            for e in manifest.entries:
                frames = load_tensor(e.resolved).shape[1]
                assert frames >= min_feasible_length(e.label_ids)
                assert spec.min_frames <= frames <= spec.max_frames

    def test_noiseless_task_is_template_decodable(self, tmp_path):
        # nearest-template matching per frame recovers every target exactly,
        # so a label error rate of 0 is achievable by construction
        spec = TaskSpec(symbols=1, bands=10, min_frames=20, max_frames=50,
                        noise_std=0.0, counts={"train": 30, "dev": 0, "test": 0}, seed=3)
        paths = generate_synthetic(spec, tmp_path / "clean")
        alphabet = Alphabet.from_file(paths["alphabet"])
        manifest = load_manifest(paths["train"], alphabet)
        templates = np.random.default_rng(spec.seed).normal(0.0, 1.0, (spec.symbols, spec.bands))
        for e in manifest.entries:
            static = load_tensor(e.resolved)
            decoded = []
            for t in range(static.shape[1]):
                col = static[:, t]
                if not col.any():
                    decoded.append(0)
                else:
                    decoded.append(1 + int(np.argmin(
                        ((templates - col[None]) ** 2).sum(axis=1))))
            merged = [s for i, s in enumerate(decoded)
                      if s != 0 and (i == 0 or decoded[i - 1] != s)]
            assert merged == e.label_ids

    def test_degenerate_spec_rejected(self):
        with pytest.raises(ValueError):
            TaskSpec(symbols=0).validate()
        with pytest.raises(ValueError):
            TaskSpec(symbols=2, min_frames=5).validate()
        with pytest.raises(ValueError):
            TaskSpec(symbols=2, noise_std=-1.0).validate()

    def test_task_json_roundtrip(self, tmp_path):
        spec = TaskSpec(symbols=5, seed=9)
        assert TaskSpec.from_json(spec.to_json()) == spec

    def test_load_dataset_assembles_channels(self, tmp_path):
        spec = TaskSpec(symbols=2, bands=7, min_frames=12, max_frames=20,
                        counts={"train": 4, "dev": 0, "test": 0}, seed=5)
        paths = generate_synthetic(spec, tmp_path)
        manifest = load_manifest(paths["train"], synthetic_alphabet(spec))
        stats = fit_normalization(load_tensor(e.resolved) for e in manifest.entries)
        items = load_dataset(manifest, stats)
        assert all(u.features.shape[:2] == (3, 7) for u in items)
        assert all(u.features.dtype == np.float32 for u in items)
