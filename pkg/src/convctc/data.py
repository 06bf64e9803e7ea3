"""Dataset manifests, batching, and the synthetic sequence task.

A manifest is UTF-8 text, one utterance per line:

    <id>\\t<feature-file path>\\t<space-separated label symbols>

Feature paths are resolved relative to the manifest's directory.  Feature
files are rank-2 tensors [bands x frames] in the binary tensor container.

The synthetic task stands in for a licensed speech corpus at desk scale:
each symbol is a fixed random band-pattern template held for 3-10 frames,
separated by short silences (mandatory between repeated symbols, so every
utterance is decodable even without noise), plus optional Gaussian noise.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .ctc import min_feasible_length
from .features import assemble_input
from .tensor import load_tensor, save_tensor


@dataclass
class ManifestEntry:
    uid: str
    path: str            # as written in the manifest
    resolved: str        # absolute-ish path used for loading
    labels: list         # symbol strings
    label_ids: list      # alphabet indices


@dataclass
class Manifest:
    entries: list
    split: str = "train"

    def __len__(self):
        return len(self.entries)


def load_manifest(path, alphabet, split="train"):
    """Parse and fully validate a manifest: unique ids, known symbols,
    existing feature files."""
    import os

    base = os.path.dirname(os.path.abspath(path))
    entries = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            uid, feat_path, label_text = parts
            if uid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate utterance id {uid!r}")
            seen.add(uid)
            labels = label_text.split()
            try:
                ids = alphabet.encode(labels)
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: utterance {uid!r}: {e}") from e
            resolved = feat_path if os.path.isabs(feat_path) else os.path.join(base, feat_path)
            if not os.path.exists(resolved):
                raise FileNotFoundError(f"{path}:{lineno}: utterance {uid!r}: "
                                        f"feature file not found: {resolved}")
            entries.append(ManifestEntry(uid, feat_path, resolved, labels, ids))
    return Manifest(entries, split)


def write_manifest(path, manifest):
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest.entries:
            fh.write(f"{e.uid}\t{e.path}\t{' '.join(e.labels)}\n")


def iter_static(manifest):
    """Yield each utterance's static feature matrix in manifest order."""
    for e in manifest.entries:
        yield load_tensor(e.resolved)


@dataclass
class Utterance:
    uid: str
    features: np.ndarray     # assembled [3 x bands x frames]
    target: list             # label ids


def load_dataset(manifest, stats, dtype=np.float32):
    """Load and assemble every utterance up front; datasets here are small."""
    return [Utterance(e.uid, assemble_input(load_tensor(e.resolved), stats, dtype=dtype), e.label_ids)
            for e in manifest.entries]


@dataclass
class Batch:
    features: np.ndarray     # [B x 3 x bands x f_max], zero-padded past each length
    lengths: list
    targets: list
    ids: list

    def item(self, i):
        """One utterance's features sliced to its true frame count."""
        return self.features[i, :, :, :self.lengths[i]]


def make_batches(items, batch_size, rng=None, shuffle=False, sort_by_length=False):
    """Group utterances into padded batches; the final short batch is kept.

    Shuffling permutes the item order with the supplied generator, so batch
    composition is reproducible from the seed.  sort_by_length instead
    orders items by frame count (ties by position) to cut padding waste.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if shuffle and sort_by_length:
        raise ValueError("shuffle and sort_by_length are mutually exclusive")
    order = list(range(len(items)))
    if shuffle:
        order = list(rng.permutation(len(items)))
    elif sort_by_length:
        order.sort(key=lambda i: (items[i].features.shape[2], i))
    batches = []
    for start in range(0, len(order), batch_size):
        chunk = [items[i] for i in order[start:start + batch_size]]
        lengths = [u.features.shape[2] for u in chunk]
        f_max = max(lengths)
        shape = (len(chunk),) + chunk[0].features.shape[:2] + (f_max,)
        feats = np.zeros(shape, dtype=chunk[0].features.dtype)
        for i, u in enumerate(chunk):
            feats[i, :, :, :lengths[i]] = u.features
        batches.append(Batch(feats, lengths, [u.target for u in chunk], [u.uid for u in chunk]))
    return batches


# ---------------------------------------------------------------------------
# synthetic task
# ---------------------------------------------------------------------------

@dataclass
class TaskSpec:
    symbols: int
    bands: int = 41
    min_frames: int = 30
    max_frames: int = 80
    noise_std: float = 0.1
    counts: dict = field(default_factory=lambda: {"train": 500, "dev": 50, "test": 50})
    seed: int = 0

    def validate(self):
        if self.symbols < 1:
            raise ValueError("task needs at least 1 symbol")
        if self.bands < 1:
            raise ValueError("task needs at least 1 band")
        if self.min_frames < 12:
            raise ValueError("min_frames must be >= 12 (room for one symbol plus silences)")
        if self.max_frames < self.min_frames:
            raise ValueError("max_frames must be >= min_frames")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    def to_json(self):
        return {"symbols": self.symbols, "bands": self.bands,
                "min_frames": self.min_frames, "max_frames": self.max_frames,
                "noise_std": self.noise_std, "counts": dict(self.counts),
                "seed": self.seed}

    @classmethod
    def from_json(cls, doc):
        spec = cls(symbols=int(doc["symbols"]),
                   bands=int(doc.get("bands", 41)),
                   min_frames=int(doc.get("min_frames", 30)),
                   max_frames=int(doc.get("max_frames", 80)),
                   noise_std=float(doc.get("noise_std", 0.1)),
                   counts={k: int(v) for k, v in doc.get("counts", {"train": 500, "dev": 50, "test": 50}).items()},
                   seed=int(doc.get("seed", 0)))
        spec.validate()
        return spec

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _render_utterance(spec, templates, rng):
    """One utterance: (static [bands x frames], label id sequence)."""
    target_len = int(rng.integers(spec.min_frames, spec.max_frames + 1))
    blocks = []                       # (symbol id or 0 for silence, duration)
    labels = []
    total = int(rng.integers(0, 3))   # leading silence
    if total:
        blocks.append((0, total))
    prev = None
    while True:
        sym = int(rng.integers(1, spec.symbols + 1))
        dur = int(rng.integers(3, 11))
        # silence separates symbols; mandatory between repeats, else optional
        gap = int(rng.integers(2, 5)) if sym == prev else int(rng.integers(0, 3))
        need = dur + (gap if prev is not None else 0)
        if labels and total + need > target_len:
            break
        if prev is not None and gap:
            blocks.append((0, gap))
        blocks.append((sym, dur))
        labels.append(sym)
        total += need if prev is not None else dur
        prev = sym
    static = np.zeros((spec.bands, target_len))
    t = 0
    for sym, dur in blocks:
        if sym:
            static[:, t:t + dur] = templates[sym - 1][:, None]
        t += dur
    if spec.noise_std > 0:
        static += rng.normal(0.0, spec.noise_std, static.shape)
    assert target_len >= min_feasible_length(labels)
    return static.astype(np.float32), labels


def synthetic_alphabet(spec):
    from .ctc import Alphabet
    return Alphabet(["<blank>"] + [f"s{i}" for i in range(1, spec.symbols + 1)])


def generate_synthetic(spec, out_dir):
    """Write feature files, per-split manifests, and the alphabet under
    out_dir; fully determined by spec.seed.  Returns the written paths."""
    import os

    spec.validate()
    rng = np.random.default_rng(spec.seed)
    alphabet = synthetic_alphabet(spec)
    templates = rng.normal(0.0, 1.0, (spec.symbols, spec.bands))

    feat_dir = os.path.join(out_dir, "features")
    os.makedirs(feat_dir, exist_ok=True)
    paths = {"alphabet": os.path.join(out_dir, "alphabet.txt")}
    alphabet.to_file(paths["alphabet"])
    with open(os.path.join(out_dir, "task.json"), "w", encoding="utf-8") as fh:
        json.dump(spec.to_json(), fh, indent=2)
        fh.write("\n")

    for split in ("train", "dev", "test"):
        lines = []
        for i in range(spec.counts.get(split, 0)):
            uid = f"{split}-{i:04d}"
            static, labels = _render_utterance(spec, templates, rng)
            rel = os.path.join("features", f"{uid}.tnsr")
            save_tensor(os.path.join(out_dir, rel), static)
            lines.append(f"{uid}\t{rel}\t{' '.join(alphabet.symbols[s] for s in labels)}")
        manifest_path = os.path.join(out_dir, f"{split}.tsv")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))
        paths[split] = manifest_path
    return paths
