#!/usr/bin/env python3
"""A complete run at toy scale: generate a synthetic task, train a small
maxout conv net with CTC, then decode and score it.  Takes ~30 seconds."""

import json
import os
import tempfile

from convctc.checkpoint import load_checkpoint
from convctc.ctc import Alphabet
from convctc.data import TaskSpec, generate_synthetic, load_dataset, load_manifest
from convctc.evaluate import evaluate
from convctc.network import ConvSpec, DenseSpec, DropoutSpec, Network, NetworkConfig, PoolSpec
from convctc.train import train

workdir = tempfile.mkdtemp(prefix="convctc-demo-")
print(f"working under {workdir}")

print("\n== 1. generate a small synthetic task ==")
task = TaskSpec(symbols=3, bands=20, min_frames=20, max_frames=45, noise_std=0.05,
                counts={"train": 80, "dev": 16, "test": 16}, seed=5)
paths = generate_synthetic(task, workdir)
alphabet = Alphabet.from_file(paths["alphabet"])
print(f"alphabet: {alphabet.symbols}")
print(f"manifests: {sorted(os.path.basename(paths[s]) for s in ('train', 'dev', 'test'))}")

print("\n== 2. train a reduced maxout conv stack ==")
config = NetworkConfig(channels=3, bands=20, alphabet_size=alphabet.size, layers=[
    ConvSpec(12, 3, 5), PoolSpec(3, 3), DropoutSpec(0.1),
    ConvSpec(12, 3, 5), DropoutSpec(0.1),
    DenseSpec(32), DropoutSpec(0.1),
])
train_manifest = load_manifest(paths["train"], alphabet, "train")
dev_manifest = load_manifest(paths["dev"], alphabet, "dev")
# a hotter learning rate than the paper recipe: at this toy scale the
# run only gets ~8 updates per epoch
result = train(config, alphabet, train_manifest, dev_manifest,
               os.path.join(workdir, "run"), seed=0, epochs=60, batch_size=10,
               lr=1e-3, target_ler=0.05, patience=60, quiet=True)
print(f"stopped after {result.epochs_run} epochs, best dev LER {result.best_dev_ler:.3f}")
last_lines = open(result.log_path).read().splitlines()
print("last metrics line:", json.dumps(json.loads(last_lines[-1])))

print("\n== 3. score the held-out test split ==")
ck = load_checkpoint(result.best_path)
net = Network(ck.config)
test_manifest = load_manifest(paths["test"], alphabet, "test")
test_set = load_dataset(test_manifest, ck.stats)
report = evaluate(net, ck.params, test_set, ck.alphabet)
print(f"test LER {report.label_error_rate:.3f} "
      f"(S {report.counts.substitutions} / I {report.counts.insertions} / "
      f"D {report.counts.deletions})")

print("\n== 4. decode a few utterances ==")
for utt in test_set[:4]:
    hyp = " ".join(report.decodes[utt.uid])
    ref = " ".join(alphabet.decode(utt.target))
    marker = "ok " if hyp == ref else "DIFF"
    print(f"  [{marker}] {utt.uid}: hyp '{hyp}'  ref '{ref}'")
