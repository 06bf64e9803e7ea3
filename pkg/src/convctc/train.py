"""The two-stage training recipe with early stopping and checkpointing.

Main stage: Adam at 1e-4.  Fine-tune stage: SGD at 1e-5 with L2 1e-5 on
weights.  Every epoch runs shuffled batches of summed-CTC-loss updates,
evaluates the dev label error rate, appends one JSON metrics line, and
saves a resumable checkpoint; the best-on-dev checkpoint is kept
separately.  When the dev metric plateaus for `patience` evaluations the
run either switches to the fine-tune stage (from the best parameters so
far, if auto_finetune is set) or stops.

Everything is driven by one seeded generator whose state is stored in
every checkpoint, so identical seeds give byte-identical logs and
checkpoints, and a resumed run continues the exact trajectory of an
uninterrupted one.
"""

import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .ctc import ctc_grad, ctc_loss
from .data import iter_static, load_dataset, make_batches
from .evaluate import evaluate
from .features import fit_normalization
from .network import DropoutSpec, Network
from .optim import global_norm_clip, init_uniform, make_optimizer, step
from .tensor import DTYPES

ADAM_LR = 1e-4
SGD_LR = 1e-5
SGD_L2 = 1e-5


@dataclass
class TrainResult:
    epochs_run: int
    best_dev_ler: float
    log_path: str
    best_path: str
    last_path: str


def override_dropout(config, rate):
    """Config copy with every dropout layer forced to `rate` (0 disables)."""
    from copy import deepcopy
    config = deepcopy(config)
    for spec in config.layers:
        if isinstance(spec, DropoutSpec):
            spec.rate = rate
    return config


def batch_gradients(net, params, batch, train=True, rng=None, dtype=np.float32):
    """Accumulate per-item CTC gradients over a batch, in fixed item order.

    Returns (grads or None, summed loss, counted items, skipped items).
    Infeasibly short utterances are skipped; a non-finite loss on a feasible
    one raises with the utterance id.
    """
    grads = None
    loss_sum = 0.0
    counted = 0
    skipped = 0
    for i in range(len(batch.ids)):
        x = batch.item(i)
        log_probs, tapes = net.forward(x, params, train=train, rng=rng)
        if np.isnan(log_probs).any():
            raise RuntimeError(f"non-finite network output for utterance {batch.ids[i]}")
        loss, lattice = ctc_loss(log_probs, batch.targets[i])
        if not lattice.feasible:
            skipped += 1
            continue
        if not np.isfinite(loss):
            raise RuntimeError(f"non-finite loss for utterance {batch.ids[i]}")
        item_grads = net.backward(tapes, ctc_grad(lattice, log_probs).astype(dtype))
        if grads is None:
            grads = item_grads
        else:
            for name, g in item_grads.items():
                grads[name] += g
        loss_sum += float(loss)
        counted += 1
    return grads, loss_sum, counted, skipped


def train(config, alphabet, train_manifest, dev_manifest, out_dir, seed=0,
          precision="f32", stage=None, lr=None, batch_size=20, epochs=100,
          patience=5, l2=None, dropout=None, batch_loss="sum",
          auto_finetune=False, clip=None, target_ler=None, stats=None,
          resume=None, log_timing=True, quiet=False):
    """Run `epochs` training epochs; returns a TrainResult.

    `resume` is a checkpoint path: parameters, optimizer state, stats, rng
    state, and epoch numbering continue from it.  Passing a different
    `stage` than the checkpoint's re-creates the optimizer (the manual
    Adam -> SGD fine-tune trigger); otherwise the stored state is reused.
    """
    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, "metrics.jsonl")
    best_path = os.path.join(out_dir, "best.ckpt")
    last_path = os.path.join(out_dir, "last.ckpt")
    if batch_loss not in ("sum", "mean"):
        raise ValueError(f"batch_loss must be 'sum' or 'mean', got {batch_loss!r}")

    rng = np.random.default_rng(seed)
    start_epoch = 0
    best_ler = float("inf")
    bad_evals = 0

    if resume is not None:
        ck = load_checkpoint(resume) if isinstance(resume, str) else resume
        config = ck.config
        if dropout is not None:
            config = override_dropout(config, dropout)
        alphabet = ck.alphabet
        stats = ck.stats
        params = ck.params
        dtype = next(iter(params.values())).dtype
        net = Network(config)
        meta = ck.meta or {}
        start_epoch = int(meta.get("epoch", 0))
        best_ler = float(meta.get("best_dev_ler", float("inf")))
        bad_evals = int(meta.get("bad_evals", 0))
        if meta.get("rng_state"):
            rng.bit_generator.state = meta["rng_state"]
        stage = stage or meta.get("stage", "adam")
        if ck.optimizer is not None and ck.optimizer.kind == stage:
            opt = ck.optimizer
            if lr is not None:
                opt.lr = lr
            if l2 is not None:
                opt.l2 = l2
        else:
            opt = _fresh_optimizer(stage, net, lr, l2, dtype)
    else:
        if alphabet.size != config.alphabet_size:
            raise ValueError(f"alphabet has {alphabet.size} symbols, config expects "
                             f"{config.alphabet_size}")
        if dropout is not None:
            config = override_dropout(config, dropout)
        stage = stage or "adam"
        dtype = DTYPES[precision]
        net = Network(config)
        if stats is None:
            stats = fit_normalization(iter_static(train_manifest))
        params = init_uniform(net.param_specs(), rng, dtype=dtype)
        opt = _fresh_optimizer(stage, net, lr, l2, dtype)

    train_set = load_dataset(train_manifest, stats, dtype=dtype)
    dev_set = load_dataset(dev_manifest, stats, dtype=dtype)
    if not train_set:
        raise ValueError("empty training manifest")

    best_params = None
    if best_ler < float("inf"):
        # resumed run: recover the best-so-far parameters for a later
        # fine-tune switch, falling back to the checkpoint we resumed from
        src = load_checkpoint(best_path).params if os.path.exists(best_path) else params
        best_params = {k: v.copy() for k, v in src.items()}
    final_epoch = start_epoch

    with open(log_path, "a", encoding="utf-8") as log:
        for epoch in range(start_epoch + 1, start_epoch + epochs + 1):
            t0 = time.monotonic()
            batches = make_batches(train_set, batch_size, rng, shuffle=True)
            loss_total = 0.0
            counted_total = 0
            skipped_total = 0
            for bi, batch in enumerate(batches):
                try:
                    grads, loss_sum, counted, skipped = batch_gradients(
                        net, params, batch, train=True, rng=rng, dtype=dtype)
                except RuntimeError as e:
                    raise RuntimeError(f"epoch {epoch}, batch {bi}, ids {batch.ids}: {e}") from e
                loss_total += loss_sum
                counted_total += counted
                skipped_total += skipped
                if grads is None:
                    continue
                if batch_loss == "mean":
                    for g in grads.values():
                        g /= counted
                if clip is not None:
                    grads = global_norm_clip(grads, clip)
                step(params, grads, opt)

            if skipped_total and not quiet:
                print(f"warning: epoch {epoch}: skipped {skipped_total} infeasible "
                      f"utterance(s)", file=sys.stderr)

            report = evaluate(net, params, dev_set, alphabet)
            dev_ler = report.label_error_rate
            train_loss = loss_total / max(1, counted_total)
            seconds = round(time.monotonic() - t0, 3) if log_timing else 0.0
            line = {"epoch": epoch, "stage": stage, "train_loss": train_loss,
                    "dev_ler": dev_ler, "seconds": seconds}
            log.write(json.dumps(line) + "\n")
            log.flush()
            if not quiet:
                print(f"epoch {epoch} [{stage}] loss {train_loss:.4f} dev_ler {dev_ler:.4f}")

            improved = dev_ler < best_ler
            if improved:
                best_ler = dev_ler
                bad_evals = 0
                best_params = {k: v.copy() for k, v in params.items()}
            else:
                bad_evals += 1

            meta = {"epoch": epoch, "stage": stage, "best_dev_ler": best_ler,
                    "bad_evals": bad_evals, "rng_state": rng.bit_generator.state}
            ckpt = Checkpoint(config, alphabet, params, opt, stats, meta)
            save_checkpoint(last_path, ckpt)
            if improved:
                save_checkpoint(best_path, ckpt)
            final_epoch = epoch

            if target_ler is not None and dev_ler <= target_ler:
                break
            if bad_evals >= patience:
                if auto_finetune and stage == "adam":
                    stage = "sgd"
                    params = {k: v.copy() for k, v in best_params.items()}
                    opt = _fresh_optimizer("sgd", net, None, None, dtype)
                    bad_evals = 0
                    if not quiet:
                        print(f"epoch {epoch}: plateau, switching to SGD fine-tuning")
                else:
                    break

    if not os.path.exists(best_path):
        # a resumed run may never beat the inherited best metric; still
        # materialize best.ckpt here with the best-known parameters
        meta = {"epoch": final_epoch, "stage": stage, "best_dev_ler": best_ler,
                "bad_evals": bad_evals, "rng_state": rng.bit_generator.state}
        save_checkpoint(best_path, Checkpoint(config, alphabet,
                                              best_params or params, opt, stats, meta))

    return TrainResult(final_epoch - start_epoch, best_ler, log_path, best_path, last_path)


def _fresh_optimizer(stage, net, lr, l2, dtype):
    if stage == "adam":
        return make_optimizer("adam", net.param_specs(),
                              lr=ADAM_LR if lr is None else lr,
                              l2=0.0 if l2 is None else l2, dtype=dtype)
    return make_optimizer("sgd", net.param_specs(),
                          lr=SGD_LR if lr is None else lr,
                          l2=SGD_L2 if l2 is None else l2, dtype=dtype)
