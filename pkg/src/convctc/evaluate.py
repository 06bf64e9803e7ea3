"""Decoding-based evaluation: edit distances and the corpus label error rate.

Scoring optionally folds symbols through a user-supplied mapping file (one
"<symbol> <scoring-symbol>" pair per line, e.g. the conventional 61-to-39
phone fold); the map is applied to hypothesis and reference alike before
the distance is computed.
"""

from dataclasses import dataclass, field

from .ctc import best_path_decode


@dataclass
class EditCounts:
    distance: int = 0
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0

    def __add__(self, other):
        return EditCounts(self.distance + other.distance,
                          self.substitutions + other.substitutions,
                          self.insertions + other.insertions,
                          self.deletions + other.deletions)


def levenshtein(ref, hyp):
    """Edit distance with operation counts.

    Ties resolve match/substitution first, then deletion, then insertion,
    so the reported S/I/D split is deterministic.
    """
    ref = list(ref)
    hyp = list(hyp)
    prev = [EditCounts(j, 0, j, 0) for j in range(len(hyp) + 1)]
    for i in range(1, len(ref) + 1):
        row = [EditCounts(i, 0, 0, i)]
        for j in range(1, len(hyp) + 1):
            if ref[i - 1] == hyp[j - 1]:
                best = prev[j - 1]
            else:
                best = EditCounts(prev[j - 1].distance + 1, prev[j - 1].substitutions + 1,
                                  prev[j - 1].insertions, prev[j - 1].deletions)
            if prev[j].distance + 1 < best.distance:
                best = EditCounts(prev[j].distance + 1, prev[j].substitutions,
                                  prev[j].insertions, prev[j].deletions + 1)
            if row[j - 1].distance + 1 < best.distance:
                best = EditCounts(row[j - 1].distance + 1, row[j - 1].substitutions,
                                  row[j - 1].insertions + 1, row[j - 1].deletions)
            row.append(best)
        prev = row
    return prev[-1]


def load_mapping(path, alphabet):
    """Scoring map: every mapped symbol must exist in the alphabet; symbols
    not listed map to themselves."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<symbol> <scoring-symbol>'")
            src, dst = parts
            if src not in alphabet.index:
                raise ValueError(f"{path}:{lineno}: unknown symbol {src!r}")
            mapping[src] = dst
    return mapping


@dataclass
class EvalReport:
    per_utterance: list = field(default_factory=list)
    counts: EditCounts = field(default_factory=EditCounts)
    total_ref_len: int = 0
    decodes: dict = field(default_factory=dict)

    @property
    def label_error_rate(self):
        if self.total_ref_len == 0:
            return 0.0 if self.counts.distance == 0 else float("inf")
        return self.counts.distance / self.total_ref_len

    def to_json(self):
        return {
            "label_error_rate": self.label_error_rate,
            "total_edit_distance": self.counts.distance,
            "total_reference_length": self.total_ref_len,
            "substitutions": self.counts.substitutions,
            "insertions": self.counts.insertions,
            "deletions": self.counts.deletions,
            "utterances": self.per_utterance,
        }


def evaluate(net, params, dataset, alphabet, mapping=None):
    """Best-path decode every utterance and score against its reference."""
    report = EvalReport()
    for utt in dataset:
        log_probs, _ = net.forward(utt.features, params)
        hyp = alphabet.decode(best_path_decode(log_probs))
        ref = alphabet.decode(utt.target)
        if mapping:
            hyp = [mapping.get(s, s) for s in hyp]
            ref = [mapping.get(s, s) for s in ref]
        counts = levenshtein(ref, hyp)
        report.per_utterance.append({"id": utt.uid, "distance": counts.distance,
                                     "ref_len": len(ref)})
        report.counts = report.counts + counts
        report.total_ref_len += len(ref)
        report.decodes[utt.uid] = hyp
    return report
