"""Binary labeling tasks and dataset generation for sequence classification.

The structural task labels a binary sequence by majority vote over its
symbols (ties go to class 0).  The predictive task labels a sequence by a
32-entry lookup table indexed by the 5 most recent symbols read MSB-first;
a flag switches to the first 5 symbols since either reading is defensible.
"""

import csv
from dataclasses import dataclass

from . import hmm as hmm_mod
from . import qhmm as qhmm_mod

DEFAULT_LABEL_TABLE = "11110011001100100110001011000110"

WINDOW = 5


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    sequences: tuple
    classes: tuple  # 0/1 ints, aligned with sequences
    source_model: str
    length: int
    seed: object

    def __post_init__(self):
        if len(self.sequences) != len(self.classes):
            raise ValueError("sequence/class length mismatch")
        if any(len(s) != self.length for s in self.sequences):
            raise ValueError("all sequences must have the declared length")
        if any(c not in (0, 1) for c in self.classes):
            raise ValueError("classes must be 0 or 1")

    def __len__(self):
        return len(self.sequences)


def _require_binary(y):
    if any(c not in "01" for c in y):
        raise LabelError(f"non-binary symbol in {y!r}")


def structural_label(y):
    """1 iff the count of '1' symbols exceeds half the length; ties are 0."""
    _require_binary(y)
    ones = y.count("1")
    return 1 if ones > len(y) / 2 else 0


def predictive_label(y, table=DEFAULT_LABEL_TABLE, use_first_window=False):
    """Lookup label indexed by a 5-symbol window of y, MSB-first."""
    _require_binary(y)
    if len(table) != 2 ** WINDOW:
        raise LabelError(f"label table must have {2 ** WINDOW} entries")
    if len(y) < WINDOW:
        raise LabelError(f"sequence shorter than {WINDOW} symbols")
    window = y[:WINDOW] if use_first_window else y[-WINDOW:]
    return int(table[int(window, 2)])


def make_predictive_labeler(table=DEFAULT_LABEL_TABLE, use_first_window=False):
    def labeler(y):
        return predictive_label(y, table=table, use_first_window=use_first_window)

    return labeler


TASKS = {
    "structural": lambda: structural_label,
    "predictive": make_predictive_labeler,
}


def get_labeler(task):
    if task not in TASKS:
        raise LabelError(f"unknown task {task!r}")
    return TASKS[task]()


def _sample_sequence(model, length, rng):
    if isinstance(model, hmm_mod.ClassicalHmm):
        return hmm_mod.sample(model, length, rng)
    return qhmm_mod.sample(model, length, rng)


def generate_dataset(model, n, length, labeler, rng, source_model=""):
    """n i.i.d. labeled samples of fixed length from a generative model."""
    sequences = []
    classes = []
    for _ in range(n):
        y = _sample_sequence(model, length, rng)
        sequences.append(y)
        classes.append(labeler(y))
    return LabeledDataset(
        sequences=tuple(sequences),
        classes=tuple(classes),
        source_model=source_model,
        length=length,
        seed=None,
    )


def exact_class_mass(model, length, labeler):
    """Exact probability of class 1 by exhaustive enumeration."""
    if isinstance(model, hmm_mod.ClassicalHmm):
        dist = hmm_mod.enumerate_distribution(model, length)
    else:
        dist = metrics_forward(model, length)
    return sum(p for y, p in dist.items() if labeler(y) == 1)


def metrics_forward(q, length):
    from . import metrics

    return metrics.forward_distribution(q, q.initial, length).probs


def dataset_to_csv(ds, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["sequence", "class"])
        for y, c in zip(ds.sequences, ds.classes):
            writer.writerow([y, c])


def dataset_from_csv(path, source_model=""):
    sequences = []
    classes = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows[0] != ["sequence", "class"]:
        raise ValueError("dataset CSV must start with a 'sequence,class' header")
    for y, c in rows[1:]:
        sequences.append(y)
        classes.append(int(c))
    return LabeledDataset(
        sequences=tuple(sequences),
        classes=tuple(classes),
        source_model=source_model,
        length=len(sequences[0]) if sequences else 0,
        seed=None,
    )
