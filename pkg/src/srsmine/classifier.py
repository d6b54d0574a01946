"""Multinomial naive Bayes for labelling requirement sentences FR / NFR."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

FR = "FR"
NFR = "NFR"
LABELS = (FR, NFR)

# small English list; off by default because modal verbs are discriminative
STOP_WORDS = frozenset(
    "a an and are as at be by for from has in is it its of on or that the this to was were will with".split()
)

_SPLIT = re.compile(r"[^0-9a-z]+")


class CorpusError(ValueError):
    pass


def tokenize(sentence: str, stop_words: Optional[Iterable[str]] = None) -> List[str]:
    tokens = [t for t in _SPLIT.split(sentence.lower()) if t]
    if stop_words:
        stop = set(stop_words)
        tokens = [t for t in tokens if t not in stop]
    return tokens


Corpus = List[Tuple[str, str]]


def read_corpus(path) -> Corpus:
    """Read ``label<TAB>sentence`` lines.  Blank lines are skipped."""
    corpus: Corpus = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            label, sep, sentence = line.partition("\t")
            if not sep:
                raise CorpusError(f"{path}:{lineno}: expected 'label<TAB>sentence'")
            label = label.strip()
            if label not in LABELS:
                raise CorpusError(f"{path}:{lineno}: unknown label {label!r} (expected FR or NFR)")
            corpus.append((sentence, label))
    return corpus


def read_sentences(path) -> List[Tuple[str, Optional[str]]]:
    """Read sentences, one per line; a leading ``FR<TAB>``/``NFR<TAB>`` label is kept."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            label, sep, rest = line.partition("\t")
            if sep and label.strip() in LABELS:
                out.append((rest, label.strip()))
            else:
                out.append((line, None))
    return out


@dataclass(frozen=True)
class ClassifierModel:
    vocabulary: Tuple[str, ...]
    token_counts: Dict[str, Dict[str, int]]
    class_totals: Dict[str, int]
    priors: Dict[str, float]
    alpha: float
    stop_words: Tuple[str, ...] = ()

    @property
    def majority(self) -> str:
        # equal priors fall to NFR
        return FR if self.priors[FR] > self.priors[NFR] else NFR

    def log_likelihood(self, token: str, label: str) -> float:
        count = self.token_counts[label].get(token, 0)
        denom = self.class_totals[label] + self.alpha * len(self.vocabulary)
        if denom == 0:
            return 0.0
        return math.log((count + self.alpha) / denom)

    def log_scores(self, tokens: Sequence[str]) -> Dict[str, float]:
        scores = {}
        for label in LABELS:
            s = math.log(self.priors[label])
            for tok in tokens:
                s += self.log_likelihood(tok, label)
            scores[label] = s
        return scores

    def posteriors(self, sentence: str) -> Dict[str, float]:
        scores = self.log_scores(tokenize(sentence, self.stop_words))
        top = max(scores.values())
        exp = {k: math.exp(v - top) for k, v in scores.items()}
        z = sum(exp.values())
        return {k: v / z for k, v in exp.items()}


def train(corpus: Corpus, alpha: float = 1.0, stop_words: Optional[Iterable[str]] = None) -> ClassifierModel:
    if not corpus:
        raise CorpusError("training corpus is empty")
    if not alpha > 0:
        raise ValueError("smoothing constant alpha must be positive")
    labels = Counter(label for _, label in corpus)
    if set(labels) - set(LABELS):
        raise CorpusError(f"unknown labels: {sorted(set(labels) - set(LABELS))}")
    if len(labels) < 2:
        raise CorpusError("training corpus must contain both FR and NFR sentences")
    stop = tuple(sorted(stop_words)) if stop_words else ()
    counts: Dict[str, Counter] = {label: Counter() for label in LABELS}
    for sentence, label in corpus:
        counts[label].update(tokenize(sentence, stop))
    vocab = sorted(set(counts[FR]) | set(counts[NFR]))
    n = len(corpus)
    return ClassifierModel(
        vocabulary=tuple(vocab),
        token_counts={label: dict(c) for label, c in counts.items()},
        class_totals={label: sum(c.values()) for label, c in counts.items()},
        priors={label: labels[label] / n for label in LABELS},
        alpha=float(alpha),
        stop_words=stop,
    )


def classify(model: ClassifierModel, sentence: str) -> Tuple[str, float]:
    """Label and log-score margin (winner minus loser, >= 0)."""
    scores = model.log_scores(tokenize(sentence, model.stop_words))
    margin = scores[FR] - scores[NFR]
    if margin > 0:
        return FR, margin
    if margin < 0:
        return NFR, -margin
    return model.majority, 0.0


@dataclass(frozen=True)
class EvaluationRow:
    set_number: int
    correct: int
    incorrect: int

    @property
    def total(self) -> int:
        return self.correct + self.incorrect


def evaluate(model: ClassifierModel, corpus: Corpus, set_number: int) -> EvaluationRow:
    correct = sum(1 for sentence, label in corpus if classify(model, sentence)[0] == label)
    return EvaluationRow(set_number, correct, len(corpus) - correct)


def format_report(rows: Sequence[EvaluationRow], corpus: Optional[Corpus] = None) -> str:
    lines = []
    if corpus is not None:
        counts = Counter(label for _, label in corpus)
        lines += [
            f"Total {len(corpus)} sentences",
            f"  {counts[NFR]} annotated as \"NFR\"",
            f"  {counts[FR]} annotated as \"FR\"",
            "",
        ]
    headers = ("Training set no", "Correctly classified sentences", "In-Correctly classified sentences")
    widths = [len(h) for h in headers]
    lines.append("  ".join(h for h in headers))
    for r in rows:
        cells = (str(r.set_number), str(r.correct), str(r.incorrect))
        lines.append("  ".join(c.rjust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines)


@dataclass(frozen=True)
class Rule:
    token: str
    label: str
    weight: float

    def __str__(self) -> str:
        return f"IF sentence contains {self.token} THEN {self.label} (weight {self.weight:.4f})"


def export_rules(model: ClassifierModel, n: int) -> List[Rule]:
    """Top ``n`` tokens per class by log-likelihood ratio against the other class."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rules: List[Rule] = []
    for label in LABELS:
        other = NFR if label == FR else FR
        weighted = [
            (model.log_likelihood(t, label) - model.log_likelihood(t, other), t)
            for t in model.vocabulary
        ]
        weighted.sort(key=lambda wt: (-wt[0], wt[1]))
        rules.extend(Rule(t, label, w) for w, t in weighted[:n])
    return rules
