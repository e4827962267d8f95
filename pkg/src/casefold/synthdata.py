"""Seeded synthetic corpora with a controllable casing signal.

The tagged grammar puts proper nouns in contexts that identify them without
case (after titles, after locative prepositions), and shares lowercase
surfaces between some person names and common nouns. A model trained on
cased text can lean on capitalization; on lowercased test text the tag is
still recoverable from context alone.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from casefold.corpus import LabeledCorpus, Sentence, Token, serialize_column_corpus

TITLES = ["mr", "mrs", "dr"]
NAMES = ["john", "mary", "peter", "susan", "james", "alice", "bill", "mark", "rose", "grace", "jack"]
HOMOGRAPH_NOUNS = ["bill", "mark", "rose", "grace", "jack"]
CITIES = ["london", "paris", "berlin", "madrid", "oslo", "dublin", "vienna", "lisbon"]
NOUNS = ["cat", "dog", "house", "tree", "bird", "car", "book", "river", "door", "garden"] + HOMOGRAPH_NOUNS
PLURALS = ["cats", "dogs", "houses", "trees", "birds", "cars", "books"]
VERBS_PAST = ["saw", "liked", "found", "chased", "met", "visited", "watched"]
VERBS_3SG = ["sees", "likes", "finds", "chases", "meets", "visits"]
DETS = ["the", "a", "every", "this"]
ADJS = ["big", "small", "old", "red", "green", "quiet", "bright"]
PREPS = ["in", "at", "near"]


def _pick(rng: np.random.Generator, words: list[str]) -> str:
    return words[rng.integers(len(words))]


def _sentence_spec(rng: np.random.Generator) -> list[tuple[str, str, str]]:
    """One sentence as (surface, pos, bio) triples, all lowercase."""
    t = int(rng.integers(7))
    out: list[tuple[str, str, str]] = []

    def det_np(bio="O"):
        out.append((_pick(rng, DETS), "DET", "O"))
        if rng.random() < 0.5:
            out.append((_pick(rng, ADJS), "ADJ", "O"))
        out.append((_pick(rng, NOUNS), "NN", bio))

    def person():
        out.append((_pick(rng, TITLES), "TTL", "O"))
        out.append((_pick(rng, NAMES), "NNP", "B-PER"))

    def bare_name():
        out.append((_pick(rng, NAMES), "NNP", "B-PER"))

    def place():
        out.append((_pick(rng, PREPS), "IN", "O"))
        out.append((_pick(rng, CITIES), "NNP", "B-LOC"))

    if t == 0:
        det_np()
        out.append((_pick(rng, VERBS_PAST), "VBD", "O"))
        det_np()
    elif t == 1:
        person()
        out.append((_pick(rng, VERBS_PAST), "VBD", "O"))
        det_np()
        place()
    elif t == 2:
        bare_name()
        out.append((_pick(rng, VERBS_3SG), "VBZ", "O"))
        det_np()
    elif t == 3:
        det_np()
        place()
        out.append((_pick(rng, VERBS_PAST), "VBD", "O"))
        out.append((_pick(rng, ADJS), "ADJ", "O"))
    elif t == 4:
        person()
        out.append(("and", "CC", "O"))
        person()
        out.append((_pick(rng, VERBS_PAST), "VBD", "O"))
        place()
    elif t == 5:
        out.append((_pick(rng, DETS), "DET", "O"))
        out.append((_pick(rng, PLURALS), "NNS", "O"))
        out.append((_pick(rng, VERBS_PAST), "VBD", "O"))
        out.append((_pick(rng, ADJS), "ADJ", "O"))
    else:
        bare_name()
        out.append((_pick(rng, VERBS_PAST), "VBD", "O"))
        bare_name()
        place()
    out.append((".", "PUNC", "O"))
    return out


def _case_surface(triples: list[tuple[str, str, str]]) -> list[tuple[str, str, str]]:
    """Standard casing: capitalize proper nouns and the sentence start."""
    cased = []
    for i, (surf, pos, bio) in enumerate(triples):
        if pos == "NNP" or i == 0:
            surf = surf[:1].upper() + surf[1:]
        cased.append((surf, pos, bio))
    return cased


def tagged_corpus(
    n_train: int, n_dev: int, n_test: int, seed: int, scheme: str = "pos"
) -> LabeledCorpus:
    """Cased POS- or BIO-labeled corpus; splits are drawn independently."""
    if scheme not in ("pos", "ner"):
        raise ValueError(f"unknown scheme: {scheme}")
    rng = np.random.Generator(np.random.PCG64(seed))
    col = 1 if scheme == "pos" else 2

    def make(n: int) -> list[Sentence]:
        sents = []
        for _ in range(n):
            triples = _case_surface(_sentence_spec(rng))
            sents.append(Sentence(tuple(Token(tr[0], tr[col]) for tr in triples)))
        return sents

    return LabeledCorpus(train=make(n_train), dev=make(n_dev), test=make(n_test))


TC_FILLERS = ["bo", "ri", "me", "tu", "sa", "do", "ne", "ka"]
TC_STARTERS = ["ta", "te"]


def truecasing_corpus(n_train: int = 200, n_dev: int = 40, seed: int = 0) -> LabeledCorpus:
    """Deterministic casing rule: title-case the sentence start and every
    occurrence of the word "london"; everything else stays lowercase.

    Word shapes are short so a small corpus still carries a dense casing
    signal per training batch.
    """
    rng = np.random.Generator(np.random.PCG64(seed))

    def make(n: int) -> list[Sentence]:
        sents = []
        for _ in range(n):
            length = int(rng.integers(3, 7))
            words = [
                "london" if rng.random() < 0.3 else _pick(rng, TC_FILLERS)
                for _ in range(length)
            ]
            words[0] = _pick(rng, TC_STARTERS)
            toks = []
            for i, w in enumerate(words):
                if i == 0 or w == "london":
                    w = w[:1].upper() + w[1:]
                toks.append(Token(w, "O"))
            sents.append(Sentence(tuple(toks)))
        return sents

    return LabeledCorpus(train=make(n_train), dev=make(n_dev), test=[])


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="python -m casefold.synthdata",
        description="Write a synthetic labeled corpus in two-column format.",
    )
    ap.add_argument("--task", choices=["pos", "ner", "truecase"], default="pos")
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--dev", type=int, default=400)
    ap.add_argument("--test", type=int, default=400)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--out", required=True, help="output directory")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.task == "truecase":
        corpus = truecasing_corpus(args.train, args.dev, args.seed)
    else:
        corpus = tagged_corpus(args.train, args.dev, args.test, args.seed, scheme=args.task)
    for split, sents in (("train", corpus.train), ("dev", corpus.dev), ("test", corpus.test)):
        if sents:
            (out / f"{split}.txt").write_text(serialize_column_corpus(sents), encoding="utf-8")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
