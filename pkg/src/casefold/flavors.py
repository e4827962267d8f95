"""The six experimental casing variants of a (train, test) corpus pair."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import numpy as np

from casefold.corpus import Sentence, Token


class MissingTruecaser(ValueError):
    """Flavor TT/TA requested without a truecaser."""


class UnexpectedTruecaser(ValueError):
    """A truecaser was supplied to a flavor that does not use one."""


class Truecaser(Protocol):
    def truecase(self, text: str) -> str: ...


class Flavor(Enum):
    C = "c"
    U = "u"
    C_PLUS_U = "cu"
    C_PLUS_U_50 = "cu50"
    TT = "tt"
    TA = "ta"

    @classmethod
    def parse(cls, name: str) -> "Flavor":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown flavor: {name!r} (expected one of "
                             f"{', '.join(f.value for f in cls)})") from None


@dataclass
class FlavoredDataset:
    train: list[Sentence]
    test_cased: list[Sentence]
    test_uncased: list[Sentence]
    flavor: Flavor
    seed: int | None = None
    truecaser_id: str | None = None


def lowercase_sentence(s: Sentence) -> Sentence:
    """Unicode-lowercase every surface; labels and token count untouched."""
    return Sentence(tuple(Token(t.surface.lower(), t.label) for t in s.tokens))


def _truecase_sentence(s: Sentence, truecaser: Truecaser) -> Sentence:
    """Lowercase then truecase the space-joined surface stream.

    The truecaser only flips letter case, so splitting on the joining spaces
    recovers exactly one surface per token.
    """
    lowered = " ".join(t.surface.lower() for t in s.tokens)
    restored = truecaser.truecase(lowered)
    surfaces = restored.split(" ")
    if len(surfaces) != len(s.tokens):
        raise ValueError("truecaser changed the token structure")
    return Sentence(tuple(Token(surf, t.label) for surf, t in zip(surfaces, s.tokens)))


def transform_train(
    sentences: list[Sentence],
    flavor: Flavor,
    seed: int = 0,
    truecaser: Truecaser | None = None,
) -> list[Sentence]:
    """The train-side casing transform of one flavor (also used to keep a
    dev split consistent with its flavored train split)."""
    if flavor in (Flavor.C, Flavor.TT):
        return list(sentences)
    if flavor is Flavor.U:
        return [lowercase_sentence(s) for s in sentences]
    if flavor is Flavor.C_PLUS_U:
        return list(sentences) + [lowercase_sentence(s) for s in sentences]
    if flavor is Flavor.C_PLUS_U_50:
        rng = np.random.Generator(np.random.PCG64(seed))
        n = len(sentences)
        chosen = set(rng.choice(n, size=n // 2, replace=False).tolist())
        return [lowercase_sentence(s) if i in chosen else s for i, s in enumerate(sentences)]
    if flavor is Flavor.TA:
        if truecaser is None:
            raise MissingTruecaser("flavor ta requires a truecaser")
        return [_truecase_sentence(s, truecaser) for s in sentences]
    raise ValueError(f"unhandled flavor {flavor}")  # pragma: no cover


def make_flavor(
    train: list[Sentence],
    test: list[Sentence],
    flavor: Flavor,
    seed: int = 0,
    truecaser: Truecaser | None = None,
    truecaser_id: str | None = None,
) -> FlavoredDataset:
    """Apply one casing flavor to a (train, test) pair.

    C: train as-is. U: train fully lowercased. C+U: train followed by a
    fully-lowercased copy (2n sentences). C+U 50: exactly floor(n/2)
    seeded-sampled train sentences lowercased in place. TT: train as-is,
    test replaced by truecase(lowercase(test)). TA: truecase(lowercase())
    on both sides. test_cased/test_uncased are always aligned; for TT/TA
    both carry the single truecased test.
    """
    needs_tc = flavor in (Flavor.TT, Flavor.TA)
    if needs_tc and truecaser is None:
        raise MissingTruecaser(f"flavor {flavor.value} requires a truecaser")
    if not needs_tc and truecaser is not None:
        raise UnexpectedTruecaser(f"flavor {flavor.value} does not take a truecaser")

    out_train = transform_train(train, flavor, seed=seed, truecaser=truecaser)

    if needs_tc:
        truecased_test = [_truecase_sentence(s, truecaser) for s in test]
        test_cased = truecased_test
        test_uncased = list(truecased_test)
    else:
        test_cased = list(test)
        test_uncased = [lowercase_sentence(s) for s in test]

    return FlavoredDataset(
        train=out_train,
        test_cased=test_cased,
        test_uncased=test_uncased,
        flavor=flavor,
        seed=seed,
        truecaser_id=truecaser_id,
    )
