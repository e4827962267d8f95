"""Word-level BiLSTM sequence tagger for POS and NER.

Embeddings (trainable, static-file, or trainable word + char-BiLSTM concat)
feed a single BiLSTM layer, a per-step dense projection, and either a
softmax or a linear-chain CRF head.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from casefold import autodiff as ad
from casefold import corpus as cp
from casefold import crf as crf_mod
from casefold import layers, modelio
from casefold.autodiff import Parameter, Value
from casefold.corpus import EmptySplit, OovPolicy, Sentence, Vocabulary
from casefold.flavors import Flavor, FlavoredDataset, make_flavor, transform_train
from casefold.metrics import EvalReport, bio_decode, span_f1, token_accuracy
from casefold.optim import Adam, NonFiniteLoss
from casefold.truecaser import pad_batch


class UnknownLabel(ValueError):
    """A sentence carries a label missing from the model's label index."""


class RaggedDimensions(ValueError):
    """A static-embedding line has the wrong number of components."""

    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"line {line_no}: inconsistent vector dimension")


class EmptyFile(ValueError):
    """The static-embedding file contains no vectors."""


@dataclass(frozen=True)
class EmbeddingSource:
    kind: Literal["trainable", "static_file", "trainable_plus_char"]
    dim: int = 128
    path: str | None = None
    char_dim: int = 25
    char_hidden: int = 200

    @classmethod
    def parse(cls, spec: str) -> "EmbeddingSource":
        """Parse CLI syntax: trainable:D | static:PATH | char:WD,CD,CH."""
        kind, _, rest = spec.partition(":")
        if kind == "trainable":
            return cls("trainable", dim=int(rest) if rest else 128)
        if kind == "static":
            if not rest:
                raise ValueError("static embeddings need a path: static:PATH")
            return cls("static_file", path=rest)
        if kind == "char":
            parts = [int(x) for x in rest.split(",")] if rest else []
            wd, cd, ch = (parts + [128, 25, 200])[:3]
            return cls("trainable_plus_char", dim=wd, char_dim=cd, char_hidden=ch)
        raise ValueError(f"unknown embedding spec: {spec!r}")

    def describe(self) -> str:
        if self.kind == "trainable":
            return f"trainable:{self.dim}"
        if self.kind == "static_file":
            return f"static:{self.path}"
        return f"char:{self.dim},{self.char_dim},{self.char_hidden}"


@dataclass
class TaggerConfig:
    hidden_units: int = 512
    lstm_dropout: float = 0.0
    recurrent_dropout: float = 0.0
    learning_rate: float = 0.001
    head: Literal["softmax", "crf"] = "crf"
    embedding: EmbeddingSource = field(default_factory=lambda: EmbeddingSource("trainable", 128))
    max_epochs: int = 40
    early_stop_min_delta: float = 0.001
    early_stop_patience: int = 4
    batch_size: int = 32

    def __post_init__(self):
        if self.hidden_units <= 0:
            raise ValueError("hidden_units must be positive")
        if not (0.0 <= self.lstm_dropout < 1.0 and 0.0 <= self.recurrent_dropout < 1.0):
            raise ValueError("dropout rates must be in [0, 1)")


@dataclass
class StaticEmbeddings:
    dim: int
    table: dict[str, np.ndarray]

    def lookup(self, word: str) -> np.ndarray:
        vec = self.table.get(word)
        return vec if vec is not None else np.zeros(self.dim)


def load_static_embeddings(path: str | Path) -> StaticEmbeddings:
    """Parse `word v1 .. vD` lines; D is fixed by the first line."""
    dim = None
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            word, comps = parts[0], parts[1:]
            if dim is None:
                dim = len(comps)
                if dim == 0:
                    raise RaggedDimensions(line_no)
            elif len(comps) != dim:
                raise RaggedDimensions(line_no)
            table[word] = np.array([float(c) for c in comps])
    if not table:
        raise EmptyFile(f"{path}: no embedding vectors")
    return StaticEmbeddings(dim=dim, table=table)


class TaggerModel:
    def __init__(
        self,
        word_vocab: Vocabulary,
        label_index: dict[str, int],
        config: TaggerConfig,
        rng: np.random.Generator,
        char_vocab: Vocabulary | None = None,
        static: StaticEmbeddings | None = None,
    ):
        self.word_vocab = word_vocab
        self.char_vocab = char_vocab
        self.static = static
        self.label_index = dict(label_index)
        self.labels = [l for l, _ in sorted(label_index.items(), key=lambda kv: kv[1])]
        self.config = config
        src = config.embedding
        c = len(label_index)
        h = config.hidden_units

        self.word_embedding: Parameter | None = None
        self.char_embedding: Parameter | None = None
        self.char_lstm: list[tuple[layers.LstmCellParams, layers.LstmCellParams]] = []
        if src.kind == "static_file":
            if static is None:
                raise ValueError("static_file embedding source needs a table")
            in_size = static.dim
        else:
            self.word_embedding = Parameter(
                layers.uniform_init(rng, (len(word_vocab), src.dim), src.dim), "embedding.word"
            )
            in_size = src.dim
            if src.kind == "trainable_plus_char":
                if char_vocab is None:
                    raise ValueError("char embeddings need a char vocabulary")
                self.char_embedding = Parameter(
                    layers.uniform_init(rng, (len(char_vocab), src.char_dim), src.char_dim),
                    "embedding.char",
                )
                self.char_lstm = [(
                    layers.LstmCellParams.init(rng, src.char_dim, src.char_hidden, "charlstm.fwd"),
                    layers.LstmCellParams.init(rng, src.char_dim, src.char_hidden, "charlstm.bwd"),
                )]
                in_size += 2 * src.char_hidden

        self.lstm = [(
            layers.LstmCellParams.init(rng, in_size, h, "lstm0.fwd"),
            layers.LstmCellParams.init(rng, in_size, h, "lstm0.bwd"),
        )]
        self.dense_w = Parameter(layers.uniform_init(rng, (2 * h, c), 2 * h), "dense.w")
        self.dense_b = Parameter(np.zeros(c), "dense.b")
        self.crf: crf_mod.CrfParams | None = None
        if config.head == "crf":
            self.crf = crf_mod.CrfParams.init(rng, c)

    def parameters(self) -> list[Parameter]:
        ps: list[Parameter] = []
        if self.word_embedding is not None:
            ps.append(self.word_embedding)
        if self.char_embedding is not None:
            ps.append(self.char_embedding)
        for fwd, bwd in self.char_lstm + self.lstm:
            ps += fwd.parameters() + bwd.parameters()
        ps += [self.dense_w, self.dense_b]
        if self.crf is not None:
            ps += self.crf.parameters()
        return ps

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.data = snap[p.name].copy()

    # ---- forward -----------------------------------------------------

    def _embed(self, sentences: list[Sentence], train: bool, rng) -> tuple[Value, np.ndarray]:
        """Embed a batch; returns ([B, T, E], mask [B, T])."""
        src = self.config.embedding
        t_max = max(len(s) for s in sentences)
        b = len(sentences)
        mask = np.zeros((b, t_max))
        for i, s in enumerate(sentences):
            mask[i, : len(s)] = 1.0

        if src.kind == "static_file":
            arr = np.zeros((b, t_max, self.static.dim))
            for i, s in enumerate(sentences):
                for t, surf in enumerate(s.surfaces()):
                    arr[i, t] = self.static.lookup(surf)
            return Value(arr), mask

        ids = np.full((b, t_max), self.word_vocab.pad_id, dtype=np.int64)
        for i, s in enumerate(sentences):
            ids[i, : len(s)] = cp.encode(s, self.word_vocab, rng=rng, train_mode=train)
        emb = layers.embedding_lookup(self.word_embedding, ids)
        if src.kind != "trainable_plus_char":
            return emb, mask

        char_vecs = self._char_token_vectors(sentences, b, t_max)
        return ad.concat([emb, char_vecs], axis=-1), mask

    def _char_token_vectors(self, sentences: list[Sentence], b: int, t_max: int) -> Value:
        """Char-BiLSTM encoding of every token, scattered back to [B, T, 2H]."""
        seqs: list[list[int]] = []
        index = np.full((b, t_max), -1, dtype=np.int64)
        for i, s in enumerate(sentences):
            for t, surf in enumerate(s.surfaces()):
                index[i, t] = len(seqs)
                seqs.append(cp.encode_units(list(surf), self.char_vocab))
        ids, cmask = pad_batch(seqs, self.char_vocab.pad_id)
        emb = layers.embedding_lookup(self.char_embedding, ids)
        out = layers.bilstm(emb, self.char_lstm, mask=cmask)
        hh = self.config.embedding.char_hidden
        # masked recurrence keeps the forward state constant past the last
        # real char, so the final step holds it; backward's step 0 spans all
        token_vec = ad.concat([out[:, -1, :hh], out[:, 0, hh:]], axis=-1)
        with_zero = ad.concat([token_vec, Value(np.zeros((1, 2 * hh)))], axis=0)
        flat_index = np.where(index < 0, len(seqs), index)
        return with_zero[flat_index]

    def emissions(self, sentences: list[Sentence], train: bool = False,
                  rng: np.random.Generator | None = None) -> tuple[Value, np.ndarray]:
        emb, mask = self._embed(sentences, train, rng)
        enc = layers.bilstm(
            emb, self.lstm,
            dropout_rate=self.config.lstm_dropout,
            recurrent_dropout_rate=self.config.recurrent_dropout,
            train=train, rng=rng, mask=mask,
        )
        return layers.dense(enc, self.dense_w, self.dense_b), mask

    def loss(self, sentences: list[Sentence], rng: np.random.Generator) -> Value:
        em, mask = self.emissions(sentences, train=True, rng=rng)
        tags = self._label_ids(sentences, mask.shape[1])
        if self.config.head == "crf":
            return crf_mod.nll_batch(em, tags, self.crf, mask)
        b, t, c = em.shape
        return ad.softmax_cross_entropy(
            ad.reshape(em, (b * t, c)), tags.reshape(-1), mask.reshape(-1).astype(bool)
        )

    def _label_ids(self, sentences: list[Sentence], t_max: int) -> np.ndarray:
        tags = np.zeros((len(sentences), t_max), dtype=np.int64)
        for i, s in enumerate(sentences):
            for t, lab in enumerate(s.labels()):
                if lab not in self.label_index:
                    raise UnknownLabel(f"label {lab!r} not in the model's label index")
                tags[i, t] = self.label_index[lab]
        return tags

    def predict_batch(self, sentences: list[Sentence], batch_size: int | None = None) -> list[list[str]]:
        bs = batch_size or self.config.batch_size
        out: list[list[str]] = []
        for i0 in range(0, len(sentences), bs):
            chunk = sentences[i0: i0 + bs]
            em, mask = self.emissions(chunk)
            if self.config.head == "softmax":
                hard = np.argmax(em.data, axis=-1)
                for i, s in enumerate(chunk):
                    out.append([self.labels[k] for k in hard[i, : len(s)]])
            else:
                for i, s in enumerate(chunk):
                    path, _ = crf_mod.viterbi_decode(em.data[i, : len(s), :], self.crf)
                    out.append([self.labels[k] for k in path])
        return out

    def predict(self, sentence: Sentence) -> list[str]:
        return self.predict_batch([sentence], batch_size=1)[0]


def build_tagger(
    train: list[Sentence],
    dev: list[Sentence],
    cfg: TaggerConfig,
    rng: np.random.Generator,
    word_policy: OovPolicy | None = None,
) -> TaggerModel:
    """Vocabularies and label index from train (+dev labels), fresh params."""
    labels = sorted({t.label for s in train + dev for t in s.tokens})
    label_index = {lab: i for i, lab in enumerate(labels)}
    policy = word_policy or OovPolicy("frequency_cutoff", 0.0)
    word_vocab = cp.build_vocabulary(train, "word", policy)
    char_vocab = None
    static = None
    src = cfg.embedding
    if src.kind == "trainable_plus_char":
        char_units = sorted({ch for s in train for surf in s.surfaces() for ch in surf})
        # build over per-token characters, not the space-joined stream
        char_vocab = Vocabulary(
            unit_kind="character",
            id_of={u: i + 2 for i, u in enumerate(char_units)},
            oov_id=1, pad_id=0,
            policy=OovPolicy("frequency_cutoff", 0.0),
        )
    elif src.kind == "static_file":
        static = load_static_embeddings(src.path)
    return TaggerModel(word_vocab, label_index, cfg, rng, char_vocab=char_vocab, static=static)


def train_tagger(
    data: FlavoredDataset,
    dev: list[Sentence],
    cfg: TaggerConfig,
    seed: int,
) -> tuple[TaggerModel, list[dict]]:
    """Minibatch Adam on the masked head loss with early stopping on dev
    token accuracy; returns the best-dev snapshot plus the per-epoch log."""
    if not data.train or not dev:
        raise EmptySplit("train and dev must be non-empty")
    rng = np.random.Generator(np.random.PCG64(seed))
    model = build_tagger(data.train, dev, cfg, rng)
    opt = Adam(model.parameters(), cfg.learning_rate)

    n = len(data.train)
    log: list[dict] = []
    best_acc = -1.0
    best_snap = model.snapshot()
    sig_ref = -1.0  # accuracy at the last early-stopping reset
    wait = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        losses = []
        for i0 in range(0, n, cfg.batch_size):
            batch = [data.train[i] for i in order[i0: i0 + cfg.batch_size]]
            loss = model.loss(batch, rng)
            if not np.isfinite(loss.item()):
                raise NonFiniteLoss(f"epoch {epoch}: loss is {loss.item()}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
        acc = _token_accuracy_fraction(model, dev)
        log.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "dev_acc": acc})
        if acc > best_acc:
            best_acc = acc
            best_snap = model.snapshot()
        if acc >= sig_ref + cfg.early_stop_min_delta:
            sig_ref = acc
            wait = 0
        else:
            wait += 1
            if wait >= cfg.early_stop_patience:
                break
    model.restore(best_snap)
    return model, log


def _token_accuracy_fraction(model: TaggerModel, sentences: list[Sentence]) -> float:
    preds = model.predict_batch(sentences)
    correct = total = 0
    for s, p in zip(sentences, preds):
        for g_lab, p_lab in zip(s.labels(), p):
            correct += g_lab == p_lab
            total += 1
    return correct / total if total else 0.0


def evaluate_tagger(model: TaggerModel, sentences: list[Sentence], metric: str) -> float:
    """token_accuracy or span_f1, as a percentage."""
    preds = model.predict_batch(sentences)
    if metric == "token_accuracy":
        gold = [lab for s in sentences for lab in s.labels()]
        flat = [lab for p in preds for lab in p]
        return token_accuracy(gold, flat)
    if metric == "span_f1":
        return span_f1([bio_decode(s.labels()) for s in sentences],
                       [bio_decode(p) for p in preds])
    raise ValueError(f"unknown metric: {metric}")


def evaluate_flavor_matrix(
    train: list[Sentence],
    dev: list[Sentence],
    test: list[Sentence],
    flavors: list[Flavor],
    cfg: TaggerConfig,
    seed: int,
    metric: str = "token_accuracy",
    truecaser=None,
    truecaser_id: str | None = None,
) -> tuple[EvalReport, dict[Flavor, TaggerModel]]:
    """Train one tagger per flavor and fill the cased/uncased/avg table.

    The dev split gets the same train-side casing transform as the train
    split (seed offset by 1 so C+U 50 draws an independent half).
    """
    report = EvalReport(metric_kind=metric)
    models: dict[Flavor, TaggerModel] = {}
    for flavor in flavors:
        tc = truecaser if flavor in (Flavor.TT, Flavor.TA) else None
        fd = make_flavor(train, test, flavor, seed=seed, truecaser=tc, truecaser_id=truecaser_id)
        dev_f = transform_train(dev, flavor, seed=seed + 1, truecaser=tc)
        model, _ = train_tagger(fd, dev_f, cfg, seed)
        models[flavor] = model
        score_c = evaluate_tagger(model, fd.test_cased, metric)
        score_u = evaluate_tagger(model, fd.test_uncased, metric)
        report.add(flavor, score_c, score_u)
    return report, models


# ---- serialization ----------------------------------------------------


def save_tagger(model: TaggerModel, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    cfg = model.config
    config = {
        "kind": "tagger",
        "hidden_units": cfg.hidden_units,
        "lstm_dropout": cfg.lstm_dropout,
        "recurrent_dropout": cfg.recurrent_dropout,
        "learning_rate": cfg.learning_rate,
        "head": cfg.head,
        "embedding": cfg.embedding.describe(),
        "max_epochs": cfg.max_epochs,
        "early_stop_min_delta": cfg.early_stop_min_delta,
        "early_stop_patience": cfg.early_stop_patience,
        "batch_size": cfg.batch_size,
        "labels": model.labels,
    }
    (path / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    cp.save_vocabulary(model.word_vocab, path / "words.vocab")
    if model.char_vocab is not None:
        cp.save_vocabulary(model.char_vocab, path / "chars.vocab")
    if model.static is not None:
        lines = [
            w + " " + " ".join(repr(float(x)) for x in vec)
            for w, vec in sorted(model.static.table.items())
        ]
        (path / "static_embeddings.txt").write_text("\n".join(lines) + "\n")
    modelio.save_params(path / "params.bin", {p.name: p.data for p in model.parameters()})


def load_tagger(path: str | Path) -> TaggerModel:
    path = Path(path)
    config = json.loads((path / "config.json").read_text())
    if config.get("kind") != "tagger":
        raise ValueError(f"{path}: not a tagger model directory")
    emb = EmbeddingSource.parse(config["embedding"])
    if emb.kind == "static_file":
        emb = replace(emb, path=str(path / "static_embeddings.txt"))
    cfg = TaggerConfig(
        hidden_units=config["hidden_units"],
        lstm_dropout=config["lstm_dropout"],
        recurrent_dropout=config["recurrent_dropout"],
        learning_rate=config["learning_rate"],
        head=config["head"],
        embedding=emb,
        max_epochs=config["max_epochs"],
        early_stop_min_delta=config["early_stop_min_delta"],
        early_stop_patience=config["early_stop_patience"],
        batch_size=config["batch_size"],
    )
    label_index = {lab: i for i, lab in enumerate(config["labels"])}
    word_vocab = cp.load_vocabulary(path / "words.vocab")
    char_vocab = None
    if (path / "chars.vocab").exists():
        char_vocab = cp.load_vocabulary(path / "chars.vocab")
    static = None
    if emb.kind == "static_file":
        static = load_static_embeddings(emb.path)
    rng = np.random.Generator(np.random.PCG64(0))
    model = TaggerModel(word_vocab, label_index, cfg, rng, char_vocab=char_vocab, static=static)
    model.restore(modelio.load_params(path / "params.bin"))
    return model
