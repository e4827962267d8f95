"""Character-level truecaser: a 2-layer BiLSTM over lowercase characters with
a binary per-character head (uppercase vs leave as-is)."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from casefold import autodiff as ad
from casefold import corpus as cp
from casefold import layers, modelio
from casefold.autodiff import Parameter, Value
from casefold.corpus import EmptySplit, OovPolicy, Sentence, Vocabulary
from casefold.metrics import char_f1
from casefold.optim import Adam, NonFiniteLoss


@dataclass
class TruecaserConfig:
    hidden_size: int = 300
    layers: int = 2
    batch_size: int = 100
    epochs: int = 30
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    oov: OovPolicy = field(default_factory=lambda: OovPolicy("frequency_cutoff", 0.005))

    @property
    def embed_size(self) -> int:
        # embedding width is tied to the hidden state size
        return self.hidden_size

    def __post_init__(self):
        if min(self.hidden_size, self.layers, self.batch_size, self.epochs) <= 0:
            raise ValueError("config sizes must be positive")


@dataclass
class CasingExample:
    lower_chars: str
    targets: list[int]  # 1 = restore to uppercase

    def __post_init__(self):
        if len(self.lower_chars) != len(self.targets):
            raise ValueError("chars and targets must align")


def make_casing_examples(sentences: list[Sentence]) -> list[CasingExample]:
    """One example per sentence: surfaces joined by single spaces, lowercased;
    target 1 exactly where the original character is uppercase."""
    out = []
    for s in sentences:
        text = " ".join(s.surfaces())
        out.append(CasingExample(text.lower(), [1 if ch.isupper() else 0 for ch in text]))
    return out


class TruecaserModel:
    def __init__(
        self,
        char_vocab: Vocabulary,
        config: TruecaserConfig,
        rng: np.random.Generator,
    ):
        self.char_vocab = char_vocab
        self.config = config
        v = len(char_vocab)
        e = config.embed_size
        h = config.hidden_size
        self.embedding = Parameter(layers.uniform_init(rng, (v, e), e), "embedding")
        self.lstm: list[tuple[layers.LstmCellParams, layers.LstmCellParams]] = []
        in_size = e
        for k in range(config.layers):
            fwd = layers.LstmCellParams.init(rng, in_size, h, f"lstm{k}.fwd")
            bwd = layers.LstmCellParams.init(rng, in_size, h, f"lstm{k}.bwd")
            self.lstm.append((fwd, bwd))
            in_size = 2 * h
        self.out_w = Parameter(layers.uniform_init(rng, (2 * h, 2), 2 * h), "out.w")
        self.out_b = Parameter(np.zeros(2), "out.b")

    def parameters(self) -> list[Parameter]:
        ps = [self.embedding]
        for fwd, bwd in self.lstm:
            ps += fwd.parameters() + bwd.parameters()
        ps += [self.out_w, self.out_b]
        return ps

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.data = snap[p.name].copy()

    def _logits(self, ids: np.ndarray, mask: np.ndarray) -> Value:
        emb = layers.embedding_lookup(self.embedding, ids)
        enc = layers.bilstm(emb, self.lstm, mask=mask)
        return layers.dense(enc, self.out_w, self.out_b)

    def predict_casing(self, texts: list[str], batch_size: int = 64) -> list[list[int]]:
        """Per-character class (1 = uppercase) for each lowercase text."""
        preds: list[list[int]] = [[] for _ in texts]
        order = sorted(range(len(texts)), key=lambda i: len(texts[i]))
        for i0 in range(0, len(order), batch_size):
            chunk = [i for i in order[i0:i0 + batch_size] if len(texts[i]) > 0]
            if not chunk:
                continue
            seqs = [cp.encode_units(list(texts[i]), self.char_vocab) for i in chunk]
            ids, mask = pad_batch(seqs, self.char_vocab.pad_id)
            logits = self._logits(ids, mask).data
            hard = np.argmax(logits, axis=-1)
            for row, i in enumerate(chunk):
                preds[i] = hard[row, : len(texts[i])].tolist()
        return preds

    def truecase(self, text: str) -> str:
        return apply_truecaser(self, text)


def pad_batch(seqs: list[list[int]], pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    """Pad id sequences to the batch max; returns (ids [B,T], mask [B,T])."""
    t_max = max(len(s) for s in seqs)
    ids = np.full((len(seqs), t_max), pad_id, dtype=np.int64)
    mask = np.zeros((len(seqs), t_max))
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = 1.0
    return ids, mask


def _epoch_batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i: i + batch_size] for i in range(0, n, batch_size)]


def train_truecaser(
    corpus: cp.LabeledCorpus,
    cfg: TruecaserConfig,
    seed: int,
) -> tuple[TruecaserModel, list[dict]]:
    """Minibatch Adam on per-character cross-entropy for cfg.epochs epochs;
    returns the snapshot with the lowest dev loss plus the per-epoch log.

    With no dev split, the last 10% of train sentences are held out for
    model selection.
    """
    train = list(corpus.train)
    dev = list(corpus.dev)
    if not dev:
        cut = max(1, len(train) // 10)
        if len(train) <= cut:
            raise EmptySplit("not enough train sentences to hold out a dev split")
        train, dev = train[:-cut], train[-cut:]
    if not train or not dev:
        raise EmptySplit("train and dev must be non-empty")

    rng = np.random.Generator(np.random.PCG64(seed))
    char_vocab = cp.build_vocabulary(train, "character", cfg.oov)
    model = TruecaserModel(char_vocab, cfg, rng)
    opt = Adam(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2)

    train_ex = make_casing_examples(train)
    dev_ex = make_casing_examples(dev)
    dev_seqs = [cp.encode_units(list(ex.lower_chars), char_vocab) for ex in dev_ex]

    log: list[dict] = []
    best_dev = np.inf
    best_snap = model.snapshot()
    for epoch in range(1, cfg.epochs + 1):
        losses = []
        for batch_idx in _epoch_batches(len(train_ex), cfg.batch_size, rng):
            exs = [train_ex[i] for i in batch_idx]
            seqs = [
                cp.encode_units(list(ex.lower_chars), char_vocab, rng=rng, train_mode=True)
                for ex in exs
            ]
            ids, mask = pad_batch(seqs, char_vocab.pad_id)
            targets, _ = pad_batch([ex.targets for ex in exs], 0)
            logits = model._logits(ids, mask)
            b, t, _ = logits.shape
            loss = ad.softmax_cross_entropy(
                ad.reshape(logits, (b * t, 2)),
                targets.reshape(-1),
                mask.reshape(-1).astype(bool),
            )
            if not np.isfinite(loss.item()):
                raise NonFiniteLoss(f"epoch {epoch}: loss is {loss.item()}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
        dev_loss = _dataset_loss(model, dev_seqs, dev_ex)
        log.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "dev_loss": dev_loss})
        if dev_loss < best_dev:
            best_dev = dev_loss
            best_snap = model.snapshot()
    model.restore(best_snap)
    return model, log


def _dataset_loss(model: TruecaserModel, seqs: list[list[int]], exs: list[CasingExample]) -> float:
    total, count = 0.0, 0
    bs = model.config.batch_size
    for i0 in range(0, len(seqs), bs):
        chunk_s = seqs[i0: i0 + bs]
        chunk_e = exs[i0: i0 + bs]
        ids, mask = pad_batch(chunk_s, model.char_vocab.pad_id)
        targets, _ = pad_batch([ex.targets for ex in chunk_e], 0)
        logits = model._logits(ids, mask)
        b, t, _ = logits.shape
        loss = ad.softmax_cross_entropy(
            ad.reshape(logits, (b * t, 2)), targets.reshape(-1), mask.reshape(-1).astype(bool)
        )
        n = int(mask.sum())
        total += loss.item() * n
        count += n
    return total / max(count, 1)


def apply_truecaser(model: TruecaserModel, text: str) -> str:
    """Uppercase the characters the model flags; everything else unchanged.

    Characters whose uppercase form would change length or not lowercase back
    are left alone, so lowercase(output) == input always holds.
    """
    if not text:
        return text
    preds = model.predict_casing([text])[0]
    out = []
    for ch, up in zip(text, preds):
        if up:
            u = ch.upper()
            if len(u) == 1 and u.lower() == ch:
                ch = u
        out.append(ch)
    return "".join(out)


def evaluate_truecaser(model: TruecaserModel, sentences: list[Sentence]) -> float:
    """Char-level F1 (positive class = uppercase) over the casing examples."""
    exs = make_casing_examples(sentences)
    preds = model.predict_casing([ex.lower_chars for ex in exs])
    gold = [t for ex in exs for t in ex.targets]
    pred = [p for ps in preds for p in ps]
    if not any(gold) and not any(pred):
        warnings.warn("no uppercase characters in gold or predictions; F1 = 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    return char_f1(gold, pred)


def save_truecaser(model: TruecaserModel, path: str | Path) -> None:
    """Write the model directory: config.json, chars.vocab, params.bin."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    cfg = model.config
    config = {
        "kind": "truecaser",
        "hidden_size": cfg.hidden_size,
        "layers": cfg.layers,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "beta1": cfg.beta1,
        "beta2": cfg.beta2,
    }
    (path / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    cp.save_vocabulary(model.char_vocab, path / "chars.vocab")
    modelio.save_params(path / "params.bin", {p.name: p.data for p in model.parameters()})


def load_truecaser(path: str | Path) -> TruecaserModel:
    path = Path(path)
    config = json.loads((path / "config.json").read_text())
    if config.get("kind") != "truecaser":
        raise ValueError(f"{path}: not a truecaser model directory")
    char_vocab = cp.load_vocabulary(path / "chars.vocab")
    cfg = TruecaserConfig(
        hidden_size=config["hidden_size"],
        layers=config["layers"],
        batch_size=config["batch_size"],
        epochs=config["epochs"],
        learning_rate=config["learning_rate"],
        beta1=config["beta1"],
        beta2=config["beta2"],
        oov=char_vocab.policy,
    )
    model = TruecaserModel(char_vocab, cfg, np.random.Generator(np.random.PCG64(0)))
    params = modelio.load_params(path / "params.bin")
    model.restore(params)
    return model
