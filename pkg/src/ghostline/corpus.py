"""Dialog corpus loading and keystroke-position sample expansion.

A corpus is a sequence of dialogs; each human turn contributes one training
utterance (with the earlier turns as its context) and, on the test side, one
prefix sample per cursor position inside the utterance.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass

logger = logging.getLogger(__name__)

SPEAKER_HUMAN = "human"
SPEAKER_BOT = "bot"

#: Separator used when a turn list must be flattened to a single string.
CONTEXT_JOIN = " <eou> "

#: Prefix-length buckets used by the evaluation report, inclusive bounds.
BUCKETS = ((1, 5), (6, 12), (13, 25), (26, 50))
BUCKET_LABELS = tuple(f"{lo}-{hi}" for lo, hi in BUCKETS)


class CorpusFormatError(ValueError):
    """Raised when an input file does not parse as a dialog corpus."""


@dataclass
class DialogTurn:
    speaker: str
    text: str
    index: int


@dataclass
class Dialog:
    dialog_id: str
    turns: list[DialogTurn]


@dataclass
class PrefixSample:
    """One keystroke position: the characters typed so far plus ground truth.

    ``prefix + target_completion`` reconstructs the utterance exactly; both
    parts are non-empty by construction.  ``seen`` stays ``None`` until
    :func:`mark_seen` has compared the utterance against a training set.
    """

    utterance_id: str
    prefix: str
    target_completion: str
    context: tuple[str, ...] = ()
    seen: bool | None = None

    @property
    def utterance(self) -> str:
        return self.prefix + self.target_completion


@dataclass
class CorpusSplit:
    """A named split together with the samples derived from its dialogs."""

    name: str
    dialogs: list[Dialog]

    def human_utterances(self) -> list[tuple[str, tuple[str, ...]]]:
        """Every human turn as ``(text, prior_turn_texts)``, in file order."""
        out: list[tuple[str, tuple[str, ...]]] = []
        for dialog in self.dialogs:
            for turn in dialog.turns:
                if turn.speaker == SPEAKER_HUMAN:
                    context = tuple(t.text for t in dialog.turns[: turn.index])
                    out.append((turn.text, context))
        return out

    def prefix_samples(self) -> list[PrefixSample]:
        out: list[PrefixSample] = []
        for dialog in self.dialogs:
            for turn in dialog.turns:
                if turn.speaker != SPEAKER_HUMAN:
                    continue
                context = tuple(t.text for t in dialog.turns[: turn.index])
                uid = f"{dialog.dialog_id}:{turn.index}"
                out.extend(expand_prefix_splits(uid, turn.text, context))
        return out


def _parse_turn(raw: object, index: int, lineno: int, lowercase: bool) -> DialogTurn:
    if not isinstance(raw, dict):
        raise CorpusFormatError(f"line {lineno}: turn {index} is not an object")
    speaker = raw.get("speaker")
    if speaker not in (SPEAKER_HUMAN, SPEAKER_BOT):
        raise CorpusFormatError(
            f"line {lineno}: turn {index} has speaker {speaker!r},"
            f" expected {SPEAKER_HUMAN!r} or {SPEAKER_BOT!r}"
        )
    text = raw.get("text")
    if not isinstance(text, str) or not text.strip():
        raise CorpusFormatError(f"line {lineno}: turn {index} has empty or missing text")
    text = text.strip()
    if lowercase:
        text = text.lower()
    return DialogTurn(speaker=speaker, text=text, index=index)


def load_corpus(path: str, fmt: str = "jsonl", lowercase: bool = False) -> list[Dialog]:
    """Parse ``path`` into dialogs.

    ``fmt`` is either ``jsonl`` (one JSON dialog object per line, with an
    optional ``dialog_id`` and a ``turns`` array) or ``lines`` (one human utterance
    per line, each its own context-free dialog).  Blank lines are skipped;
    anything else malformed raises :class:`CorpusFormatError` naming the line.
    """
    dialogs: list[Dialog] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if fmt == "lines":
                text = line.strip()
                if lowercase:
                    text = text.lower()
                turn = DialogTurn(speaker=SPEAKER_HUMAN, text=text, index=0)
                dialogs.append(Dialog(dialog_id=f"line{lineno}", turns=[turn]))
                continue
            if fmt != "jsonl":
                raise ValueError(f"unknown corpus format {fmt!r}")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or not isinstance(obj.get("turns"), list):
                raise CorpusFormatError(f"line {lineno}: expected an object with a 'turns' array")
            if not obj["turns"]:
                raise CorpusFormatError(f"line {lineno}: dialog has no turns")
            dialog_id = str(obj.get("dialog_id", f"d{lineno}"))
            turns = [
                _parse_turn(raw, index, lineno, lowercase)
                for index, raw in enumerate(obj["turns"])
            ]
            dialogs.append(Dialog(dialog_id=dialog_id, turns=turns))
    if not dialogs:
        raise CorpusFormatError(f"{path}: corpus contains no dialogs")
    logger.info("loaded %d dialogs from %s", len(dialogs), path)
    return dialogs


def load_split(path: str, fmt: str = "jsonl", name: str = "corpus", lowercase: bool = False) -> CorpusSplit:
    return CorpusSplit(name=name, dialogs=load_corpus(path, fmt=fmt, lowercase=lowercase))


def expand_prefix_splits(
    utterance_id: str, utterance: str, context: tuple[str, ...] = ()
) -> list[PrefixSample]:
    """All cursor positions of ``utterance``: prefix lengths 1 .. len-1.

    A one-character utterance yields no samples (there is no position where
    both sides are non-empty).  Lengths count Unicode scalar values, which is
    what Python string indexing already does.
    """
    return [
        PrefixSample(
            utterance_id=utterance_id,
            prefix=utterance[:i],
            target_completion=utterance[i:],
            context=context,
        )
        for i in range(1, len(utterance))
    ]


def mark_seen(
    samples: list[PrefixSample], train_texts: list[str] | set[str], lowercase: bool = False
) -> list[PrefixSample]:
    """Flag each sample whose full utterance occurs verbatim in training.

    With ``lowercase`` both sides are folded before comparison; there is no
    other normalisation, a single punctuation difference counts as unseen.
    """
    if lowercase:
        known = {t.lower() for t in train_texts}
    else:
        known = set(train_texts)
    for sample in samples:
        utterance = sample.utterance.lower() if lowercase else sample.utterance
        sample.seen = utterance in known
    return samples


def bucket_of(prefix_len: int) -> str | None:
    """Report bucket label for a prefix length, ``None`` beyond 50."""
    for (lo, hi), label in zip(BUCKETS, BUCKET_LABELS):
        if lo <= prefix_len <= hi:
            return label
    return None


def join_context(context: tuple[str, ...]) -> str:
    return CONTEXT_JOIN.join(context)


def corpus_fingerprint(dialogs: list[Dialog]) -> str:
    """Order-sensitive digest of the dialog contents.

    Index files record the fingerprint of the corpus they were built from so
    that evaluation can refuse a mismatched pairing instead of silently
    reporting nonsense.
    """
    payload = json.dumps(
        [[(t.speaker, t.text) for t in d.turns] for d in dialogs],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
