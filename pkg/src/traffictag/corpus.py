"""Corpus model for traffic tweets: normalization, filtering, splits, synthetic data, file IO.

A corpus is an immutable collection of tweets. Each tweet carries its raw
text, a normalized token sequence, a binary class label (traffic or
non_traffic), and zero or more typed slot spans over the tokens. Slot spans
answer the four fine-grained questions about a traffic event: when, where,
what, and consequence.

Two interchangeable file formats are supported:

* jsonl -- one object per line with fields ``id``, ``text``, ``tokens``,
  ``label`` and ``spans`` (a list of ``{"type", "start", "end"}``).
* conll -- per sentence: a header line ``# label=<class>``, one
  ``token<TAB>tag`` line per token, and a blank separator line.

Because no public corpus ships with this package, :func:`generate_synthetic`
builds deterministic template corpora with exact gold annotations, including
a region knob (BRU / BE) that controls cross-region vocabulary overlap for
transfer experiments.
"""

from __future__ import annotations

import json
import random
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

SLOT_TYPES = ("when", "where", "what", "consequence")

TRAFFIC = "traffic"
NON_TRAFFIC = "non_traffic"
CLASS_LABELS = (NON_TRAFFIC, TRAFFIC)  # index 1 = traffic


class CorpusError(ValueError):
    """Invalid corpus data or an impossible corpus operation."""


class DegenerateTweetError(CorpusError):
    """Nothing remains after normalization; callers must drop the tweet."""


class CorpusFormatError(CorpusError):
    """Malformed corpus file. Carries the 1-based offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class SlotSpan:
    """Half-open token span [start, end) of one slot type."""

    slot_type: str
    start: int
    end: int

    def __post_init__(self):
        if self.slot_type not in SLOT_TYPES:
            raise CorpusError(f"unknown slot type {self.slot_type!r}")
        if not (0 <= self.start < self.end):
            raise CorpusError(f"bad span bounds [{self.start}, {self.end})")

    def key(self) -> tuple[str, int, int]:
        return (self.slot_type, self.start, self.end)


def check_spans(spans: Sequence[SlotSpan], token_count: int, where: str = "spans") -> None:
    """Raise CorpusError unless spans are in-bounds and mutually disjoint."""
    for span in spans:
        if span.end > token_count:
            raise CorpusError(
                f"{where}: span {span.key()} exceeds token count {token_count}"
            )
    ordered = sorted(spans, key=lambda s: s.start)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise CorpusError(f"{where}: overlapping spans {prev.key()} and {cur.key()}")


@dataclass(frozen=True)
class Tweet:
    id: str
    raw_text: str
    tokens: tuple[str, ...]
    class_label: str
    spans: tuple[SlotSpan, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "spans", tuple(self.spans))
        if not self.tokens:
            raise CorpusError(f"tweet {self.id}: empty token sequence")
        if self.class_label not in CLASS_LABELS:
            raise CorpusError(f"tweet {self.id}: unknown class {self.class_label!r}")
        if self.class_label == NON_TRAFFIC and self.spans:
            raise CorpusError(f"tweet {self.id}: non_traffic tweet carries spans")
        check_spans(self.spans, len(self.tokens), where=f"tweet {self.id}")


@dataclass(frozen=True)
class Corpus:
    """Immutable tweet collection. Equality compares tweets only; the name
    and provenance are labels, not content."""

    name: str = field(compare=False)
    tweets: tuple[Tweet, ...] = ()
    provenance: str = field(default="loaded", compare=False)  # loaded | synthetic

    def __post_init__(self):
        object.__setattr__(self, "tweets", tuple(self.tweets))
        seen: set[str] = set()
        for tweet in self.tweets:
            if tweet.id in seen:
                raise CorpusError(f"duplicate tweet id {tweet.id!r}")
            seen.add(tweet.id)

    def __len__(self) -> int:
        return len(self.tweets)

    def __iter__(self) -> Iterator[Tweet]:
        return iter(self.tweets)


@dataclass(frozen=True)
class CorpusStats:
    class_counts: dict[str, int]
    slot_counts: dict[str, int]
    length_histogram: dict[int, int]


# ---------------------------------------------------------------------------
# Normalization and filtering
# ---------------------------------------------------------------------------

# scheme://anything or www.anything, dropped before tokenization
_URL_RE = re.compile(r"(?:[a-z][a-z0-9+.-]*://\S+|www\.\S+)", re.IGNORECASE)


def normalize_tweet(raw_text: str) -> list[str]:
    """Normalize raw tweet text into tokens.

    URLs are removed entirely, the remainder is lowercased and split on
    whitespace, and every punctuation character becomes its own token.
    Raises DegenerateTweetError when nothing survives.
    """
    text = _URL_RE.sub(" ", raw_text).lower()
    parts: list[str] = []
    for ch in text:
        if unicodedata.category(ch).startswith("P"):
            parts.append(f" {ch} ")
        else:
            parts.append(ch)
    tokens = "".join(parts).split()
    if not tokens:
        raise DegenerateTweetError(f"nothing left after normalization: {raw_text!r}")
    return tokens


def keyword_filter(corpus: Corpus, keywords: set[str]) -> Corpus:
    """Sub-corpus of tweets containing at least one keyword as a whole token."""
    if not keywords:
        raise CorpusError("keyword set is empty")
    wanted = {k.lower() for k in keywords}
    kept = tuple(t for t in corpus if any(tok in wanted for tok in t.tokens))
    return Corpus(name=f"{corpus.name}/filtered", tweets=kept, provenance=corpus.provenance)


def split_corpus(corpus: Corpus, seed: int) -> tuple[Corpus, Corpus, Corpus]:
    """Deterministic seeded shuffle, then a 60/20/20 train/dev/test partition.

    Dev and test each get floor(n/5) tweets; the remainder goes to train.
    """
    n = len(corpus)
    if n < 5:
        raise CorpusError(f"corpus too small to split: {n} < 5")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    k = n // 5
    parts = (order[: n - 2 * k], order[n - 2 * k : n - k], order[n - k :])
    names = ("train", "dev", "test")
    return tuple(
        Corpus(
            name=f"{corpus.name}/{label}",
            tweets=tuple(corpus.tweets[i] for i in idx),
            provenance=corpus.provenance,
        )
        for label, idx in zip(names, parts)
    )


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Per-class tweet counts, per-type span counts, and a token-length histogram.

    The jsonl/conll formats mirror the published Belgian reference corpus;
    once that corpus is available, loading it here must report 5,386 traffic
    and 5,237 non-traffic tweets, with 5,305 "where" spans.
    """
    class_counts = {label: 0 for label in CLASS_LABELS}
    slot_counts = {slot: 0 for slot in SLOT_TYPES}
    histogram: Counter[int] = Counter()
    for tweet in corpus:
        class_counts[tweet.class_label] += 1
        histogram[len(tweet.tokens)] += 1
        for span in tweet.spans:
            slot_counts[span.slot_type] += 1
    return CorpusStats(class_counts, slot_counts, dict(sorted(histogram.items())))


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

_FILLER = ("op", "de", "het", "aan", "ter", "hoogte", "van", "naar", "in", "tot")

_GENERAL = (
    "vandaag", "lekker", "weer", "voetbal", "concert", "koffie", "weekend",
    "muziek", "vakantie", "restaurant", "boek", "film", "leuk", "mooi",
    "zonnig", "regen", "wedstrijd", "nieuws", "feest", "foto", "winkel",
    "markt", "park", "zee", "strand",
)

_SHARED_SLOT_WORDS = {
    "when": (
        "vanmorgen", "vanavond", "vanmiddag", "vannacht", "morgen", "nu",
        "straks", "maandag", "dinsdag", "woensdag", "donderdag", "vrijdag",
        "zaterdag", "zondag", "spitsuur", "7u", "8u", "9u", "17u", "18u",
    ),
    "where": (
        "e40", "e17", "e19", "e313", "e314", "e411", "a12", "r0", "n16",
        "binnenring", "buitenring", "viaduct", "tunnel", "afrit", "oprit",
        "knooppunt", "brug", "kruispunt", "snelweg", "rotonde",
    ),
    "what": (
        "file", "ongeval", "botsing", "wegenwerken", "pechgeval", "controle",
        "betoging", "storing", "brand", "ijzel", "aanrijding", "defect",
        "signalisatie", "evenement", "ladingverlies", "hindernis",
        "wateroverlast", "mist", "sneeuw", "gladheid",
    ),
    "consequence": (
        "vertraging", "filevorming", "omleiding", "afgesloten", "versperd",
        "hinder", "stilstand", "wachttijd", "vertraagd", "dicht",
        "geblokkeerd", "opgelost", "aanschuiven", "stapvoets", "oponthoud",
        "gestremd", "onderbroken", "beperkt", "traag", "vrijgemaakt",
    ),
}

_REGION_SLOT_WORDS = {
    "BRU": {
        "when": ("ochtendspits", "avondspits", "middaguur", "schoolspits",
                 "marktdag", "koopzondag", "werkdag", "topdag"),
        "where": ("wetstraat", "koekelberg", "reyers", "montgomery", "schuman",
                  "anderlecht", "molenbeek", "vilvoorde", "zaventem",
                  "tervuren", "basiliek", "meiser"),
        "what": ("eurotop", "staatsbezoek", "tunnelsluiting", "zomerkermis",
                 "stoet", "wielerkoers", "straatfeest", "filmopname"),
        "consequence": ("tunneldosering", "pendelhinder", "metroadvies",
                        "parkeerverbod", "knip", "doseerlicht", "sluipverkeer",
                        "omrijden"),
    },
    "BE": {
        "when": ("nieuwjaar", "paasmaandag", "zomerspits", "bouwverlof",
                 "weekenddienst", "nachtwerk", "ochtenduur", "avonduur"),
        "where": ("gent", "antwerpen", "luik", "brugge", "hasselt", "leuven",
                  "namen", "kortrijk", "mechelen", "aalst", "oostende",
                  "genk"),
        "what": ("kettingbotsing", "zoutactie", "bermbrand", "oliespoor",
                 "spookrijder", "dierenoversteek", "stormschade", "treinstaking"),
        "consequence": ("bergingswerk", "wegdekherstel", "rijstrookverlies",
                        "snelheidsbeperking", "inhaalverbod", "afgekoppeld",
                        "vertramd", "uitgeweken"),
    },
}

# continuation words inside a span, distinct per type and never span heads
_SPAN_TAILS = {
    "when": ("vroeg", "laat"),
    "where": ("centrum", "buiten"),
    "what": ("zwaar", "licht"),
    "consequence": ("beide", "richtingen"),
}

# fraction of traffic tweets carrying each slot type
_SLOT_RATES = {"where": 0.98, "what": 0.95, "when": 0.95, "consequence": 0.73}


@dataclass(frozen=True)
class GeneratorConfig:
    size: int
    traffic_fraction: float = 0.5
    region: str = "BRU"  # BRU | BE
    shared_vocab_fraction: float = 0.7
    pool_size: int = 20
    name: str | None = None

    def __post_init__(self):
        if self.size < 1:
            raise CorpusError(f"corpus size must be >= 1, got {self.size}")
        if not 0.0 <= self.traffic_fraction <= 1.0:
            raise CorpusError(f"traffic_fraction outside [0, 1]: {self.traffic_fraction}")
        if not 0.0 <= self.shared_vocab_fraction <= 1.0:
            raise CorpusError(
                f"shared_vocab_fraction outside [0, 1]: {self.shared_vocab_fraction}"
            )
        if self.region not in _REGION_SLOT_WORDS:
            raise CorpusError(f"unknown region {self.region!r} (expected BRU or BE)")
        if self.pool_size < 1:
            raise CorpusError(f"pool_size must be >= 1, got {self.pool_size}")


def _take(words: Sequence[str], n: int, pad_stem: str) -> list[str]:
    out = list(words[:n])
    i = 0
    while len(out) < n:
        out.append(f"{pad_stem}{i}")
        i += 1
    return out


def build_slot_pools(config: GeneratorConfig) -> dict[str, tuple[str, ...]]:
    """Per-slot head-word pools for one region.

    Each pool holds ``pool_size`` words, of which
    ``round(shared_vocab_fraction * pool_size)`` come from the region-agnostic
    list; the rest are region-specific. Two regions with the same config thus
    share exactly that fraction of every pool.
    """
    n_shared = min(round(config.shared_vocab_fraction * config.pool_size), config.pool_size)
    n_region = config.pool_size - n_shared
    region = config.region
    pools = {}
    for slot in SLOT_TYPES:
        shared = _take(_SHARED_SLOT_WORDS[slot], n_shared, f"{slot}x")
        extra = _take(_REGION_SLOT_WORDS[region][slot], n_region, f"{slot}{region.lower()}")
        pools[slot] = tuple(shared + extra)
    return pools


def _traffic_sentence(rng: random.Random, pools: dict[str, tuple[str, ...]]):
    present = [slot for slot in SLOT_TYPES if rng.random() < _SLOT_RATES[slot]]
    if not present:
        present = ["what"]
    rng.shuffle(present)
    tokens: list[str] = []
    for _ in range(rng.randint(0, 2)):
        tokens.append(rng.choice(_FILLER))
    spans: list[SlotSpan] = []
    for slot in present:
        length = rng.choices((1, 2, 3), weights=(5, 3, 2))[0]
        words = [rng.choice(pools[slot])]
        if length > 1:
            words.extend(rng.sample(_SPAN_TAILS[slot], length - 1))
        spans.append(SlotSpan(slot, len(tokens), len(tokens) + len(words)))
        tokens.extend(words)
        for _ in range(rng.randint(0, 2)):
            tokens.append(rng.choice(_FILLER))
    return tokens, tuple(spans)


def _non_traffic_sentence(rng: random.Random) -> list[str]:
    return [
        rng.choice(_FILLER) if rng.random() < 0.3 else rng.choice(_GENERAL)
        for _ in range(rng.randint(4, 12))
    ]


def generate_synthetic(config: GeneratorConfig, seed: int) -> Corpus:
    """Deterministic template corpus with exact gold labels and spans.

    Exactly ``round(size * traffic_fraction)`` tweets are traffic-class, in a
    seed-shuffled order. Identical (config, seed) pairs yield byte-identical
    corpora.
    """
    rng = random.Random(seed)
    pools = build_slot_pools(config)
    n_traffic = round(config.size * config.traffic_fraction)
    labels = [TRAFFIC] * n_traffic + [NON_TRAFFIC] * (config.size - n_traffic)
    rng.shuffle(labels)
    prefix = config.region.lower()
    tweets = []
    for i, label in enumerate(labels):
        if label == TRAFFIC:
            tokens, spans = _traffic_sentence(rng, pools)
        else:
            tokens, spans = _non_traffic_sentence(rng), ()
        tweets.append(
            Tweet(
                id=f"{prefix}-{i:05d}",
                raw_text=" ".join(tokens),
                tokens=tuple(tokens),
                class_label=label,
                spans=spans,
            )
        )
    name = config.name or f"synthetic-{prefix}"
    return Corpus(name=name, tweets=tuple(tweets), provenance="synthetic")


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------

FORMATS = ("jsonl", "conll")


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in FORMATS:
            raise CorpusError(f"unknown corpus format {fmt!r}")
        return fmt
    suffix = path.suffix.lstrip(".").lower()
    if suffix in FORMATS:
        return suffix
    raise CorpusError(f"cannot infer corpus format from {path.name!r}; pass format=")


def save_corpus(corpus: Corpus, path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if fmt == "jsonl":
        text = "".join(_tweet_to_jsonl_line(t) for t in corpus)
    else:
        text = "".join(_tweet_to_conll_block(t) for t in corpus)
    path.write_text(text, encoding="utf-8", newline="\n")


def load_corpus(path: str | Path, fmt: str | None = None, strict: bool = False) -> Corpus:
    """Load a corpus file.

    In strict mode a conll tag sequence that breaks the BIO rule (an I- tag
    without a same-type B-/I- predecessor) is an error; the default lenient
    mode repairs it by starting a new span there.
    """
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    lines = path.read_text(encoding="utf-8").split("\n")
    tweets = _parse_jsonl(lines) if fmt == "jsonl" else _parse_conll(lines, strict)
    return Corpus(name=path.stem, tweets=tuple(tweets), provenance="loaded")


def _tweet_to_jsonl_line(tweet: Tweet) -> str:
    record = {
        "id": tweet.id,
        "text": tweet.raw_text,
        "tokens": list(tweet.tokens),
        "label": tweet.class_label,
        "spans": [
            {"type": s.slot_type, "start": s.start, "end": s.end} for s in tweet.spans
        ],
    }
    return json.dumps(record, ensure_ascii=False) + "\n"


def _parse_jsonl(lines: list[str]) -> list[Tweet]:
    tweets = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"invalid JSON ({exc.msg})", lineno) from exc
        try:
            missing = [k for k in ("id", "text", "tokens", "label", "spans") if k not in record]
            if missing:
                raise CorpusError(f"missing fields {missing}")
            spans = tuple(
                SlotSpan(s["type"], int(s["start"]), int(s["end"])) for s in record["spans"]
            )
            tweets.append(
                Tweet(
                    id=str(record["id"]),
                    raw_text=str(record["text"]),
                    tokens=tuple(str(t) for t in record["tokens"]),
                    class_label=record["label"],
                    spans=spans,
                )
            )
        except (CorpusError, KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(str(exc), lineno) from exc
    return tweets


def _tweet_to_conll_block(tweet: Tweet) -> str:
    from . import bio  # deferred: bio depends on this module's types

    for tok in tweet.tokens:
        if not tok or any(ch in tok for ch in "\t\n\r"):
            raise CorpusError(
                f"tweet {tweet.id}: token {tok!r} cannot be written in conll format"
            )
    tags = bio.encode_spans(len(tweet.tokens), tweet.spans)
    rows = "".join(f"{tok}\t{tag}\n" for tok, tag in zip(tweet.tokens, tags))
    return f"# label={tweet.class_label}\n{rows}\n"


def _parse_conll(lines: list[str], strict: bool) -> list[Tweet]:
    from . import bio

    tweets: list[Tweet] = []
    tokens: list[str] = []
    tags: list[str] = []
    label: str | None = None
    header_line = 0

    def flush(end_line: int) -> None:
        nonlocal tokens, tags, label
        if label is None and not tokens:
            return
        if label is None:
            raise CorpusFormatError("sentence without a '# label=' header", header_line)
        if not tokens:
            raise CorpusFormatError("sentence header without tokens", header_line)
        if strict:
            violations = bio.validate(tags)
            if violations:
                idx, desc = violations[0]
                raise CorpusFormatError(
                    f"invalid tag sequence ({desc} at token {idx})", header_line + 1 + idx
                )
        spans = tuple(bio.decode_tags(tags))
        try:
            tweets.append(
                Tweet(
                    id=f"s{len(tweets):05d}",
                    raw_text=" ".join(tokens),
                    tokens=tuple(tokens),
                    class_label=label,
                    spans=spans,
                )
            )
        except CorpusError as exc:
            raise CorpusFormatError(str(exc), header_line) from exc
        tokens, tags, label = [], [], None

    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            flush(lineno)
            continue
        if line.startswith("# label="):
            if label is not None or tokens:
                flush(lineno)
            label = line[len("# label=") :].strip()
            header_line = lineno
            continue
        if "\t" not in line:
            raise CorpusFormatError(f"expected 'token<TAB>tag', got {line!r}", lineno)
        token, tag = line.split("\t", 1)
        if not token:
            raise CorpusFormatError("empty token field", lineno)
        tag = tag.strip()
        if tag not in bio.TAGS:
            raise CorpusFormatError(f"unknown tag {tag!r}", lineno)
        if label is None:
            raise CorpusFormatError("token line before any '# label=' header", lineno)
        tokens.append(token)
        tags.append(tag)
    flush(len(lines) + 1)
    return tweets
