"""Tweet text normalization pipeline.

Stages run in a fixed order: HTML stripping, @user-run truncation,
contraction expansion, hashtag segmentation, emoticon/emoji replacement,
accent folding, whitespace collapse.  All stages are pure functions over
an immutable :class:`NormalizerConfig`; the tables live in TSV files so
they stay auditable and swappable.
"""

from __future__ import annotations

import html
import math
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError

# Contractions written without an apostrophe that we still allow as table keys.
APOSTROPHELESS = frozenset({
    "cant", "wont", "dont", "didnt", "doesnt", "isnt", "arent", "wasnt",
    "werent", "aint", "shouldnt", "couldnt", "wouldnt", "havent", "hasnt",
    "hadnt", "gonna", "gotta", "wanna", "gimme", "lemme", "im", "ive",
    "youre", "theyre", "hes", "shes", "whats", "thats", "cannot",
})

_TAG_RE = re.compile(r"<[^>]*>")
_WS_RE = re.compile(r"\s+")
_APOSTROPHES = ("’", "ʼ", "`")


@dataclass(frozen=True)
class NormalizerConfig:
    """Rule tables for the normalization pipeline."""

    contraction_table: dict[str, str]
    emoji_table: dict[str, str]
    hashtag_lexicon: dict[str, int]
    max_user_run: int = 3
    # emoji keys pre-sorted longest first so leftmost-longest matching is O(keys)
    _emoji_keys: tuple[str, ...] = field(init=False, repr=False, default=())

    def __post_init__(self):
        for key, expansion in self.contraction_table.items():
            if "'" not in key and key.lower() not in APOSTROPHELESS:
                raise ConfigError(f"contraction key without apostrophe: {key!r}")
            if " " not in expansion:
                raise ConfigError(f"contraction expansion not multi-word: {key!r} -> {expansion!r}")
        for word, count in self.hashtag_lexicon.items():
            if count <= 0:
                raise ConfigError(f"non-positive lexicon count for {word!r}: {count}")
        if self.max_user_run < 1:
            raise ConfigError(f"max_user_run must be >= 1, got {self.max_user_run}")
        object.__setattr__(
            self, "_emoji_keys",
            tuple(sorted(self.emoji_table, key=len, reverse=True)),
        )

    @classmethod
    def default(cls) -> "NormalizerConfig":
        """Config backed by the TSV tables shipped with the package."""
        data = resources.files("offlang") / "data"
        return cls(
            contraction_table=load_table(data / "contractions.tsv"),
            emoji_table=load_table(data / "emoticons.tsv"),
            hashtag_lexicon=load_lexicon(data / "hashtag_lexicon.tsv"),
        )


@dataclass(frozen=True)
class NormalizedTweet:
    id: int
    text: str


def load_table(path) -> dict[str, str]:
    """Load a two-column TSV (key<TAB>value); '#'-prefixed lines are comments.

    Accepts filesystem paths or importlib.resources traversables.
    """
    table: dict[str, str] = {}
    if isinstance(path, (str, Path)):
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = path.read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ConfigError(f"line {lineno}: expected 2 tab-separated columns, got {len(parts)}")
        table[parts[0]] = parts[1]
    return table


def load_lexicon(path) -> dict[str, int]:
    """Load a word<TAB>count TSV with strictly positive decimal counts."""
    lexicon: dict[str, int] = {}
    for word, count in load_table(path).items():
        try:
            n = int(count)
        except ValueError:
            raise ConfigError(f"lexicon count for {word!r} is not an integer: {count!r}") from None
        if n <= 0:
            raise ConfigError(f"lexicon count for {word!r} must be positive: {n}")
        lexicon[word.lower()] = n
    return lexicon


def strip_html(text: str) -> str:
    """Drop <...> tag spans and decode entity references.

    Entities are decoded before tag removal so "&lt;b&gt;" cannot survive
    as a literal tag; the pass is repeated until the text is stable, which
    makes the function idempotent even on doubly-encoded input.
    """
    while True:
        stripped = _TAG_RE.sub("", html.unescape(text))
        if stripped == text:
            return text
        text = stripped


def expand_contractions(text: str, table: dict[str, str]) -> str:
    """Replace whitespace tokens whose lowercase form is a table key.

    Curly apostrophes are treated as ASCII ones for lookup.  The expansion
    keeps the casing of the token's first character.
    """
    out = []
    for token in re.split(r"(\s+)", text):
        if not token or token.isspace():
            out.append(token)
            continue
        key = token.lower()
        for curly in _APOSTROPHES:
            key = key.replace(curly, "'")
        expansion = table.get(key)
        if expansion is None:
            out.append(token)
            continue
        if token[0].isupper():
            expansion = expansion[0].upper() + expansion[1:]
        out.append(expansion)
    return "".join(out)


def split_hashtag(tag: str, lexicon: dict[str, int]) -> list[str]:
    """Segment a hashtag body into lexicon words.

    Dynamic-programming word break maximizing the sum of log-frequencies.
    When no full segmentation exists, falls back to greedy longest-prefix
    matching with unknown spans kept as single tokens.  The concatenation
    of the result always equals the lowercased input.
    """
    body = tag.lower()
    n = len(body)
    if n == 0:
        raise ValueError("empty hashtag body")
    max_word = max((len(w) for w in lexicon), default=0)

    # dp[i]: best (score, start) covering body[:i] with lexicon words only
    NEG = float("-inf")
    score = [NEG] * (n + 1)
    back = [-1] * (n + 1)
    score[0] = 0.0
    for end in range(1, n + 1):
        for start in range(max(0, end - max_word), end):
            if score[start] == NEG:
                continue
            word = body[start:end]
            freq = lexicon.get(word)
            if freq is None:
                continue
            cand = score[start] + math.log(freq)
            if cand > score[end]:
                score[end] = cand
                back[end] = start
    if score[n] > NEG:
        tokens = []
        end = n
        while end > 0:
            start = back[end]
            tokens.append(body[start:end])
            end = start
        return tokens[::-1]

    # greedy fallback: longest lexicon prefix, unknown residues as single tokens
    tokens = []
    pos = 0
    while pos < n:
        best = 0
        for length in range(min(max_word, n - pos), 0, -1):
            if body[pos:pos + length] in lexicon:
                best = length
                break
        if best:
            tokens.append(body[pos:pos + best])
            pos += best
        else:
            nxt = pos + 1
            while nxt < n and not any(
                body[nxt:nxt + k] in lexicon for k in range(1, min(max_word, n - nxt) + 1)
            ):
                nxt += 1
            tokens.append(body[pos:nxt])
            pos = nxt
    return tokens


def replace_emojis(text: str, table: dict[str, str]) -> str:
    """Substitute emoticon/emoji literals with their word replacements.

    Leftmost-longest matching; replacements are space-separated from any
    adjacent non-space characters.
    """
    keys = sorted(table, key=len, reverse=True)
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        match = next((k for k in keys if text.startswith(k, i)), None)
        if match is None:
            out.append(text[i])
            i += 1
            continue
        replacement = table[match]
        if replacement:
            if out and out[-1] and not out[-1][-1].isspace():
                out.append(" ")
            out.append(replacement)
            i += len(match)
            if i < n and not text[i].isspace():
                out.append(" ")
        else:
            i += len(match)
    return "".join(out)


def fold_accents(text: str) -> str:
    """NFKD-decompose and drop combining marks (café -> cafe)."""
    return "".join(
        ch for ch in unicodedata.normalize("NFKD", text) if not unicodedata.combining(ch)
    )


def collapse_user_runs(text: str, max_run: int) -> str:
    """Truncate runs of more than max_run consecutive "@user" tokens."""
    if max_run < 1:
        raise ConfigError(f"max_run must be >= 1, got {max_run}")
    parts = re.split(r"(\s+)", text)
    out: list[str] = []
    run = 0
    pending_sep = ""
    for part in parts:
        if part == "":
            continue
        if part.isspace():
            pending_sep = part
            continue
        if part.lower() == "@user":
            run += 1
            if run > max_run:
                pending_sep = ""  # drop the token and the separator before it
                continue
        else:
            run = 0
        out.append(pending_sep)
        pending_sep = ""
        out.append(part)
    out.append(pending_sep)
    return "".join(out)


def _split_hashtags_in_text(text: str, lexicon: dict[str, int]) -> str:
    """Replace every #body span with its segmentation; no '#' survives."""
    out_tokens = []
    for token in text.split(" "):
        if "#" not in token:
            out_tokens.append(token)
            continue
        pieces = []
        for j, segment in enumerate(token.split("#")):
            if not segment:
                continue
            if j == 0:
                pieces.append(segment)  # text before the first '#'
            else:
                pieces.append(" ".join(split_hashtag(segment, lexicon)))
        out_tokens.append(" ".join(pieces))
    return " ".join(out_tokens)


def normalize_text(text: str, config: NormalizerConfig) -> str:
    """Run the full pipeline over raw tweet text."""
    text = strip_html(text)
    text = collapse_user_runs(text, config.max_user_run)
    text = expand_contractions(text, config.contraction_table)
    text = _split_hashtags_in_text(text, config.hashtag_lexicon)
    text = replace_emojis(text, config.emoji_table)
    text = fold_accents(text)
    return _WS_RE.sub(" ", text).strip()


def normalize(tweet_id: int, text: str, config: NormalizerConfig) -> NormalizedTweet:
    return NormalizedTweet(id=tweet_id, text=normalize_text(text, config))
