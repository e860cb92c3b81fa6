"""Tweet cleaning, token normalization (lemmatize then stem), and
word-form feature extraction (keyword, n-gram, skip-gram, bag-of-words).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Iterable, Optional

KEYWORD = "keyword"
NGRAM = "ngram"
SKIPGRAM = "skipgram"
BOW = "bow"

FORM_KINDS = (KEYWORD, NGRAM, SKIPGRAM, BOW)

_URL_RE = re.compile(r"https?://\S+|www\.\S+", re.IGNORECASE)
_HASHTAG_RE = re.compile(r"#\w+")
_HTML_TAG_RE = re.compile(r"<[^>]*>")
_HTML_ENTITY_RE = re.compile(r"&#?\w+;")
_NON_TOKEN_RE = re.compile(r"[^a-z0-9\s]+")

# Share of non-ASCII-Latin letters above which a hint-less tweet is
# treated as non-English.
NON_LATIN_REJECT_RATIO = 0.2


@dataclass(frozen=True, order=True)
class WordForm:
    """A feature shape: which extraction scheme and how many words."""

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in FORM_KINDS:
            raise ValueError(f"unknown word form {self.kind!r}")
        if self.kind == KEYWORD:
            if self.n != 1:
                raise ValueError("keyword form requires n=1")
        elif self.n not in (2, 3):
            raise ValueError(f"{self.kind} form requires n in {{2, 3}}")

    @property
    def ordered(self) -> bool:
        """Whether token order is part of feature identity."""
        return self.kind in (NGRAM, SKIPGRAM)


@dataclass(frozen=True, order=True)
class FeatureId:
    """Canonical identity of a textual feature.

    Token tuples are tweet-ordered for n-grams and skip-grams, and
    lexicographically sorted (duplicate-free) for keywords and
    bags-of-words.
    """

    form: WordForm
    tokens: tuple[str, ...]

    def render(self) -> str:
        return f"{self.form.kind}:{self.form.n}:{'+'.join(self.tokens)}"

    @classmethod
    def parse(cls, text: str) -> "FeatureId":
        kind, n, toks = text.split(":", 2)
        return cls(WordForm(kind, int(n)), tuple(toks.split("+")))

    def __str__(self) -> str:
        return self.render()


def load_token_file(path: Path) -> frozenset[str]:
    """Read a one-token-per-line file; '#' lines and blanks are skipped."""
    tokens = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            tokens.add(line)
    return frozenset(tokens)


def load_lemma_file(path: Path) -> dict[str, str]:
    """Read a TSV of inflected<TAB>lemma pairs."""
    lemmas: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        inflected, lemma = line.split("\t")
        lemmas[inflected] = lemma
    return lemmas


def _data_path(name: str) -> Path:
    return Path(str(resources.files("signalmerge").joinpath("data", name)))


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    return load_token_file(_data_path("stopwords.txt"))


@lru_cache(maxsize=1)
def default_lemmas() -> dict[str, str]:
    return load_lemma_file(_data_path("lemmas.tsv"))


def clean_tweet(tweet, stopwords: frozenset[str]) -> Optional[list[str]]:
    """Clean one tweet into a token list, or None when the tweet is rejected.

    Rejection: an explicit language hint other than "en", any URL in the
    text, or (when no hint is present) a non-Latin letter share above
    NON_LATIN_REJECT_RATIO. Kept tweets are stripped of hashtag terms,
    HTML tags/entities, punctuation and non-Latin characters, lowercased,
    split on whitespace, and filtered against the stopword set. "Latin"
    means ASCII letters here.
    """
    text = tweet.text
    if tweet.lang_hint is not None and tweet.lang_hint.lower() != "en":
        return None
    if _URL_RE.search(text):
        return None
    if tweet.lang_hint is None:
        alpha = [c for c in text if c.isalpha()]
        if alpha:
            non_latin = sum(1 for c in alpha if not c.isascii())
            if non_latin / len(alpha) > NON_LATIN_REJECT_RATIO:
                return None
    s = _HASHTAG_RE.sub(" ", text)
    s = _HTML_TAG_RE.sub(" ", s)
    s = _HTML_ENTITY_RE.sub(" ", s)
    # non-Latin letters vanish without splitting the word; everything
    # else outside [a-z0-9] separates tokens
    s = "".join(c for c in s if c.isascii() or not c.isalpha())
    s = _NON_TOKEN_RE.sub(" ", s.lower())
    return [t for t in s.split() if t not in stopwords]


def lemmatize(token: str, lexicon: dict[str, str]) -> str:
    """Map a lowercase token to its lemma; unknown tokens pass through."""
    return lexicon.get(token, token)


class LancasterStemmer:
    """Iterative rule-table suffix stemmer.

    Rules are read from a text file, one per line:
    ``<reversed-ending><*><remove-count><append><flag>`` where ``*`` marks
    intact-only rules and the flag is ``>`` (continue) or ``.`` (stop).
    A rule only applies if the stem it leaves keeps at least two
    characters for vowel-initial words, or at least three characters with
    a vowel (or ``y``) in the second or third position otherwise.
    """

    _RULE_RE = re.compile(r"^([a-z]+)(\*?)(\d)([a-z]*)([>.])$")
    _VOWELS = "aeiouy"

    def __init__(self, rules: Iterable[str]):
        self._index: dict[str, list[tuple[str, bool, int, str, bool]]] = {}
        for raw in rules:
            m = self._RULE_RE.match(raw)
            if m is None:
                raise ValueError(f"invalid stemming rule {raw!r}")
            ending, intact, remove, append, flag = m.groups()
            rule = (ending[::-1], bool(intact), int(remove), append, flag == ".")
            self._index.setdefault(ending[0], []).append(rule)

    @classmethod
    def from_file(cls, path: Path) -> "LancasterStemmer":
        rules = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rules.append(line.split()[0])
        return cls(rules)

    def _acceptable(self, word: str, remove: int) -> bool:
        kept = len(word) - remove
        if word[0] in self._VOWELS:
            return kept >= 2
        if kept < 3:
            return False
        return word[1] in self._VOWELS or word[2] in self._VOWELS

    def stem(self, word: str) -> str:
        intact = word
        while word:
            rules = self._index.get(word[-1])
            if rules is None:
                break
            applied = False
            for ending, intact_only, remove, append, terminal in rules:
                if intact_only and word != intact:
                    continue
                if not word.endswith(ending):
                    continue
                if not self._acceptable(word, remove):
                    continue
                word = word[: len(word) - remove] + append
                if terminal:
                    return word
                applied = True
                break
            if not applied:
                break
        return word


@lru_cache(maxsize=1)
def default_stemmer() -> LancasterStemmer:
    return LancasterStemmer.from_file(_data_path("lancaster_rules.txt"))


def stem_lancaster(token: str) -> str:
    """Stem a lowercase token with the bundled rule table."""
    return default_stemmer().stem(token)


def normalize_tokens(
    tokens: list[str],
    lexicon: Optional[dict[str, str]] = None,
    stemmer: Optional[LancasterStemmer] = None,
) -> list[str]:
    """Lemmatize then stem each cleaned token."""
    if lexicon is None:
        lexicon = default_lemmas()
    if stemmer is None:
        stemmer = default_stemmer()
    return [stemmer.stem(lemmatize(t, lexicon)) for t in tokens]


def extract_features(tokens: list[str], form: WordForm) -> Counter:
    """Enumerate the features of a normalized token list as a multiset.

    Keyword: every token. N-gram: every contiguous window of n tokens.
    Skip-gram: every n-subsequence of distinct positions, tweet order
    kept. Bag-of-words: every unordered n-subset of distinct positions,
    tokens sorted; subsets whose tokens collide after dedup are dropped.
    One feature occurring twice in a tweet counts twice.
    """
    n = form.n
    features: Counter = Counter()
    if len(tokens) < n:
        return features
    if form.kind == KEYWORD:
        for t in tokens:
            features[FeatureId(form, (t,))] += 1
    elif form.kind == NGRAM:
        for i in range(len(tokens) - n + 1):
            features[FeatureId(form, tuple(tokens[i : i + n]))] += 1
    elif form.kind == SKIPGRAM:
        for combo in combinations(tokens, n):
            features[FeatureId(form, combo)] += 1
    else:
        for combo in combinations(tokens, n):
            uniq = tuple(sorted(set(combo)))
            if len(uniq) == n:
                features[FeatureId(form, uniq)] += 1
    return features
