"""Seeded synthetic corpus + event series generator for verification.

Planted clusters consist of synonym tokens that each carry a weak share
of the event signal (Poisson background plus magnitude/synonyms on event
days), so any single member correlates weakly with the events while the
cluster sum correlates strongly. Background tokens are pure Poisson
noise. Tokens are spelled so the normalization pipeline leaves them
untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Optional

import numpy as np

from .ingest import Timeframe, write_gsr

DEFAULT_START = date(2021, 1, 1)

# Filler words are all bundled stopwords, so a generated tweet cleans
# down to exactly its payload token.
_TEMPLATES = (
    "it was the {token} of them all",
    "so very {token} again",
    "my {token} is here now",
    "the {token} was there too",
    "more {token} than before",
)


@dataclass(frozen=True)
class SyntheticSpec:
    days: int = 120
    background_features: int = 150
    background_rate: float = 2.0
    clusters: int = 4
    synonyms: int = 5
    event_day_count: int = 10
    event_days: Optional[tuple[int, ...]] = None
    spike: float = 12.0
    seed: int = 7

    def __post_init__(self):
        if self.days < 2:
            raise ValueError("need at least two days")
        if self.event_days is not None:
            if any(not 0 <= d < self.days for d in self.event_days):
                raise ValueError("event days must lie inside [0, days)")
        elif not 0 <= self.event_day_count <= self.days:
            raise ValueError("event day count must lie in [0, days]")
        # spike 0 is the documented degenerate case (planted members become
        # indistinguishable from background); anything in between is noise.
        if self.spike != 0 and self.spike <= self.background_rate:
            raise ValueError("spike magnitude must exceed the background rate (or be 0)")
        if self.clusters > 0 and self.synonyms < 1:
            raise ValueError("planted clusters need at least one synonym")


def _letters(value: int) -> str:
    out = chr(ord("a") + value % 26)
    value //= 26
    while value:
        out = chr(ord("a") + value % 26) + out
        value //= 26
    return out


def planted_token(cluster: int, synonym: int) -> str:
    """Synonym token name; inert under cleaning, lemmas, and stemming."""
    return f"zq{_letters(cluster)}{_letters(synonym)}x"


def background_token(index: int) -> str:
    return f"mk{_letters(index)}x"


@dataclass
class SynthResult:
    timeframe: Timeframe
    event_days: tuple[int, ...]
    planted: list[list[str]]
    background: list[str]
    corpus_path: Path
    gsr_path: Path

    def meta(self) -> dict:
        return {
            "start": self.timeframe.start.isoformat(),
            "days": self.timeframe.days,
            "event_days": list(self.event_days),
            "planted": self.planted,
            "background": self.background,
        }


def generate_synthetic(
    spec: SyntheticSpec,
    corpus_path: Path,
    gsr_path: Path,
    start: date = DEFAULT_START,
) -> SynthResult:
    """Write a corpus JSONL and event-series CSV for the given spec.

    The event series carries `spike` events on each event day and zero
    elsewhere. Every token occurrence becomes one tweet line wrapped in
    stopword filler.
    """
    rng = np.random.default_rng(spec.seed)
    timeframe = Timeframe(start=start, days=spec.days)

    if spec.event_days is not None:
        event_days = tuple(sorted(spec.event_days))
    else:
        chosen = rng.choice(spec.days, size=spec.event_day_count, replace=False)
        event_days = tuple(sorted(int(d) for d in chosen))
    event_set = set(event_days)

    planted = [
        [planted_token(c, s) for s in range(spec.synonyms)]
        for c in range(spec.clusters)
    ]
    background = [background_token(i) for i in range(spec.background_features)]

    per_event_boost = spec.spike / spec.synonyms if spec.synonyms else 0.0
    corpus_path = Path(corpus_path)
    gsr_path = Path(gsr_path)
    with open(corpus_path, "w", encoding="utf-8", newline="\n") as fh:
        for day in range(spec.days):
            is_event = day in event_set
            day_tokens: list[str] = []
            for tokens in planted:
                lam = spec.background_rate + (per_event_boost if is_event else 0.0)
                for token in tokens:
                    day_tokens.extend([token] * int(rng.poisson(lam)))
            for token in background:
                day_tokens.extend([token] * int(rng.poisson(spec.background_rate)))
            stamp_base = timeframe.date_of(day).isoformat()
            for i, token in enumerate(day_tokens):
                template = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))]
                record = {
                    "text": template.format(token=token),
                    "ts": f"{stamp_base}T{i % 24:02d}:{(i * 7) % 60:02d}:00Z",
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    gsr = np.zeros(spec.days, dtype=np.int64)
    for day in event_days:
        gsr[day] = int(round(spec.spike))
    write_gsr(gsr, timeframe, gsr_path)

    return SynthResult(
        timeframe=timeframe,
        event_days=event_days,
        planted=planted,
        background=background,
        corpus_path=corpus_path,
        gsr_path=gsr_path,
    )
