"""Utterance transfer: turn annotated seed utterances from other task
domains into slotted shopping templates and realized utterances.

Five stages: redundant-phrase removal (rule syntax filter), slotification
from the seed annotations, keyword mapping into the shopping domain, slot
filling from a dialog act, and paraphrasing (lexical fallback or a remote
HTTP engine).
"""

from __future__ import annotations

import json
import logging
import os
import random
import re
from dataclasses import dataclass, field

from .acts import DialogAct
from .state import ORDINALS
from .text import tokenize

log = logging.getLogger(__name__)

# slots always permitted besides schema attribute names
BUILTIN_SLOTS = ("description", "index", "attribute")


class TransferError(ValueError):
    pass


@dataclass(frozen=True)
class SeedUtterance:
    """An annotated utterance from a source dialog corpus."""

    text: str
    intent: str
    # (start, end, slot_name) character spans; text[start:end] is the surface value
    value_spans: tuple[tuple[int, int, str], ...] = ()
    source_domain: str = ""

    def __post_init__(self):
        spans = sorted(self.value_spans)
        last_end = 0
        for start, end, slot in spans:
            if start < last_end:
                raise TransferError(f"overlapping spans in {self.text!r}")
            if not (0 <= start < end <= len(self.text)):
                raise TransferError(f"span out of bounds in {self.text!r}")
            last_end = end


@dataclass(frozen=True)
class UtteranceTemplate:
    """Literal tokens interleaved with <slot> placeholders."""

    tokens: tuple[str, ...]
    intent: str

    def __post_init__(self):
        if not self.tokens:
            raise TransferError("empty template")

    def slots(self) -> list[str]:
        return [t[1:-1] for t in self.tokens if t.startswith("<") and t.endswith(">")]


@dataclass
class KeywordLexicon:
    """source token -> shopping-domain token, split into verb and noun maps."""

    verbs: dict[str, str] = field(default_factory=dict)
    nouns: dict[str, str] = field(default_factory=dict)

    def get(self, token: str) -> str | None:
        key = token.lower()
        return self.verbs.get(key) or self.nouns.get(key)

    @classmethod
    def load(cls, path: str) -> "KeywordLexicon":
        """Tab-separated lines: kind(source, target) with kind in {verb, noun}."""
        lex = cls()
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) == 3:
                    kind, src, dst = parts
                else:
                    kind, (src, dst) = "noun", parts
                target = lex.verbs if kind == "verb" else lex.nouns
                target[src.lower()] = dst
        return lex


# -- stage 1: redundant phrase removal ----------------------------------------

DEFAULT_PREPOSITIONS = ("at", "in", "near", "around", "by")
DEFAULT_LOCATION_TIME_NOUNS = (
    "tonight", "today", "tomorrow", "yesterday", "noon", "evening", "morning",
    "afternoon", "weekend", "downtown", "amc", "cinema", "theater", "theatre",
    "mall", "station", "city", "town", "pm", "am", "friday", "saturday",
    "sunday", "monday", "tuesday", "wednesday", "thursday",
)


class RuleSyntaxFilter:
    """Rule approximation of parse-tree pruning: drops prepositional chunks
    headed by a configured preposition whose object is a location/time noun,
    and bare time expressions."""

    def __init__(self, prepositions=DEFAULT_PREPOSITIONS, nouns=DEFAULT_LOCATION_TIME_NOUNS):
        self.prepositions = set(prepositions)
        self.nouns = set(nouns)

    def flagged_spans(self, tokens: list[str]) -> set[int]:
        """Indices of tokens to drop."""
        drop: set[int] = set()
        i = 0
        while i < len(tokens):
            tok = tokens[i].lower()
            if tok in self.prepositions:
                # consume the chunk up to and including a location/time object
                j = i + 1
                while j < len(tokens) and j - i <= 3:
                    if tokens[j].lower() in self.nouns:
                        drop.update(range(i, j + 1))
                        i = j
                        break
                    j += 1
            elif tok in self.nouns:
                drop.add(i)
            i += 1
        return drop


def strip_redundant(text: str, syntax_filter: RuleSyntaxFilter | None = None) -> tuple[str, bool]:
    """Remove location/time modifier chunks. Returns (text, emptied_warning)."""
    if not text:
        raise TransferError("empty text")
    if syntax_filter is None:
        syntax_filter = RuleSyntaxFilter()
    tokens = text.split()
    drop = syntax_filter.flagged_spans(tokens)
    kept = [t for i, t in enumerate(tokens) if i not in drop]
    result = " ".join(kept)
    if not kept:
        log.warning("syntax filter removed the entire utterance: %r", text)
        return "", True
    return result, False


# -- stage 2: slotification ----------------------------------------------------

def slotify(seed: SeedUtterance) -> UtteranceTemplate:
    """Replace each annotated value span by its slot placeholder."""
    spans = sorted(seed.value_spans)
    tokens: list[str] = []
    cursor = 0
    for start, end, slot in spans:
        tokens.extend(seed.text[cursor:start].split())
        tokens.append(f"<{slot}>")
        cursor = end
    tokens.extend(seed.text[cursor:].split())
    return UtteranceTemplate(tokens=tuple(tokens), intent=seed.intent)


# -- stage 3: keyword replacement ------------------------------------------------

def map_keywords(template: UtteranceTemplate, lexicon: KeywordLexicon) -> UtteranceTemplate:
    """Swap source-domain verbs/nouns for shopping ones; slots are untouched."""
    out = []
    for tok in template.tokens:
        if tok.startswith("<") and tok.endswith(">"):
            out.append(tok)
        else:
            out.append(lexicon.get(tok) or tok)
    return UtteranceTemplate(tokens=tuple(out), intent=template.intent)


# -- stage 4: slot filling --------------------------------------------------------

def _index_surface(n: int) -> str:
    if 1 <= n <= len(ORDINALS):
        return ORDINALS[n - 1]
    return str(n)


def instantiate(template: UtteranceTemplate, act: DialogAct) -> str:
    """Fill template slots from the act's parameters.

    Attribute slots take the act's value for that attribute (hyphens become
    spaces in surface form), <index> renders as an ordinal word, and
    <attribute> renders the asked attribute's name.
    """
    out = []
    for tok in template.tokens:
        if not (tok.startswith("<") and tok.endswith(">")):
            out.append(tok)
            continue
        slot = tok[1:-1]
        if slot == "index":
            if "index" not in act.params:
                raise TransferError("act provides no value for slot <index>")
            out.append(_index_surface(int(act.params["index"])))
        elif slot == "attribute":
            if "attribute" not in act.params:
                raise TransferError("act provides no value for slot <attribute>")
            out.append(str(act.params["attribute"]).replace("_", " "))
        else:
            if slot not in act.params:
                raise TransferError(f"act provides no value for slot <{slot}>")
            val = act.params[slot]
            if isinstance(val, (list, tuple)):
                val = val[0]
            out.append(str(val).replace("-", " "))
    return " ".join(out)


# -- stage 5: paraphrase ------------------------------------------------------------

class Paraphraser:
    """Interface: produce a meaning-preserving variant of an utterance."""

    def paraphrase(self, text: str) -> str:  # pragma: no cover - interface
        raise NotImplementedError


class IdentityParaphraser(Paraphraser):
    def paraphrase(self, text: str) -> str:
        return text


class LexicalParaphraser(Paraphraser):
    """Fallback engine: seeded synonym substitution plus optional clause
    reordering of a leading politeness marker."""

    POLITENESS = ("please", "kindly")

    def __init__(self, synonyms: dict[str, str] | None = None, seed: int = 0,
                 swap_prob: float = 1.0):
        self.synonyms = {k.lower(): v for k, v in (synonyms or {}).items()}
        self.rng = random.Random(seed)
        self.swap_prob = swap_prob

    def paraphrase(self, text: str) -> str:
        words = text.split()
        out = []
        for w in words:
            key = w.lower().strip(".,!?")
            if key in self.synonyms and self.rng.random() < self.swap_prob:
                out.append(self.synonyms[key])
            else:
                out.append(w)
        if out and out[0].lower() in self.POLITENESS and self.rng.random() < 0.5:
            out = out[1:] + [out[0].lower()]
        return " ".join(out)


class RemoteParaphraser(Paraphraser):
    """Calls an external paraphrase service; identity on any failure."""

    def __init__(self, endpoint: str | None = None, timeout: float = 5.0):
        self.endpoint = endpoint or os.environ.get("PARAPHRASE_ENDPOINT", "")
        self.timeout = timeout

    def paraphrase(self, text: str) -> str:
        if not self.endpoint:
            return text
        try:
            import httpx

            resp = httpx.post(self.endpoint, json={"text": text}, timeout=self.timeout)
            resp.raise_for_status()
            return str(resp.json().get("text", text))
        except Exception as exc:  # noqa: BLE001 - never abort generation
            log.warning("paraphrase service failed (%s); keeping original", exc)
            return text


def paraphrase(utterance: str, engine: Paraphraser,
               required_values: list[str] | None = None,
               stats: dict | None = None) -> str:
    """Apply the engine, keeping the original if any required value is lost."""
    result = engine.paraphrase(utterance)
    for val in required_values or []:
        surface = str(val).replace("-", " ").lower()
        if surface and surface not in result.lower():
            if stats is not None:
                stats["value_loss"] = stats.get("value_loss", 0) + 1
            return utterance
    return result


# -- pipeline & file formats -----------------------------------------------------

def load_seeds(path: str) -> list[SeedUtterance]:
    """Line-delimited JSON: {text, intent, spans: [[start, end, slot]], domain}."""
    seeds = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                seeds.append(
                    SeedUtterance(
                        text=rec["text"],
                        intent=rec["intent"],
                        value_spans=tuple(tuple(s) for s in rec.get("spans", [])),
                        source_domain=rec.get("domain", ""),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise TransferError(f"{path}:{lineno}: bad seed record: {exc}") from exc
    return seeds


def build_templates(
    seeds: list[SeedUtterance],
    lexicon: KeywordLexicon,
    use_syntax_filter: bool = True,
    syntax_filter: RuleSyntaxFilter | None = None,
) -> list[UtteranceTemplate]:
    """Stages 1-3 over a seed corpus."""
    templates = []
    for seed in seeds:
        text = seed.text
        spans = seed.value_spans
        if use_syntax_filter:
            stripped, emptied = strip_redundant(text, syntax_filter)
            if emptied:
                continue
            # spans survive only if the stripped text still contains them verbatim
            if all(seed.text[s:e] in stripped for s, e, _ in spans):
                new_spans = []
                for s, e, slot in spans:
                    surf = seed.text[s:e]
                    idx = stripped.find(surf)
                    new_spans.append((idx, idx + len(surf), slot))
                seed = SeedUtterance(stripped, seed.intent, tuple(new_spans), seed.source_domain)
            else:
                continue
        tpl = slotify(seed)
        templates.append(map_keywords(tpl, lexicon))
    return templates


def write_templates(templates: list[UtteranceTemplate], path: str) -> None:
    with open(path, "w") as fh:
        for tpl in templates:
            fh.write(json.dumps({"tokens": list(tpl.tokens), "intent": tpl.intent}) + "\n")


def read_templates(path: str) -> list[UtteranceTemplate]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                out.append(UtteranceTemplate(tuple(rec["tokens"]), rec["intent"]))
    return out


def templates_by_intent(templates: list[UtteranceTemplate]) -> dict[str, list[UtteranceTemplate]]:
    bank: dict[str, list[UtteranceTemplate]] = {}
    for tpl in templates:
        bank.setdefault(tpl.intent, []).append(tpl)
    return bank
