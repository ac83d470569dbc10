"""Dialog state: representation, delimiter serialization, update semantics,
and the rule-based act extractor used as the runtime tracking baseline.

The serialized form follows the grammar

    state  := slot '=' value (',' value)* (';' slot '=' ...)*

with '=', ',' and ';' reserved as delimiter tokens. Value strings are atomic
items of the sequence (a multi-word value like "medium roast" is one item).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .acts import DialogAct, user_act
from .text import tokenize

log = logging.getLogger(__name__)

DELIMITERS = ("=", ",", ";")


class StateParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at item {position})")
        self.position = position


@dataclass
class DialogState:
    """Ordered attribute -> values map, first-mention order preserved."""

    slots: dict[str, list[str]] = field(default_factory=dict)

    def copy(self) -> "DialogState":
        return DialogState({k: list(v) for k, v in self.slots.items()})

    def __eq__(self, other):
        return isinstance(other, DialogState) and self.slots == other.slots

    def __bool__(self):
        return bool(self.slots)


def serialize_state(state: DialogState) -> list[str]:
    tokens: list[str] = []
    for attr, values in state.slots.items():
        if not values or any(not v for v in values):
            raise ValueError(f"attribute {attr!r} has an empty value")
        if tokens:
            tokens.append(";")
        tokens.append(attr)
        tokens.append("=")
        for i, val in enumerate(values):
            if i:
                tokens.append(",")
            tokens.append(val)
    return tokens


def state_to_string(state: DialogState) -> str:
    return " ".join(serialize_state(state))


def deserialize_state(tokens: list[str]) -> DialogState:
    slots: dict[str, list[str]] = {}
    i, n = 0, len(tokens)
    while i < n:
        if tokens[i] in DELIMITERS:
            raise StateParseError(f"expected slot name, got {tokens[i]!r}", i)
        attr = tokens[i]
        if i + 1 >= n or tokens[i + 1] != "=":
            raise StateParseError("expected '=' after slot name", i + 1)
        i += 2
        values = []
        while True:
            if i >= n or tokens[i] in DELIMITERS:
                raise StateParseError("expected a value", i)
            values.append(tokens[i])
            i += 1
            if i < n and tokens[i] == ",":
                i += 1
                continue
            break
        if attr in slots:
            raise StateParseError(f"duplicate slot {attr!r}", i)
        slots[attr] = values
        if i < n:
            if tokens[i] != ";":
                raise StateParseError(f"expected ';', got {tokens[i]!r}", i)
            i += 1
            if i >= n:
                raise StateParseError("trailing ';'", i)
    return DialogState(slots)


def state_from_string(text: str) -> DialogState:
    if not text.strip():
        return DialogState()
    # values may contain spaces; split on the delimiters themselves
    parts = [p.strip() for p in re.split(r"\s*([=,;])\s*", text.strip())]
    return deserialize_state([p for p in parts if p])


def update_state(state: DialogState, acts: list[DialogAct], known_attrs=None) -> DialogState:
    """Fold one user turn's acts into the state.

    inform adds new attributes and replaces values of already-known ones
    (latest wins); ask/buy/request leave the state untouched. Unknown
    attributes are dropped with a warning so extractor noise cannot crash
    a session.
    """
    new = state.copy()
    for act in acts:
        if act.intent != "inform":
            continue
        for attr, values in act.slot_values().items():
            if known_attrs is not None and attr not in known_attrs:
                log.warning("dropping unknown attribute %r from inform", attr)
                continue
            new.slots[attr] = list(values)
    return new


# -- rule-based act extraction -----------------------------------------------

ORDINALS = ["first", "second", "third", "fourth", "fifth",
            "sixth", "seventh", "eighth", "ninth", "tenth"]
_ORDINAL_TO_INDEX = {w: i + 1 for i, w in enumerate(ORDINALS)}
_NUMBER_WORDS = {"one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
                 "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10}


def parse_index(tokens: list[str]) -> int | None:
    """Read an ordinal ('second'), a number word, or a digit from a token span."""
    for tok in tokens:
        if tok in _ORDINAL_TO_INDEX:
            return _ORDINAL_TO_INDEX[tok]
        if tok in _NUMBER_WORDS:
            return _NUMBER_WORDS[tok]
        if tok.isdigit():
            return int(tok)
    return None


class ValueGazetteer:
    """Token-span -> canonical (attribute, value) lookup over schema values."""

    def __init__(self, domains: dict[str, list[str]] | dict[str, frozenset]):
        self.by_span: dict[tuple[str, ...], list[tuple[str, str]]] = {}
        self.attr_by_span: dict[tuple[str, ...], str] = {}
        for attr, values in domains.items():
            self.attr_by_span[tuple(tokenize(attr))] = attr
            for val in values:
                span = tuple(tokenize(val))
                if span:
                    self.by_span.setdefault(span, []).append((attr, val))
        self.max_len = max((len(s) for s in self.by_span), default=1)

    def lookup_attr(self, span: tuple[str, ...]) -> str | None:
        return self.attr_by_span.get(span)

    def lookup(self, span: tuple[str, ...]) -> list[tuple[str, str]]:
        return self.by_span.get(span, [])

    def spot(self, tokens: list[str]) -> dict[str, list[str]]:
        """Greedy longest-first scan for value mentions."""
        found: dict[str, list[str]] = {}
        i = 0
        while i < len(tokens):
            matched = False
            for n in range(min(self.max_len, len(tokens) - i), 0, -1):
                hits = self.lookup(tuple(tokens[i : i + n]))
                if hits:
                    attr, val = hits[0]
                    found.setdefault(attr, [])
                    if val not in found[attr]:
                        found[attr].append(val)
                    i += n
                    matched = True
                    break
            if not matched:
                i += 1
        return found


@dataclass
class ExtractionResult:
    act: DialogAct
    confidence: float
    matched_template: object = None  # UtteranceTemplate or None

    @property
    def low_confidence(self) -> bool:
        return self.matched_template is None


_MAX_SLOT_TOKENS = 6


def _slot_binding(slot: str, span: tuple[str, ...], gazetteer: "ValueGazetteer"):
    """Resolve a candidate token span for a slot; None if it cannot bind."""
    if slot == "index":
        idx = parse_index(list(span))
        return ("index", idx) if idx is not None and len(span) == 1 else None
    if slot == "attribute":
        attr = gazetteer.lookup_attr(span)
        return ("attribute", attr) if attr else None
    hits = gazetteer.lookup(span)
    if hits:
        named = [(a, v) for a, v in hits if a == slot]
        return (named or hits)[0]
    if slot == "description":
        return ("description", " ".join(span))
    return None


def _align_template(template, toks: list[str], gazetteer: "ValueGazetteer"):
    """Full-sequence alignment of template tokens against utterance tokens.

    Literal tokens must match exactly (case-folded); slots consume 1..6
    tokens that must bind through the gazetteer. Backtracks over slot
    lengths, so adjacent slots split correctly. Returns a params dict or
    None when no alignment exists.
    """
    tpl = [(t[1:-1], True) if t.startswith("<") and t.endswith(">") else (t.lower(), False)
           for t in template.tokens]

    def rec(ti: int, ui: int):
        if ti == len(tpl):
            return {} if ui == len(toks) else None
        tok, is_slot = tpl[ti]
        if not is_slot:
            if ui < len(toks) and toks[ui] == tok:
                return rec(ti + 1, ui + 1)
            return None
        for n in range(1, min(_MAX_SLOT_TOKENS, len(toks) - ui) + 1):
            binding = _slot_binding(tok, tuple(toks[ui : ui + n]), gazetteer)
            if binding is None:
                continue
            rest = rec(ti + 1, ui + n)
            if rest is not None:
                key, val = binding
                out = {key: val}
                out.update(rest)
                return out
        return None

    return rec(0, 0)


def extract_acts(
    utterance: str,
    template_bank,
    gazetteer: ValueGazetteer,
    threshold: float = 0.6,
) -> ExtractionResult:
    """Match the utterance against the template bank and recover the act.

    Full-sequence alignments win; among them the template with the most
    literal tokens is preferred (more specific). Below `threshold` overlap,
    falls back to inform with gazetteer-spotted values only.
    """
    toks = tokenize(utterance)
    best = None  # (n_literals, template, params)
    for tpl in template_bank:
        params = _align_template(tpl, toks, gazetteer)
        if params is None:
            continue
        if tpl.intent == "ask_attribute_in_n" and not (
            "index" in params and "attribute" in params
        ):
            continue
        if tpl.intent == "buy_n":
            if "index" not in params:
                continue
            params = {"index": params["index"]}
        n_lit = sum(1 for t in tpl.tokens if not t.startswith("<"))
        if best is None or n_lit > best[0]:
            best = (n_lit, tpl, params)

    if best is not None:
        _, tpl, params = best
        return ExtractionResult(user_act(tpl.intent, **params), 1.0, tpl)

    # fallback: token-overlap scoring against templates, then gazetteer spotting
    spotted = gazetteer.spot(toks)
    best_score, best_tpl = 0.0, None
    tok_set = set(toks)
    for tpl in template_bank:
        lits = [t.lower() for t in tpl.tokens if not t.startswith("<")]
        if not lits:
            continue
        score = sum(1 for t in lits if t in tok_set) / len(lits)
        if score > best_score:
            best_score, best_tpl = score, tpl
    if best_tpl is not None and best_score >= threshold and best_tpl.intent == "inform":
        return ExtractionResult(user_act("inform", **spotted), best_score, best_tpl)
    return ExtractionResult(user_act("inform", **spotted), best_score, None)
