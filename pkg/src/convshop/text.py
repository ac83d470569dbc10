"""Shared tokenization helpers.

One tokenizer is used everywhere (indexing, value spotting, template
matching) so that surface forms line up across modules: lowercase,
alphanumeric runs only, punctuation and hyphens act as separators.
"""

import re

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into alphanumeric tokens."""
    return _TOKEN_RE.findall(text.lower())


def value_tokens(value: str) -> tuple[str, ...]:
    """Canonical token tuple for an attribute value ("instant-coffee" -> (instant, coffee))."""
    return tuple(tokenize(value))


def contains_token_span(haystack: list[str], needle: tuple[str, ...]) -> bool:
    """True if `needle` occurs as a contiguous token run inside `haystack`."""
    if not needle:
        return False
    n = len(needle)
    return any(tuple(haystack[i : i + n]) == needle for i in range(len(haystack) - n + 1))
