"""Built-in seed utterances, keyword lexicon, and paraphrase synonyms.

The seeds come from movie-ticketing / restaurant style dialogs, annotated
inline with [surface](slot) markers; the transfer pipeline turns them into
shopping templates. An external seed file in the documented ndjson format
can replace them via the CLI.
"""

from __future__ import annotations

import re

from .transfer import (
    KeywordLexicon,
    LexicalParaphraser,
    SeedUtterance,
    build_templates,
    templates_by_intent,
)

_MARK = re.compile(r"\[([^\]]+)\]\(([^)]+)\)")


def seed_from_marked(marked: str, intent: str, domain: str = "") -> SeedUtterance:
    """Parse "find a [superhero](description) movie" into a SeedUtterance."""
    spans = []
    text = ""
    cursor = 0
    for m in _MARK.finditer(marked):
        text += marked[cursor : m.start()]
        start = len(text)
        text += m.group(1)
        spans.append((start, len(text), m.group(2)))
        cursor = m.end()
    text += marked[cursor:]
    return SeedUtterance(text=text, intent=intent, value_spans=tuple(spans), source_domain=domain)


_SEEDS = [
    # (marked text, intent, source domain)
    ("i am looking for a movie", "inform", "movie"),
    ("i want to watch a movie", "inform", "movie"),
    ("hi there i need a movie", "inform", "movie"),
    ("find a [superhero](description) movie", "inform", "movie"),
    ("let's try [Avatar](title)", "inform", "movie"),
    ("i would like [italian](food) please", "inform", "restaurant"),
    ("how about [Avatar](title)", "inform", "movie"),
    ("just a normal [action](genre) movie would be fine", "inform", "movie"),
    ("i prefer [comedy](genre)", "inform", "movie"),
    ("[comedy](genre) sounds nice to me", "inform", "movie"),
    ("please find me [superhero](description) [imax](format) tickets tonight", "inform", "movie"),
    ("i am looking for a [romantic](genre) [western](style) movie", "inform", "movie"),
    ("get me some [cheap](price) [italian](food) food", "inform", "restaurant"),
    ("i want a [cheap](price) [spicy](taste) [chinese](cuisine) restaurant near downtown",
     "inform", "restaurant"),
    ("find me a [new](age) [romantic](genre) [western](style) movie tonight", "inform", "movie"),
    ("i want a [new](age) [romantic](genre) [western](style) [imax](format) movie", "inform", "movie"),
    ("get me a [cheap](price) [spicy](taste) [vegan](diet) [italian](food) [downtown](area) restaurant",
     "inform", "restaurant"),
    ("any [genre](attribute) is fine with me", "inform", "movie"),
    ("i do not mind the [genre](attribute)", "inform", "movie"),
    ("whatever [genre](attribute) works", "inform", "movie"),
    ("what [genre](attribute) is it in the [second](index) image", "ask_attribute_in_n", "movie"),
    ("what [genre](attribute) is the [second](index) one", "ask_attribute_in_n", "movie"),
    ("could you tell me the [genre](attribute) of the [third](index) one",
     "ask_attribute_in_n", "movie"),
    ("what is the [genre](attribute) of the [second](index) item", "ask_attribute_in_n", "fashion"),
    ("i will buy the [second](index) one", "buy_n", "fashion"),
    ("i will take the [first](index) one please", "buy_n", "fashion"),
    ("let me order the [second](index) one", "buy_n", "fashion"),
]

DEFAULT_LEXICON = KeywordLexicon(
    verbs={"watch": "drink", "eat": "drink", "book": "buy", "reserve": "buy"},
    nouns={
        "movie": "coffee",
        "movies": "coffee",
        "film": "coffee",
        "restaurant": "coffee",
        "food": "coffee",
        "tickets": "packets",
        "ticket": "pack",
    },
)

PARAPHRASE_SYNONYMS = {
    "normal": "regular",
    "find": "get",
    "want": "need",
    "looking": "searching",
    "buy": "grab",
    "prefer": "like",
    "tell": "show",
    "nice": "lovely",
}


def default_seeds() -> list[SeedUtterance]:
    return [seed_from_marked(text, intent, domain) for text, intent, domain in _SEEDS]


def default_templates(use_syntax_filter: bool = True):
    return build_templates(default_seeds(), DEFAULT_LEXICON, use_syntax_filter=use_syntax_filter)


def default_template_bank(use_syntax_filter: bool = True):
    return templates_by_intent(default_templates(use_syntax_filter))


def default_paraphraser(seed: int = 0, swap_prob: float = 0.8) -> LexicalParaphraser:
    return LexicalParaphraser(PARAPHRASE_SYNONYMS, seed=seed, swap_prob=swap_prob)
