"""Dialog acts: speaker-tagged intents with parameters.

User intents: request, inform, ask_attribute_in_n, buy_n.
System intents: greeting, request, push, inform, notify_success.
"""

from __future__ import annotations

from dataclasses import dataclass, field

USER = "USER"
SYSTEM = "SYSTEM"

USER_INTENTS = ("request", "inform", "ask_attribute_in_n", "buy_n")
SYSTEM_INTENTS = ("greeting", "request", "push", "inform", "notify_success", "clarify")


@dataclass(frozen=True)
class DialogAct:
    speaker: str
    intent: str
    # attribute -> list of value strings (inform/request), plus special
    # params "index" (ask_attribute_in_n / buy_n) and "items" (push).
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.speaker == USER and self.intent not in USER_INTENTS:
            raise ValueError(f"invalid user intent {self.intent!r}")
        if self.speaker == SYSTEM and self.intent not in SYSTEM_INTENTS:
            raise ValueError(f"invalid system intent {self.intent!r}")
        if self.intent == "buy_n" and set(self.params) != {"index"}:
            raise ValueError("buy_n carries exactly an index")
        if self.intent == "ask_attribute_in_n" and "index" not in self.params:
            raise ValueError("ask_attribute_in_n requires an index")

    def slot_values(self) -> dict[str, list[str]]:
        """Attribute->values params only.

        Drops bookkeeping params: index/items, and the attribute/any pair —
        naming an attribute ("any roast type is fine") constrains nothing.
        """
        out = {}
        for key, val in self.params.items():
            if key in ("index", "items", "attribute", "any"):
                continue
            out[key] = list(val) if isinstance(val, (list, tuple)) else [val]
        return out


def user_act(intent: str, **params) -> DialogAct:
    return DialogAct(USER, intent, params)


def system_act(intent: str, **params) -> DialogAct:
    return DialogAct(SYSTEM, intent, params)
