"""Fixed system-side natural language generation templates."""

from __future__ import annotations

from .acts import DialogAct
from .state import ORDINALS


class NlgError(KeyError):
    pass


def _render_push(act: DialogAct, catalog=None) -> str:
    lines = ["I found you following products:"]
    for i, pid in enumerate(act.params.get("items", []), start=1):
        ordinal = ORDINALS[i - 1] if i <= len(ORDINALS) else str(i)
        profile = ""
        if catalog is not None and pid in catalog:
            profile = f" {catalog[pid].profile}"
        lines.append(f"{i}. [{pid}]{profile} ({ordinal})")
    return "\n".join(lines)


def render_nlg(act: DialogAct, catalog=None) -> str:
    """Surface text for a system act. Raises NlgError for unknown acts."""
    if act.intent == "greeting":
        return "Hello, what can I do for you?"
    if act.intent == "request":
        attr = next(iter(act.params))
        return f"Do you have a {attr.replace('_', ' ')} in mind?"
    if act.intent == "push":
        return _render_push(act, catalog)
    if act.intent == "inform":
        slots = act.slot_values()
        if not slots:
            return "I am not sure about that one."
        attr, values = next(iter(slots.items()))
        val = values[0]
        if val == "unknown":
            return f"Sorry, the {attr.replace('_', ' ')} is not listed for that one."
        return f"It is {str(val).replace('-', ' ')}."
    if act.intent == "notify_success":
        return "Your order has been placed."
    if act.intent == "clarify":
        return "Sorry, which one do you mean? Please pick a number from the list."
    raise NlgError(f"no template for system act {act.intent!r}")
