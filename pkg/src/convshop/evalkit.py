"""Metrics and dataset statistics: SR@t, state-tracking P/R/F1 (slot and
value level), product-search P/R/F1, corpus/catalog tables, plus the
evaluation harnesses used by the ablations (matcher induction from annotated
dialogs, tracked-state scoring, ranked-list scoring, scripted-user SR runs).
"""

from __future__ import annotations

import random

from .acts import SYSTEM, USER
from .catalog import Catalog, profile_spotted_values
from .selfplay import Dialog, UserGoal
from .state import ValueGazetteer, extract_acts
from .text import tokenize, value_tokens
from .transfer import UtteranceTemplate


class EvalError(ValueError):
    pass


def _prf(tp: int, fp: int, fn: int) -> dict[str, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return {"precision": p, "recall": r, "f1": f1}


def _turn_dicts(dialog) -> list[dict]:
    if isinstance(dialog, Dialog):
        return [vars(t) for t in dialog.turns]
    if isinstance(dialog, dict):
        return dialog["turns"]
    return dialog.turns  # session-like object with dict turns


def _goal_id(dialog) -> str:
    if isinstance(dialog, Dialog):
        return dialog.goal_id
    if isinstance(dialog, dict):
        return dialog["goal_id"]
    return dialog.goal_id


# -- success rate ---------------------------------------------------------------

def sr_at_t(dialogs, t: int, list_len: int = 5) -> float:
    """Ratio of dialogs whose goal product appeared in a pushed top-list_len
    within the first `t` system turns. The greeting does not count as a
    system turn (convention: pushes cannot happen on it anyway)."""
    if not dialogs:
        raise EvalError("empty dialog set")
    if t < 1 or list_len < 1:
        raise EvalError("t and list_len must be >= 1")
    hits = 0
    for d in dialogs:
        goal = _goal_id(d)
        sys_turns = 0
        for turn in _turn_dicts(d):
            if turn["speaker"] != SYSTEM or turn["intent"] == "greeting":
                continue
            sys_turns += 1
            if sys_turns > t:
                break
            items = turn.get("items") or []
            if turn["intent"] == "push" and goal in items[:list_len]:
                hits += 1
                break
    return hits / len(dialogs)


# -- state tracking -------------------------------------------------------------

def _as_slots(state) -> dict[str, list[str]]:
    slots = state.slots if hasattr(state, "slots") else state
    return {a: list(vs) for a, vs in slots.items()}


def state_prf(predicted, gold) -> dict[str, dict[str, float]]:
    """Micro-averaged slot-level and value-level P/R/F1 over aligned turns.

    Each element is an attribute -> values mapping (dict or DialogState).
    Slot counts compare attribute-name sets; value counts compare
    (attribute, value) pair sets.
    """
    if len(predicted) != len(gold) or not gold:
        raise EvalError(f"aligned turn lists required ({len(predicted)} vs {len(gold)})")
    slot_tp = slot_fp = slot_fn = 0
    val_tp = val_fp = val_fn = 0
    for p, g in zip(predicted, gold):
        p, g = _as_slots(p), _as_slots(g)
        p_slots, g_slots = set(p), set(g)
        slot_tp += len(p_slots & g_slots)
        slot_fp += len(p_slots - g_slots)
        slot_fn += len(g_slots - p_slots)
        p_vals = {(a, v) for a, vs in p.items() for v in vs}
        g_vals = {(a, v) for a, vs in g.items() for v in vs}
        val_tp += len(p_vals & g_vals)
        val_fp += len(p_vals - g_vals)
        val_fn += len(g_vals - p_vals)
    return {"slot": _prf(slot_tp, slot_fp, slot_fn),
            "value": _prf(val_tp, val_fp, val_fn)}


# -- product search -------------------------------------------------------------

def search_prf(ranked_lists, gold_ids, k: int = 5) -> dict[str, float]:
    """Micro P/R/F1 for single-gold retrieval over per-dialog ranked lists."""
    if len(ranked_lists) != len(gold_ids) or not gold_ids:
        raise EvalError("one ranked list per gold id required")
    tp = 0
    returned = 0
    for ranked, gold in zip(ranked_lists, gold_ids):
        if ranked is None:
            raise EvalError("missing ranked list")
        top = list(ranked)[:k]
        returned += len(top)
        if gold in top:
            tp += 1
    return _prf(tp, returned - tp, len(gold_ids) - tp)


# -- dataset / catalog statistics -------------------------------------------------

def dataset_stats(dialogs) -> dict:
    if not dialogs:
        raise EvalError("empty dialog set")
    n_utt = 0
    n_user = 0
    user_tokens = 0
    for d in dialogs:
        turns = _turn_dicts(d)
        n_utt += len(turns)
        for t in turns:
            if t["speaker"] == USER:
                n_user += 1
                user_tokens += len(tokenize(t["text"]))
    return {
        "dialogs": len(dialogs),
        "utterances": n_utt,
        "user_utterances": n_user,
        "avg_turns_per_dialog": n_utt / len(dialogs),
        "avg_tokens_per_user_utterance": user_tokens / n_user if n_user else 0.0,
    }


def catalog_stats(catalog: Catalog) -> dict:
    if not len(catalog):
        raise EvalError("empty catalog")
    profile_tokens = sum(len(tokenize(p.profile)) for p in catalog)
    n_attrs = len(catalog.schema.attribute_names)
    n_values = sum(len(catalog.schema.value_domain[a])
                   for a in catalog.schema.attribute_names)
    return {
        "products": len(catalog),
        "attributes": n_attrs,
        "avg_values_per_attribute": n_values / n_attrs,
        "avg_tokens_per_profile": profile_tokens / len(catalog),
        "vacancy_ratio": catalog.vacancy_ratio(),
    }


def format_stats(stats: dict, title: str = "Statistics") -> str:
    """Plain-text two-column table."""
    width = max(len(k) for k in stats)
    lines = [title, "-" * len(title)]
    for key, val in stats.items():
        shown = f"{val:.2f}" if isinstance(val, float) else str(val)
        lines.append(f"{key.replace('_', ' '):<{width}}  {shown}")
    return "\n".join(lines)


# -- matcher induction (the rule tracker's "training") ---------------------------

def induce_templates(dialogs, max_dialogs: int | None = None) -> list[UtteranceTemplate]:
    """Learn extraction templates from annotated user turns.

    Each gold slot value's token span in the utterance is replaced by a slot
    placeholder for its attribute; ordinal positions become <index>. The
    deduplicated templates are the trained matcher.
    """
    from .state import ORDINALS

    seen: set[tuple] = set()
    out: list[UtteranceTemplate] = []
    for d in (dialogs[:max_dialogs] if max_dialogs else dialogs):
        for turn in _turn_dicts(d):
            if turn["speaker"] != USER:
                continue
            toks = tokenize(turn["text"])
            spans: list[tuple[int, int, str]] = []  # (start, end, slot)
            for attr, values in (turn.get("slots") or {}).items():
                for val in values:
                    vt = list(value_tokens(str(val)))
                    for i in range(len(toks) - len(vt) + 1):
                        if toks[i : i + len(vt)] == vt and not any(
                            s < i + len(vt) and i < e for s, e, _ in spans
                        ):
                            spans.append((i, i + len(vt), attr))
                            break
            if turn["intent"] in ("ask_attribute_in_n", "buy_n"):
                for i, tok in enumerate(toks):
                    if tok in ORDINALS and not any(s <= i < e for s, e, _ in spans):
                        spans.append((i, i + 1, "index"))
                        break
            tpl_toks: list[str] = []
            i = 0
            span_at = {s: (e, slot) for s, e, slot in spans}
            while i < len(toks):
                if i in span_at:
                    e, slot = span_at[i]
                    tpl_toks.append(f"<{slot}>")
                    i = e
                else:
                    tpl_toks.append(toks[i])
                    i += 1
            key = (tuple(tpl_toks), turn["intent"])
            if key not in seen:
                seen.add(key)
                out.append(UtteranceTemplate(tuple(tpl_toks), turn["intent"]))
    return out


def track_dialogs(dialogs, templates, gazetteer: ValueGazetteer):
    """Run the extractor over user turns; returns (predicted, gold) aligned
    per-turn slot maps for state_prf."""
    predicted, gold = [], []
    for d in dialogs:
        for turn in _turn_dicts(d):
            if turn["speaker"] != USER:
                continue
            result = extract_acts(turn["text"], templates, gazetteer)
            predicted.append(result.act.slot_values())
            gold.append(turn.get("slots") or {})
    return predicted, gold


# -- search evaluation harness ----------------------------------------------------

def ranked_after_turn(dialog, rank_fn, n_user_turns: int = 3) -> list[str] | None:
    """Ranked product ids using context up to the n-th user turn.

    `rank_fn(user_text, state_str, history_text)` -> ranked pid list.
    Returns None when the dialog has fewer user turns than required.
    """
    user_texts: list[str] = []
    history: list[str] = []
    state_str = ""
    for turn in _turn_dicts(dialog):
        history.append(turn["text"])
        if turn["speaker"] != USER:
            continue
        user_texts.append(turn["text"])
        state_str = turn["state"]
        if len(user_texts) == n_user_turns:
            return rank_fn(" ".join(user_texts), state_str, " ".join(history))
    return None


def search_eval(dialogs, rank_fn, k: int = 5, n_user_turns: int = 3) -> dict[str, float]:
    """recall/precision/F1 at k for `rank_fn` after the n-th user turn."""
    ranked_lists, gold = [], []
    for d in dialogs:
        ranked = ranked_after_turn(d, rank_fn, n_user_turns)
        if ranked is None:
            continue
        ranked_lists.append(ranked)
        gold.append(_goal_id(d))
    if not gold:
        raise EvalError("no dialog reaches the evaluation turn")
    return search_prf(ranked_lists, gold, k)


# -- scripted-user success-rate harness ---------------------------------------------

def simulate_session(engine, goal: UserGoal, max_user_turns: int = 9):
    """Drive one engine session with a truthful scripted user pursuing `goal`.

    The user states the initial constraints, answers attribute requests from
    the goal product, and buys as soon as the target shows up in a push.
    Returns a dialog record compatible with sr_at_t.
    """
    session = engine.open_session()
    opening = " ".join(v.replace("-", " ") for v in goal.initial_state.values())
    text = f"i am looking for {opening} coffee".replace("  ", " ")
    stated = set(goal.initial_state)
    for _ in range(max_user_turns):
        if session.status != "OPEN":
            break
        reply = engine.step_session(session, text)
        if session.status != "OPEN":
            break
        if reply["intent"] == "request":
            attr = next(iter(session.last_system_act.params))
            if attr in goal.target:
                text = f"{goal.target[attr].replace('-', ' ')} please"
                stated.add(attr)
            else:
                text = f"any {attr.replace('_', ' ')} is fine with me"
        elif reply["intent"] in ("push", "clarify"):
            items = session.last_push
            if goal.target_id in items:
                from .state import ORDINALS

                text = f"i will buy the {ORDINALS[items.index(goal.target_id)]} one"
            else:
                unstated = [a for a in goal.target if a not in stated]
                if unstated:
                    attr = unstated[0]
                    text = f"{goal.target[attr].replace('-', ' ')} please"
                    stated.add(attr)
                else:
                    break  # nothing left to say
        else:
            break
    return {"turns": session.turns, "goal_id": goal.target_id,
            "success": session.status == "PURCHASED"}


def simulate_sr(engine, goals, t: int = 5, list_len: int = 5,
                max_user_turns: int = 9) -> float:
    records = [simulate_session(engine, g, max_user_turns) for g in goals]
    return sr_at_t(records, t, list_len)


def sample_goals(catalog: Catalog, n: int, seed: int = 0,
                 min_attrs: int = 1, max_attrs: int = 2,
                 include_profile_values: bool = False,
                 lead_with_gap: bool = False) -> list[UserGoal]:
    """Random purchase goals for the SR harness.

    With include_profile_values, the goal's target also carries values the
    product's text profile mentions but the structured side lost to vacancy —
    a user who wants those properties will state them even though the
    attribute cell is empty. With lead_with_gap, the opening constraints
    start with one such vacancy-recovered value whenever the product has one:
    the schema-gap scenario where hard attribute filtering drops the target
    and only soft matching can recover."""
    rng = random.Random(seed)
    pids = sorted(catalog.products)
    goals = []
    for _ in range(n):
        product = catalog[rng.choice(pids)]
        target = dict(product.attributes)
        recovered: dict[str, str] = {}
        if include_profile_values:
            for attr, value in profile_spotted_values(catalog, product).items():
                if attr not in target:
                    recovered[attr] = value
            target.update(recovered)
        attrs = [a for a in catalog.schema.attribute_names if a in target]
        k = min(rng.randint(min_attrs, max_attrs), len(attrs))
        if lead_with_gap and recovered:
            lead = rng.choice([a for a in attrs if a in recovered])
            chosen = [lead] + rng.sample([a for a in attrs if a != lead], k - 1)
        else:
            chosen = rng.sample(attrs, k)
        goals.append(UserGoal(
            initial_state={a: target[a] for a in chosen},
            target=target,
            target_id=product.id,
        ))
    return goals
