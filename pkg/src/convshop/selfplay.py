"""Self-play dialog outline generation.

A goal is derived from a search-behavior session (keywords + purchased
product). An agenda-based user and a finite-state agent then exchange acts:
the agent asks about the max-entropy attribute while the candidate pool is
large, pushes a ranked top-5 once it is small, and the user answers from the
purchased product's attributes, eventually buying when the target shows up
in a push. Outlines are realized into annotated dialogs with transferred
utterance templates.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .acts import DialogAct, SYSTEM, USER, system_act, user_act
from .catalog import Catalog, attribute_entropy, filter_products, profile_spotted_values
from .nlg import render_nlg
from .state import DialogState, state_to_string, update_state
from .text import contains_token_span, tokenize, value_tokens
from .transfer import Paraphraser, UtteranceTemplate, instantiate, paraphrase

ANY = "ANY"


class SelfPlayError(ValueError):
    pass


@dataclass(frozen=True)
class SearchSession:
    keywords: str
    purchased_product_id: str


@dataclass
class UserGoal:
    initial_state: dict[str, str]  # attribute -> single value
    target: dict[str, str]         # purchased product's non-vacant attributes
    target_id: str


@dataclass
class Outline:
    acts: list[DialogAct]
    success: bool
    goal: UserGoal

    @property
    def turns(self) -> int:
        return len(self.acts)


@dataclass
class SelfPlayConfig:
    max_turns: int = 20
    push_threshold: int = 50
    list_len: int = 5
    ask_before_buy_prob: float = 0.5


def derive_goal(session: SearchSession, catalog: Catalog) -> UserGoal:
    """Initial state = attribute values spotted in the keywords that agree
    with the purchased product; target = the product's attribute map."""
    if session.purchased_product_id not in catalog:
        raise SelfPlayError(f"unknown purchased id {session.purchased_product_id!r}")
    product = catalog[session.purchased_product_id]
    keyword_toks = tokenize(session.keywords)
    initial: dict[str, str] = {}
    for attr in catalog.schema.attribute_names:
        val = product.value(attr)
        if val is None:
            continue
        if contains_token_span(keyword_toks, value_tokens(val)):
            initial[attr] = val
    # values the profile carries but the structured side lost to vacancy:
    # spotting them in the keywords recovers the schema-gap constraint
    for attr, val in profile_spotted_values(catalog, product).items():
        if attr in initial or product.value(attr) is not None:
            continue
        if contains_token_span(keyword_toks, value_tokens(val)):
            initial[attr] = val
    return UserGoal(initial_state=initial, target=dict(product.attributes),
                    target_id=product.id)


def emdm_select(candidate_ids, excluded_attrs, catalog: Catalog) -> str | None:
    """Max-entropy attribute among candidates, excluding asked/known ones.

    Ties break by schema declaration order; None when every remaining
    attribute has zero entropy.
    """
    best_attr, best_h = None, 0.0
    for attr in catalog.schema.attribute_names:
        if attr in excluded_attrs:
            continue
        h = attribute_entropy(catalog, candidate_ids, attr)
        if h > best_h:
            best_attr, best_h = attr, h
    return best_attr


def rank_by_id(candidate_ids, state: DialogState, catalog: Catalog) -> list[str]:
    return sorted(candidate_ids)


def self_play(
    goal: UserGoal,
    catalog: Catalog,
    config: SelfPlayConfig | None = None,
    rng: random.Random | None = None,
    ranker=rank_by_id,
) -> Outline:
    """Run one user/agent exchange to completion or the act cap."""
    if not goal.target:
        raise SelfPlayError("degenerate goal: target has no non-vacant attribute")
    config = config or SelfPlayConfig()
    rng = rng or random.Random(0)

    acts: list[DialogAct] = [system_act("greeting")]
    state = DialogState({a: [v] for a, v in goal.initial_state.items()})
    acts.append(user_act("inform", **goal.initial_state))
    asked_or_known = set(state.slots)
    success = False

    def room(n: int) -> bool:
        return len(acts) + n <= config.max_turns

    last_items: list[str] = []
    while len(acts) < config.max_turns and not success:
        filtered = filter_products(catalog, state.slots)
        if not filtered:
            # a stated value emptied the pool (e.g. the target's value is
            # vacant everywhere); keep pushing the last list until the cap,
            # with the user repeating a stated constraint in between
            if not last_items or not state.slots or not room(2):
                break
            acts.append(system_act("push", items=last_items))
            attr0 = next(iter(state.slots))
            acts.append(user_act("inform", **{attr0: state.slots[attr0][0]}))
            continue
        attr = emdm_select(filtered, asked_or_known, catalog)

        if attr is not None and len(filtered) > config.push_threshold:
            if not room(2):
                break
            acts.append(system_act("request", **{attr: []}))
            asked_or_known.add(attr)
            if attr in goal.target:
                acts.append(user_act("inform", **{attr: goal.target[attr]}))
                state = update_state(state, [acts[-1]], catalog.schema.attribute_names)
            else:
                # target lacks the attribute; agent skips the non-answer
                acts.append(user_act("inform", attribute=attr, any=True))
            continue

        # push branch
        if not room(1):
            break
        items = ranker(filtered, state, catalog)[: config.list_len]
        last_items = items
        acts.append(system_act("push", items=items))
        if goal.target_id in items:
            index = items.index(goal.target_id) + 1
            askable = [a for a in goal.target if a in catalog.schema.attribute_names]
            if askable and rng.random() < config.ask_before_buy_prob and room(4):
                ask_attr = rng.choice(sorted(askable))
                acts.append(user_act("ask_attribute_in_n", attribute=ask_attr, index=index))
                acts.append(system_act("inform", **{ask_attr: goal.target[ask_attr]}))
            if not room(2):
                break
            acts.append(user_act("buy_n", index=index))
            acts.append(system_act("notify_success"))
            success = True
        else:
            unstated = [a for a in catalog.schema.attribute_names
                        if a in goal.target and a not in state.slots]
            if not room(1):
                break
            if unstated:
                attr = unstated[0]
                acts.append(user_act("inform", **{attr: goal.target[attr]}))
                state = update_state(state, [acts[-1]], catalog.schema.attribute_names)
                asked_or_known.add(attr)
            elif state.slots:
                # nothing new to say: the user repeats a stated constraint and
                # the agent keeps pushing until the act cap expires the dialog
                attr0 = next(iter(state.slots))
                acts.append(user_act("inform", **{attr0: state.slots[attr0][0]}))
            else:
                break

    return Outline(acts=acts, success=success, goal=goal)


# -- session synthesis ---------------------------------------------------------

def generate_sessions(
    catalog: Catalog, n_sessions: int, seed: int = 0,
    min_keywords: int = 1, max_keywords: int = 3,
    gap_keyword_prob: float = 0.0,
) -> list[SearchSession]:
    """Sample products and build keyword queries from a few of their values.

    With gap_keyword_prob, a session's keywords may lead with a value the
    product's profile mentions but its structured side lost to vacancy — the
    schema-gap request that hard attribute filtering cannot serve."""
    rng = random.Random(seed)
    pids = sorted(catalog.products)
    sessions = []
    for _ in range(n_sessions):
        product = catalog[rng.choice(pids)]
        attrs = [a for a in catalog.schema.attribute_names if a in product.attributes]
        k = min(rng.randint(min_keywords, max_keywords), len(attrs))
        gap_value = None
        if gap_keyword_prob > 0 and rng.random() < gap_keyword_prob:
            recovered = {a: v for a, v in profile_spotted_values(catalog, product).items()
                         if a not in product.attributes}
            if recovered:
                gap_value = recovered[rng.choice(sorted(recovered))]
        chosen = rng.sample(attrs, k - 1 if gap_value and k > 1 else k) if k else []
        words = []
        if gap_value:
            words.append(gap_value.replace("-", " "))
        for a in sorted(chosen, key=catalog.schema.attribute_names.index):
            words.append(product.attributes[a].replace("-", " "))
        words.append("coffee")
        sessions.append(SearchSession(" ".join(words), product.id))
    return sessions


# -- realization ---------------------------------------------------------------

@dataclass
class DialogTurn:
    speaker: str
    text: str
    intent: str
    slots: dict[str, list[str]]
    state: str  # serialized cumulative state after this turn
    items: list[str] | None = None  # pushed product ids (push turns only)


@dataclass
class Dialog:
    turns: list[DialogTurn]
    goal_id: str
    success: bool

    def to_record(self) -> dict:
        return {
            "turns": [vars(t) for t in self.turns],
            "goal_id": self.goal_id,
            "success": self.success,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Dialog":
        return cls(
            turns=[DialogTurn(**t) for t in rec["turns"]],
            goal_id=rec["goal_id"],
            success=rec["success"],
        )


def _rebind_template(tpl: UtteranceTemplate, act: DialogAct) -> UtteranceTemplate:
    """Rename attribute-typed slots, in order, to the act's attributes.

    <index> and <attribute> keep their meaning; only value slots rebind, so
    one inform template of the right arity serves any attribute combination.
    """
    attrs = list(act.slot_values())
    tokens, i = [], 0
    for tok in tpl.tokens:
        if tok.startswith("<") and tok[1:-1] not in ("index", "attribute"):
            tokens.append(f"<{attrs[i]}>")
            i += 1
        else:
            tokens.append(tok)
    return UtteranceTemplate(tuple(tokens), tpl.intent)


def _pick_template(bank: dict[str, list[UtteranceTemplate]], act: DialogAct,
                   rng: random.Random) -> UtteranceTemplate:
    pool = bank.get(act.intent, [])
    if act.intent == "inform":
        if act.params.get("any"):
            pool = [t for t in pool if t.slots() == ["attribute"]]
        else:
            arity = len(act.slot_values())
            pool = [t for t in pool
                    if len([s for s in t.slots() if s not in ("index", "attribute")]) == arity
                    and "attribute" not in t.slots()]
    if not pool:
        raise SelfPlayError(f"no template for user intent {act.intent!r} "
                            f"with params {sorted(act.params)}")
    return rng.choice(pool)


def assemble_dialog(
    outline: Outline,
    template_bank: dict[str, list[UtteranceTemplate]],
    paraphraser: Paraphraser | None = None,
    rng_seed: int = 0,
    catalog: Catalog | None = None,
) -> Dialog:
    """Realize an outline into an annotated dialog.

    User acts sample an intent-matching template (seeded) and run through the
    paraphraser; system acts use the fixed NLG. Gold per-turn intent, slot
    values, and cumulative state ride along as annotations.
    """
    rng = random.Random(rng_seed)
    turns: list[DialogTurn] = []
    state = DialogState()
    for act in outline.acts:
        if act.speaker == SYSTEM:
            text = render_nlg(act, catalog)
            slots = {} if act.intent == "push" else act.slot_values()
        else:
            tpl = _pick_template(template_bank, act, rng)
            if act.intent == "inform" and not act.params.get("any"):
                tpl = _rebind_template(tpl, act)
            raw = instantiate(tpl, act)
            required = [v for vals in act.slot_values().values() for v in vals]
            if paraphraser is not None:
                raw = paraphrase(raw, paraphraser, required_values=required)
            text = raw[0].upper() + raw[1:] + "." if raw else raw
            slots = {} if act.params.get("any") else act.slot_values()
            state = update_state(state, [act] if not act.params.get("any") else [])
        turns.append(DialogTurn(
            speaker=act.speaker,
            text=text,
            intent=act.intent,
            slots=slots,
            state=state_to_string(state),
            items=list(act.params["items"]) if act.intent == "push" else None,
        ))
    return Dialog(turns=turns, goal_id=outline.goal.target_id, success=outline.success)


def write_dialogs(dialogs: list[Dialog], path: str) -> None:
    with open(path, "w") as fh:
        for d in dialogs:
            fh.write(json.dumps(d.to_record()) + "\n")


def read_dialogs(path: str) -> list[Dialog]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(Dialog.from_record(json.loads(line)))
    return out


def read_sessions(path: str) -> list[SearchSession]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                out.append(SearchSession(rec["keywords"], rec["purchased_product_id"]))
    return out


def write_sessions(sessions: list[SearchSession], path: str) -> None:
    with open(path, "w") as fh:
        for s in sessions:
            fh.write(json.dumps({
                "keywords": s.keywords,
                "purchased_product_id": s.purchased_product_id,
            }) + "\n")
