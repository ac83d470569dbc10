"""The live conversational engine: tracker + search backend + EMDM policy +
template NLG wired into a session loop."""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from .acts import DialogAct, SYSTEM, USER, system_act
from .catalog import Catalog, TfIdfIndex, attribute_entropy, filter_products
from .model.core import ModelParams, encode_bag
from .model.data import product_token_ids
from .nlg import render_nlg
from .selfplay import emdm_select
from .state import DialogState, ExtractionResult, ValueGazetteer, extract_acts, state_to_string
from .text import tokenize

BACKENDS = ("rule", "tfidf", "neural", "hybrid")


class SessionClosed(RuntimeError):
    pass


class BackendUnavailable(RuntimeError):
    pass


@dataclass
class EngineConfig:
    backend: str = "rule"
    push_threshold: int = 50
    list_len: int = 5
    max_acts: int = 20
    narrow_k: int = 50
    narrow_with_state: bool = False  # add tracked-state tokens to the narrowing query
    session_ttl_seconds: float = 1800.0
    debug: bool = False


@dataclass
class Session:
    id: str
    status: str = "OPEN"  # OPEN | PURCHASED | EXPIRED
    state: DialogState = field(default_factory=DialogState)
    turns: list = field(default_factory=list)  # DialogTurn-like dicts
    last_push: list[str] = field(default_factory=list)
    asked_attrs: set = field(default_factory=set)
    last_system_act: DialogAct | None = None
    backend: str | None = None
    created_at: float = field(default_factory=time.time)
    last_active: float = field(default_factory=time.time)
    purchased_id: str | None = None


class SearchBackend:
    """Ranks products for a dialog context. One instance per engine; all
    methods are read-only over the shared catalog/index/model."""

    def __init__(self, catalog: Catalog, index: TfIdfIndex,
                 model: ModelParams | None = None, narrow_k: int = 50,
                 narrow_with_state: bool = False):
        self.catalog = catalog
        self.index = index
        self.model = model
        self.narrow_k = narrow_k
        self.narrow_with_state = narrow_with_state

    def _narrow(self, state: DialogState, user_text: str) -> list[str]:
        """tf-idf pool for the neural/hybrid scorers. The paper leaves the
        narrowing query open; we default to concatenated user utterances and
        optionally append the tracked state's tokens."""
        query = tokenize(user_text)
        if self.narrow_with_state:
            query = query + tokenize(state_to_string(state))
        return [pid for pid, _ in self.index.candidates(query, self.narrow_k)]

    def candidates(self, backend: str, state: DialogState, user_text: str) -> list[str]:
        """The candidate pool the policy reasons over."""
        if backend == "rule":
            return sorted(filter_products(self.catalog, state.slots))
        if backend == "tfidf":
            return [pid for pid, _ in self.index.candidates(tokenize(user_text), self.narrow_k)]
        return self._narrow(state, user_text)

    def rank(self, backend: str, state: DialogState, user_text: str,
             history_text: str | None = None) -> list[tuple[str, float]]:
        """Ranked (pid, score) list, best first."""
        if backend == "rule":
            return [(pid, 0.0) for pid in sorted(filter_products(self.catalog, state.slots))]
        if backend == "tfidf":
            return self.index.candidates(tokenize(user_text), self.narrow_k)
        if backend in ("neural", "hybrid"):
            if self.model is None:
                raise BackendUnavailable(f"backend {backend!r} needs a model checkpoint")
            pool = self._narrow(state, user_text)
            if not pool:
                return []
            return self.score_pool(backend, state, history_text or user_text, pool)
        raise ValueError(f"unknown backend {backend!r}")

    def score_pool(self, backend: str, state: DialogState, history_text: str,
                   pool: list[str]) -> list[tuple[str, float]]:
        from .model.core import score_products

        m = self.model
        cfg = m.cfg
        mode = {"neural": cfg.mode, "hybrid": "hybrid"}[backend]
        cfg = type(cfg)(**{**vars(cfg), "mode": mode})
        u, _ = encode_bag(m.params, "ctx", m.text_vocab.ids(tokenize(history_text)))
        s, _ = encode_bag(m.params, "state", m.text_vocab.ids(tokenize(state_to_string(state))))
        q = np.concatenate([u, s])
        prof_ids, attr_ids = product_token_ids(self.catalog, pool, m.text_vocab, m.attr_vocab)
        d = cfg.d
        P = np.zeros((len(pool), 2 * d))
        for j in range(len(pool)):
            P[j, :d], _ = encode_bag(m.params, "prof", prof_ids[j])
            P[j, d:], _ = encode_bag(m.params, "attr", attr_ids[j])
        if mode == "attr":
            P[:, :d] = 0.0
        elif mode == "text":
            P[:, d:] = 0.0
        probs, _ = score_products(q, P, m.params, cfg)
        order = sorted(range(len(pool)), key=lambda j: (-probs[j], pool[j]))
        return [(pool[j], float(probs[j])) for j in order]


def policy_decide(
    state: DialogState,
    user: DialogAct,
    last_push: list[str],
    candidates: list[str],
    ranked: list[tuple[str, float]],
    asked_attrs: set,
    catalog: Catalog,
    config: EngineConfig,
) -> DialogAct:
    """EMDM-driven next system act."""
    if user.intent == "ask_attribute_in_n":
        idx = int(user.params["index"])
        if not (1 <= idx <= len(last_push)):
            return system_act("clarify")
        attr = user.params.get("attribute")
        product = catalog[last_push[idx - 1]]
        value = product.value(attr) if attr in catalog.schema.value_domain else None
        return system_act("inform", **{attr or "attribute": value or "unknown"})
    if user.intent == "buy_n":
        idx = int(user.params["index"])
        if not (1 <= idx <= len(last_push)):
            return system_act("clarify")
        return system_act("notify_success")
    # inform / request
    excluded = set(state.slots) | asked_attrs
    attr = emdm_select(candidates, excluded, catalog) if candidates else None
    if attr is not None and len(candidates) > config.push_threshold:
        return system_act("request", **{attr: []})
    items = [pid for pid, _ in ranked[: config.list_len]]
    return system_act("push", items=items)


class Engine:
    """Binds catalog, tracker resources, search backends, and sessions."""

    def __init__(self, catalog: Catalog, index: TfIdfIndex | None = None,
                 template_bank=None, model: ModelParams | None = None,
                 config: EngineConfig | None = None):
        self.catalog = catalog
        self.index = index or TfIdfIndex.build(catalog)
        self.config = config or EngineConfig()
        if self.config.backend in ("neural", "hybrid") and model is None:
            raise BackendUnavailable("neural/hybrid backend requires a checkpoint")
        self.search = SearchBackend(catalog, self.index, model, self.config.narrow_k,
                                    self.config.narrow_with_state)
        self.gazetteer = ValueGazetteer(catalog.schema.to_dict())
        if template_bank is None:
            from .resources import default_template_bank

            template_bank = default_template_bank()
        self.templates = [t for ts in template_bank.values() for t in ts]
        self.sessions: dict[str, Session] = {}

    def open_session(self, backend: str | None = None) -> Session:
        backend = backend or self.config.backend
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
        if backend in ("neural", "hybrid") and self.search.model is None:
            raise BackendUnavailable(f"backend {backend!r} needs a model checkpoint")
        session = Session(id=uuid.uuid4().hex[:12], backend=backend)
        greeting = system_act("greeting")
        session.turns.append(self._turn(SYSTEM, render_nlg(greeting), greeting, session))
        session.last_system_act = greeting
        self.sessions[session.id] = session
        return session

    def _turn(self, speaker, text, act: DialogAct, session: Session, debug=None):
        rec = {
            "speaker": speaker,
            "text": text,
            "intent": act.intent,
            "slots": act.slot_values() if act.intent in ("inform", "request") else {},
            "state": state_to_string(session.state),
        }
        if act.intent == "push":
            rec["items"] = list(act.params.get("items", []))
        if debug is not None:
            rec["debug"] = debug
        return rec

    def _check_open(self, session: Session):
        if session.status == "EXPIRED":
            raise SessionClosed(f"session {session.id} expired")
        if session.status == "PURCHASED":
            raise SessionClosed(f"session {session.id} already purchased")
        if time.time() - session.last_active > self.config.session_ttl_seconds:
            session.status = "EXPIRED"
            raise SessionClosed(f"session {session.id} expired (idle)")

    def user_text(self, session: Session) -> str:
        return " ".join(t["text"] for t in session.turns if t["speaker"] == USER)

    def history_text(self, session: Session) -> str:
        return " ".join(t["text"] for t in session.turns)

    def step_session(self, session: Session, text: str) -> dict:
        """Process one user utterance; returns the system turn record."""
        self._check_open(session)
        session.last_active = time.time()

        result: ExtractionResult = extract_acts(text, self.templates, self.gazetteer)
        act = result.act
        session.state = update_state_for(session, act, self.catalog)
        user_turn = self._turn(USER, text, act, session)
        session.turns.append(user_turn)

        unparseable = result.low_confidence and not act.slot_values()
        if unparseable and session.last_system_act is not None \
                and session.last_system_act.intent in ("request", "push"):
            sys_act = session.last_system_act  # re-issue the last question
        else:
            user_all = self.user_text(session)
            candidates = self.search.candidates(session.backend, session.state, user_all)
            ranked = self.search.rank(session.backend, session.state, user_all,
                                      history_text=self.history_text(session))
            sys_act = policy_decide(session.state, act, session.last_push, candidates,
                                    ranked, session.asked_attrs, self.catalog, self.config)

        debug = None
        if self.config.debug:
            user_all = self.user_text(session)
            cand = self.search.candidates(session.backend, session.state, user_all)
            debug = {
                "intent": act.intent,
                "state": state_to_string(session.state),
                "entropies": {
                    a: round(attribute_entropy(self.catalog, cand, a), 4)
                    for a in self.catalog.schema.attribute_names
                } if cand else {},
                "top_scores": [
                    [pid, round(score, 6)] for pid, score in
                    self.search.rank(session.backend, session.state, user_all,
                                     history_text=self.history_text(session))[:10]
                ],
            }

        if sys_act.intent == "request":
            session.asked_attrs.add(next(iter(sys_act.params)))
        if sys_act.intent == "push":
            session.last_push = list(sys_act.params["items"])
        if sys_act.intent == "notify_success":
            session.status = "PURCHASED"
            session.purchased_id = session.last_push[int(act.params["index"]) - 1]

        sys_turn = self._turn(SYSTEM, render_nlg(sys_act, self.catalog), sys_act, session,
                              debug=debug)
        session.turns.append(sys_turn)
        session.last_system_act = sys_act

        if session.status == "OPEN" and len(session.turns) >= self.config.max_acts:
            session.status = "EXPIRED"
        return sys_turn


def update_state_for(session: Session, act: DialogAct, catalog: Catalog) -> DialogState:
    from .state import update_state

    return update_state(session.state, [act], catalog.schema.attribute_names)
