"""Turning annotated dialogs plus the catalog into training examples."""

from __future__ import annotations

from dataclasses import dataclass

from ..acts import USER, USER_INTENTS
from ..catalog import Catalog, TfIdfIndex
from ..text import tokenize
from .core import ModelConfig, attr_sequence_tokens
from .vocab import BOS, EOS, Vocab


@dataclass
class TrainingExample:
    history_ids: list[int]        # concat of all turn texts up to the user turn
    state_ids: list[int]          # text-vocab ids of the serialized gold state
    decoder_prev_ids: list[int]   # BOS + gold state tokens (state vocab)
    decoder_target_ids: list[int]  # gold state tokens + EOS
    gold_intent: int
    gold_index: int | None        # index of gold product in the candidate list
    gold_pid: str
    cand_pids: list[str]
    cand_profile_ids: list[list[int]]
    cand_attr_ids: list[list[int]]


def state_sequence_tokens(state_str: str) -> list[str]:
    """Symbolic state tokens: attr names and value strings stay atomic."""
    if not state_str.strip():
        return []
    toks: list[str] = []
    for part in state_str.split(";"):
        part = part.strip()
        if not part or "=" not in part:
            continue
        attr, vals = part.split("=", 1)
        toks.extend([attr.strip(), "="])
        for i, v in enumerate(v.strip() for v in vals.split(",")):
            if i:
                toks.append(",")
            toks.append(v)
        toks.append(";")
    if toks and toks[-1] == ";":
        toks.pop()
    return toks


def build_vocabs(dialogs, catalog: Catalog) -> tuple[Vocab, Vocab, Vocab]:
    """Text vocab from utterances + profiles; attribute/state vocab from the
    schema's delimiter sequences."""
    text_tokens: set[str] = set()
    for d in dialogs:
        for t in d.turns:
            text_tokens.update(tokenize(t.text))
            text_tokens.update(tokenize(t.state))
    for p in catalog:
        text_tokens.update(tokenize(p.profile))
    symbols: set[str] = {"=", ",", ";"}
    for attr in catalog.schema.attribute_names:
        symbols.add(attr)
        symbols.update(catalog.schema.value_domain[attr])
    text_vocab = Vocab(sorted(text_tokens))
    attr_vocab = Vocab(sorted(symbols))
    state_vocab = Vocab(sorted(symbols), specials=("<unk>", BOS, EOS))
    return text_vocab, attr_vocab, state_vocab


def candidate_pool(index: TfIdfIndex, query_tokens: list[str], k: int,
                   gold_pid: str | None = None) -> list[str]:
    """tf-idf top-k ids; during training the gold product is appended if absent."""
    pids = [pid for pid, _ in index.candidates(query_tokens, k)]
    if gold_pid is not None and gold_pid not in pids:
        pids.append(gold_pid)
    return pids


def product_token_ids(catalog: Catalog, pids, text_vocab: Vocab, attr_vocab: Vocab):
    prof = [text_vocab.ids(tokenize(catalog[pid].profile)) for pid in pids]
    attr = [attr_vocab.ids(attr_sequence_tokens(catalog[pid], catalog.schema)) for pid in pids]
    return prof, attr


def build_examples(
    dialogs,
    catalog: Catalog,
    index: TfIdfIndex,
    text_vocab: Vocab,
    attr_vocab: Vocab,
    state_vocab: Vocab,
    candidates_k: int = 50,
    include_gold: bool = True,
    max_per_dialog: int | None = None,
    state_query: bool = False,
) -> list[TrainingExample]:
    """One example per user turn (capped by `max_per_dialog`).

    With `state_query`, the narrowing query is the user text plus the
    serialized gold state, matching a runtime that narrows with everything
    the tracker knows rather than raw utterances alone."""
    examples: list[TrainingExample] = []
    for dialog in dialogs:
        history: list[str] = []
        user_text: list[str] = []
        made = 0
        for turn in dialog.turns:
            history.append(turn.text)
            if turn.speaker != USER:
                continue
            user_text.append(turn.text)
            if max_per_dialog is not None and made >= max_per_dialog:
                continue
            made += 1
            query = tokenize(" ".join(user_text))
            if state_query:
                query = query + tokenize(turn.state)
            pids = candidate_pool(index, query, candidates_k,
                                  dialog.goal_id if include_gold else None)
            prof_ids, attr_ids = product_token_ids(catalog, pids, text_vocab, attr_vocab)
            gold_index = pids.index(dialog.goal_id) if dialog.goal_id in pids else None
            seq = state_sequence_tokens(turn.state)
            seq_ids = state_vocab.ids(seq)
            examples.append(TrainingExample(
                history_ids=text_vocab.ids(tokenize(" ".join(history))),
                state_ids=text_vocab.ids(tokenize(turn.state)),
                decoder_prev_ids=[state_vocab.id(BOS)] + seq_ids,
                decoder_target_ids=seq_ids + [state_vocab.id(EOS)],
                gold_intent=USER_INTENTS.index(turn.intent),
                gold_index=gold_index,
                gold_pid=dialog.goal_id,
                cand_pids=pids,
                cand_profile_ids=prof_ids,
                cand_attr_ids=attr_ids,
            ))
    return examples
