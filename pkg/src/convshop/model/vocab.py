"""Token vocabularies with a reserved UNK id."""

from __future__ import annotations

UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"


class Vocab:
    def __init__(self, tokens, specials=(UNK,)):
        self.itos: list[str] = list(dict.fromkeys(list(specials) + list(tokens)))
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def id(self, token: str) -> int:
        return self.stoi.get(token, self.stoi[UNK])

    def ids(self, tokens) -> list[int]:
        return [self.id(t) for t in tokens]

    def token(self, idx: int) -> str:
        return self.itos[idx]
