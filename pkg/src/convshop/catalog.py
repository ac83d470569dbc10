"""Product knowledge base.

Holds the attribute schema, the products (with possibly vacant attribute
cells), a tf-idf inverted index over product text profiles, attribute
filtering, and per-attribute value entropy over candidate sets. The
catalog and its index are immutable after build.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .text import tokenize, value_tokens

VACANT = None  # vacant attribute cells are simply absent from Product.attributes


class CatalogError(ValueError):
    """Malformed records, duplicate ids, or out-of-domain values."""


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute names with their permitted value sets."""

    attribute_names: tuple[str, ...]
    value_domain: dict[str, frozenset[str]]

    def __post_init__(self):
        if len(set(self.attribute_names)) != len(self.attribute_names):
            raise CatalogError("duplicate attribute names in schema")
        if not self.attribute_names:
            raise CatalogError("empty schema")
        for name in self.attribute_names:
            if not self.value_domain.get(name):
                raise CatalogError(f"attribute {name!r} has an empty value domain")

    @classmethod
    def from_dict(cls, domains: dict[str, list[str]]) -> "AttributeSchema":
        return cls(
            attribute_names=tuple(domains),
            value_domain={k: frozenset(v) for k, v in domains.items()},
        )

    def to_dict(self) -> dict[str, list[str]]:
        return {k: sorted(self.value_domain[k]) for k in self.attribute_names}


@dataclass(frozen=True)
class Product:
    id: str
    profile: str
    attributes: dict[str, str]  # vacant attributes are absent keys

    def value(self, attr: str):
        return self.attributes.get(attr, VACANT)


class Catalog:
    """Immutable product collection validated against a schema."""

    def __init__(self, schema: AttributeSchema, products: list[Product]):
        self.schema = schema
        self.products: dict[str, Product] = {}
        for p in products:
            if p.id in self.products:
                raise CatalogError(f"duplicate product id {p.id!r}")
            for attr, val in p.attributes.items():
                if attr not in schema.value_domain:
                    raise CatalogError(f"product {p.id!r}: unknown attribute {attr!r}")
                if val not in schema.value_domain[attr]:
                    raise CatalogError(
                        f"product {p.id!r}: value {val!r} outside domain of {attr!r}"
                    )
            self.products[p.id] = p

    def __len__(self):
        return len(self.products)

    def __iter__(self):
        return iter(self.products.values())

    def __getitem__(self, pid: str) -> Product:
        return self.products[pid]

    def __contains__(self, pid: str) -> bool:
        return pid in self.products

    def vacancy_ratio(self) -> float:
        total = len(self.products) * len(self.schema.attribute_names)
        filled = sum(len(p.attributes) for p in self.products.values())
        return 1.0 - filled / total if total else 0.0

    # -- serialization ----------------------------------------------------

    def dump(self, path: str) -> None:
        """Write schema + one product record per line (vacant = absent key)."""
        with open(path, "w") as fh:
            fh.write(json.dumps({"schema": self.schema.to_dict()}) + "\n")
            for p in self.products.values():
                fh.write(
                    json.dumps({"id": p.id, "profile": p.profile, "attributes": p.attributes})
                    + "\n"
                )

    @classmethod
    def load(cls, path: str) -> "Catalog":
        with open(path) as fh:
            return ingest_catalog(fh)


def ingest_catalog(lines, schema: AttributeSchema | None = None) -> Catalog:
    """Build a catalog from line-delimited JSON product records.

    A leading {"schema": {...}} line declares the schema; otherwise one must
    be supplied or it is inferred from the observed values.
    """
    products: list[Product] = []
    records: list[dict] = []
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"line {lineno}: malformed record: {exc}") from exc
        if "schema" in rec and "id" not in rec:
            if schema is None:
                schema = AttributeSchema.from_dict(rec["schema"])
            continue
        if not isinstance(rec, dict) or "id" not in rec:
            raise CatalogError(f"line {lineno}: record missing 'id'")
        records.append(rec)

    if schema is None:
        observed: dict[str, set[str]] = defaultdict(set)
        for rec in records:
            for attr, val in rec.get("attributes", {}).items():
                observed[attr].add(val)
        if not observed:
            raise CatalogError("cannot infer schema: no attributes observed")
        schema = AttributeSchema(
            attribute_names=tuple(sorted(observed)),
            value_domain={k: frozenset(v) for k, v in observed.items()},
        )

    for rec in records:
        products.append(
            Product(
                id=str(rec["id"]),
                profile=str(rec.get("profile", "")),
                attributes=dict(rec.get("attributes", {})),
            )
        )
    return Catalog(schema, products)


# -- synthetic generation --------------------------------------------------

DEFAULT_SCHEMA = AttributeSchema.from_dict(
    {
        "item_type": ["instant-coffee", "ground-coffee", "whole-bean", "coffee-pods", "cold-brew", "espresso"],
        "flavor": ["vanilla", "hazelnut", "caramel", "mocha", "plain", "pumpkin-spice"],
        "roast_type": ["light roast", "medium roast", "dark roast", "french roast", "blonde roast"],
        "brand": ["Folgers", "Lavazza", "Peets", "Maxwell", "Illy", "Starbucks", "Dunkin"],
        "size": ["small", "medium", "large", "family-pack"],
        "origin": ["colombia", "brazil", "ethiopia", "sumatra", "guatemala"],
        "caffeine": ["regular", "decaf", "half-caff"],
        "pack_type": ["bag", "tin", "box", "packets"],
    }
)

# Merchandising copy often phrases an attribute without naming its canonical
# value ("bold intense char" for a dark roast). These surface variants create
# the text/structure lexical gap the hybrid search is designed to bridge:
# a token matcher cannot link them to the canonical value, but the structured
# attribute cell still carries it. Brands stay literal; proper nouns do not
# paraphrase naturally.
VALUE_VARIANTS = {
    "instant-coffee": "soluble granules",
    "ground-coffee": "fine grinds",
    "whole-bean": "unground beans",
    "coffee-pods": "single serve capsules",
    "cold-brew": "slow steeped concentrate",
    "espresso": "barista shot blend",
    "vanilla": "custard note",
    "hazelnut": "nutty praline",
    "caramel": "buttery toffee",
    "mocha": "chocolatey blend",
    "plain": "unflavored",
    "pumpkin-spice": "autumn harvest notes",
    "light roast": "delicately toasted",
    "medium roast": "balanced toasting",
    "dark roast": "bold intense char",
    "french roast": "continental char",
    "blonde roast": "pale golden toast",
    "small": "petite",
    "medium": "mid sized",
    "large": "big",
    "family-pack": "bulk bundle",
    "colombia": "andean grown",
    "brazil": "santos grown",
    "ethiopia": "african highland",
    "sumatra": "indonesian island",
    "guatemala": "central american",
    "regular": "fully caffeinated",
    "decaf": "caffeine free",
    "half-caff": "reduced strength",
    "bag": "pouch",
    "tin": "canister",
    "box": "carton",
    "packets": "single sachets",
}

_PROFILE_FILLER = [
    "great for busy mornings",
    "smooth and rich taste",
    "a customer favorite",
    "freshly sealed for aroma",
    "perfect with milk or black",
    "crafted in small batches",
    "award winning blend",
    "ideal for the office",
]


def generate_synthetic_catalog(
    n_products: int,
    schema: AttributeSchema = DEFAULT_SCHEMA,
    vacancy_ratio: float = 0.0,
    profile_mention_prob: float = 0.7,
    profile_variant_prob: float = 0.0,
    seed: int = 0,
) -> Catalog:
    """Deterministically generate a catalog.

    Every product gets a true value for every attribute; `vacancy_ratio`
    controls how often the structured cell is masked. The text profile is
    written from the true values (each mentioned with `profile_mention_prob`),
    so text can carry signal the structured side lost to vacancy. With
    `profile_variant_prob`, a mention is phrased as its `VALUE_VARIANTS`
    surface instead of the canonical value, opening a lexical gap between
    queries and profiles that only non-literal matching can cross.
    """
    if not (0 <= vacancy_ratio < 1):
        raise CatalogError("vacancy_ratio must be in [0, 1)")
    if n_products < 1:
        raise CatalogError("n_products must be >= 1")
    rng = random.Random(seed)
    products = []
    for i in range(n_products):
        true_vals = {
            attr: rng.choice(sorted(schema.value_domain[attr]))
            for attr in schema.attribute_names
        }
        attributes = {
            attr: val for attr, val in true_vals.items() if rng.random() >= vacancy_ratio
        }
        mentioned = []
        for attr, val in true_vals.items():
            if rng.random() >= profile_mention_prob:
                continue
            if (profile_variant_prob > 0 and val in VALUE_VARIANTS
                    and rng.random() < profile_variant_prob):
                mentioned.append(VALUE_VARIANTS[val])
            else:
                mentioned.append(val.replace("-", " "))
        filler = rng.sample(_PROFILE_FILLER, k=2)
        profile = " ".join(mentioned + [filler[0], "coffee", filler[1]])
        products.append(Product(id=f"P{i:05d}", profile=profile, attributes=attributes))
    return Catalog(schema, products)


# -- filtering & entropy ----------------------------------------------------

def filter_products(catalog: Catalog, state_slots: dict[str, list[str]]) -> set[str]:
    """Ids of products matching every state constraint.

    Strict semantics: a vacant cell never matches, so vacancy shrinks the
    rule-search result set (the recall loss the hybrid search compensates).
    """
    for attr in state_slots:
        if attr not in catalog.schema.value_domain:
            raise CatalogError(f"unknown attribute in state: {attr!r}")
    result = set()
    for p in catalog:
        ok = True
        for attr, values in state_slots.items():
            if p.value(attr) not in values:
                ok = False
                break
        if ok:
            result.add(p.id)
    return result


def attribute_entropy(catalog: Catalog, product_ids, attr: str) -> float:
    """Shannon entropy (bits) of non-vacant values of `attr` over the given products."""
    if attr not in catalog.schema.value_domain:
        raise CatalogError(f"unknown attribute: {attr!r}")
    counts = Counter(
        catalog[pid].value(attr) for pid in product_ids if catalog[pid].value(attr) is not VACANT
    )
    total = sum(counts.values())
    if total == 0:
        return 0.0
    # fsum: exact, so the result is independent of the iteration order of
    # `product_ids` (often a set) — near-ties must break identically everywhere
    return -math.fsum((c / total) * math.log2(c / total) for c in counts.values())


def profile_spotted_values(catalog: Catalog, product) -> dict[str, str]:
    """Attribute values mentioned in the product's text profile.

    Longest token spans win and consumed positions are not reused, so
    "medium roast" is not also read as size "medium". VALUE_VARIANTS
    surfaces ("bold intense char") count as mentions of their value."""
    toks = tokenize(product.profile)
    matches = []
    for attr in catalog.schema.attribute_names:
        for value in catalog.schema.value_domain[attr]:
            surfaces = [value_tokens(value)]
            if value in VALUE_VARIANTS:
                surfaces.append(tuple(tokenize(VALUE_VARIANTS[value])))
            for vt in surfaces:
                n = len(vt)
                for i in range(len(toks) - n + 1):
                    if tuple(toks[i : i + n]) == vt:
                        matches.append((n, i, attr, value))
    spotted: dict[str, str] = {}
    used: set[int] = set()
    for n, i, attr, value in sorted(matches, key=lambda m: (-m[0], m[1])):
        span = set(range(i, i + n))
        if span & used or attr in spotted:
            continue
        used |= span
        spotted[attr] = value
    return spotted


# -- tf-idf index ------------------------------------------------------------

@dataclass
class TfIdfIndex:
    """Inverted index over product profiles with raw-tf / ln(N/df) scoring."""

    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_count: int = 0

    @classmethod
    def build(cls, catalog: Catalog) -> "TfIdfIndex":
        postings: dict[str, list[tuple[str, int]]] = defaultdict(list)
        for p in catalog:
            for tok, tf in sorted(Counter(tokenize(p.profile)).items()):
                postings[tok].append((p.id, tf))
        return cls(postings=dict(postings), doc_count=len(catalog))

    def df(self, token: str) -> int:
        return len(self.postings.get(token, ()))

    def candidates(self, query_tokens: list[str], k: int) -> list[tuple[str, float]]:
        """Top-k (product id, score), score descending, ties by ascending id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        scores: dict[str, float] = defaultdict(float)
        for tok in query_tokens:
            posting = self.postings.get(tok)
            if not posting:
                continue
            idf = math.log(self.doc_count / len(posting))
            for pid, tf in posting:
                scores[pid] += tf * idf
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        return ranked[:k]

    def dump(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump({"doc_count": self.doc_count, "postings": self.postings}, fh)

    @classmethod
    def load(cls, path: str) -> "TfIdfIndex":
        with open(path) as fh:
            data = json.load(fh)
        postings = {t: [(pid, tf) for pid, tf in plist] for t, plist in data["postings"].items()}
        return cls(postings=postings, doc_count=data["doc_count"])


def tfidf_candidates(index: TfIdfIndex, query_tokens: list[str], k: int) -> list[tuple[str, float]]:
    return index.candidates(query_tokens, k)
