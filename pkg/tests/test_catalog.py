import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convshop.catalog import (
    AttributeSchema,
    Catalog,
    CatalogError,
    DEFAULT_SCHEMA,
    Product,
    TfIdfIndex,
    attribute_entropy,
    filter_products,
    generate_synthetic_catalog,
    ingest_catalog,
    tfidf_candidates,
)

SCHEMA = AttributeSchema.from_dict({"roast": ["dark", "light", "medium"],
                                    "brand": ["Acme", "Best"]})


def make_catalog(rows):
    return Catalog(SCHEMA, [Product(id=i, profile=p, attributes=a) for i, p, a in rows])


class TestIngest:
    def test_single_record(self):
        lines = ['{"schema": {"roast": ["dark"]}}',
                 '{"id": "p1", "profile": "dark roast beans", "attributes": {"roast": "dark"}}']
        cat = ingest_catalog(lines)
        assert len(cat) == 1
        assert cat["p1"].value("roast") == "dark"

    def test_duplicate_id_names_id(self):
        lines = ['{"id": "p1", "attributes": {"roast": "dark"}}',
                 '{"id": "p1", "attributes": {"roast": "dark"}}']
        with pytest.raises(CatalogError, match="p1"):
            ingest_catalog(lines)

    def test_malformed_line_reports_number(self):
        with pytest.raises(CatalogError, match="line 2"):
            ingest_catalog(['{"id": "a", "attributes": {"x": "y"}}', "{broken"])

    def test_value_outside_domain(self):
        with pytest.raises(CatalogError, match="espresso"):
            make_catalog([("p1", "", {"roast": "espresso"})])

    def test_vacancy_measured_after_load(self, tmp_path):
        # [DERIVED] count vacant cells directly after load
        cat = generate_synthetic_catalog(5000, vacancy_ratio=0.3, seed=3)
        path = tmp_path / "cat.ndjson"
        cat.dump(str(path))
        again = Catalog.load(str(path))
        assert abs(again.vacancy_ratio() - 0.3) < 0.01
        assert again.vacancy_ratio() == cat.vacancy_ratio()


class TestGenerate:
    def test_zero_vacancy_fills_everything(self):
        cat = generate_synthetic_catalog(1, vacancy_ratio=0.0, seed=0)
        (p,) = list(cat)
        assert len(p.attributes) == len(cat.schema.attribute_names)

    def test_paper_vacancy_target(self):
        # [PAPER] Table "Product KB": 32.16% vacant ratio, tolerance ±1%
        cat = generate_synthetic_catalog(10_000, vacancy_ratio=0.3216, seed=7)
        assert 0.3116 <= cat.vacancy_ratio() <= 0.3316

    def test_deterministic(self, tmp_path):
        a, b = (generate_synthetic_catalog(50, vacancy_ratio=0.2, seed=9) for _ in range(2))
        pa, pb = tmp_path / "a", tmp_path / "b"
        a.dump(str(pa)); b.dump(str(pb))
        assert pa.read_bytes() == pb.read_bytes()

    def test_bad_config(self):
        with pytest.raises(CatalogError):
            generate_synthetic_catalog(0)
        with pytest.raises(CatalogError):
            generate_synthetic_catalog(5, vacancy_ratio=1.0)


class TestFilter:
    CAT = make_catalog([
        ("p1", "", {"roast": "dark"}),
        ("p2", "", {"roast": "light"}),
        ("p3", "", {}),                      # vacant roast
        ("p4", "", {"roast": "dark"}),
    ])

    def test_empty_state_returns_all(self):
        assert filter_products(self.CAT, {}) == {"p1", "p2", "p3", "p4"}

    def test_vacancy_excludes(self):
        # [DERIVED] exhaustive scan: the two dark products only
        assert filter_products(self.CAT, {"roast": ["dark"]}) == {"p1", "p4"}

    def test_unsatisfiable_conjunction(self):
        assert filter_products(self.CAT, {"roast": ["dark"], "brand": ["Best"]}) == set()

    def test_unknown_attribute(self):
        with pytest.raises(CatalogError):
            filter_products(self.CAT, {"nope": ["x"]})

    @given(st.lists(st.sampled_from(["dark", "light", "medium"]), min_size=1, max_size=2))
    def test_monotone_under_conjunction(self, values):
        base = filter_products(self.CAT, {"roast": values})
        tighter = filter_products(self.CAT, {"roast": values, "brand": ["Acme"]})
        assert tighter <= base


class TestTfIdf:
    def test_unique_match_ranks_first(self):
        cat = make_catalog([("p1", "zanzibar beans", {}), ("p2", "plain beans", {})])
        index = TfIdfIndex.build(cat)
        assert tfidf_candidates(index, ["zanzibar"], 5)[0][0] == "p1"

    def test_hand_score_and_tie_break(self):
        # [DERIVED] profiles ["a", "a b", "b"], query "b": both b-docs score
        # ln(3/2), tie broken by ascending id
        cat = make_catalog([("p1", "a", {}), ("p2", "a b", {}), ("p3", "b", {})])
        index = TfIdfIndex.build(cat)
        ranked = tfidf_candidates(index, ["b"], 5)
        assert [pid for pid, _ in ranked] == ["p2", "p3"]
        for _, score in ranked:
            assert score == pytest.approx(math.log(3 / 2))

    def test_oov_query_empty(self):
        cat = make_catalog([("p1", "a", {})])
        assert tfidf_candidates(TfIdfIndex.build(cat), ["zzz"], 5) == []

    def test_k_validation(self):
        cat = make_catalog([("p1", "a", {})])
        with pytest.raises(ValueError):
            TfIdfIndex.build(cat).candidates(["a"], 0)

    def test_ingestion_order_invariant(self):
        rows = [("p1", "a b", {}), ("p2", "b c", {}), ("p3", "c a", {})]
        i1 = TfIdfIndex.build(make_catalog(rows))
        i2 = TfIdfIndex.build(make_catalog(rows[::-1]))
        assert i1.candidates(["a", "b"], 3) == i2.candidates(["a", "b"], 3)

    def test_dump_load_roundtrip(self, tmp_path):
        cat = generate_synthetic_catalog(30, vacancy_ratio=0.2, seed=1)
        index = TfIdfIndex.build(cat)
        path = tmp_path / "idx.json"
        index.dump(str(path))
        again = TfIdfIndex.load(str(path))
        assert again.candidates(["coffee"], 10) == index.candidates(["coffee"], 10)


class TestEntropy:
    def entropy_of(self, values):
        rows = [(f"p{i}", "", {"roast": v} if v else {}) for i, v in enumerate(values)]
        cat = make_catalog(rows)
        return attribute_entropy(cat, [r[0] for r in rows], "roast")

    def test_derived_oracle(self):
        # [DERIVED] [light, light, dark, medium] → 1.5 bits
        assert self.entropy_of(["light", "light", "dark", "medium"]) == pytest.approx(1.5)

    def test_degenerate(self):
        assert self.entropy_of(["dark", "dark", "dark"]) == 0.0

    def test_all_vacant(self):
        assert self.entropy_of([None, None]) == 0.0

    def test_unknown_attr(self):
        cat = make_catalog([("p1", "", {})])
        with pytest.raises(CatalogError):
            attribute_entropy(cat, ["p1"], "bogus")

    @settings(max_examples=50)
    @given(st.lists(st.sampled_from(["dark", "light", "medium"]), min_size=1, max_size=12))
    def test_upper_bound(self, values):
        h = self.entropy_of(values)
        assert h <= math.log2(len(set(values))) + 1e-12


def test_schema_validation():
    with pytest.raises(CatalogError):
        AttributeSchema.from_dict({})
    with pytest.raises(CatalogError):
        AttributeSchema.from_dict({"a": []})


def test_default_schema_shape():
    assert len(DEFAULT_SCHEMA.attribute_names) == 8
    assert all(DEFAULT_SCHEMA.value_domain[a] for a in DEFAULT_SCHEMA.attribute_names)
