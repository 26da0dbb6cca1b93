import pytest

from hybridplan import workloads
from hybridplan.errors import NoKnownQueriesError, UndefinedSimilarityError, UnparseableQueryError
from hybridplan.similarity import StructuralSignature, cosine_similarity, extract_signature, nearest_known, tokenize

S = StructuralSignature


def test_simple_select():
    assert extract_signature("SELECT a, b FROM t1", 4) == S(1, 2, 0, 4)


def test_join_with_subquery():
    sql = "SELECT * FROM t1 JOIN t2 ON t1.x=t2.x WHERE t1.y IN (SELECT y FROM t3)"
    assert extract_signature(sql, 9) == S(3, 3, 1, 9)


def test_not_a_select():
    with pytest.raises(UnparseableQueryError):
        extract_signature("DROP TABLE t")
    with pytest.raises(UnparseableQueryError):
        extract_signature("   ")
    with pytest.raises(UnparseableQueryError):
        extract_signature("SELECT a FROM t WHERE b = #")


def test_aliases_and_functions_are_not_columns():
    sql = "SELECT SUM(s.amt) AS total, c.name n FROM sales s, cust c WHERE s.cid = c.id ORDER BY total"
    assert extract_signature(sql) == S(2, 4, 0, 0)  # amt, name, cid, id


def test_comma_from_list_and_nested_subqueries():
    sql = ("SELECT a FROM t1, t2 WHERE a IN (SELECT b FROM t3 WHERE c > (SELECT MAX(c) FROM t4)) "
           "AND EXISTS (SELECT 1 FROM t1)")
    sig = extract_signature(sql)
    assert (sig.n_tables, sig.n_subqueries) == (4, 3)
    assert sig.n_columns == 3


def test_tokenize_strings_and_quoted_identifiers():
    toks = tokenize("select \"My Col\" from t where x = 'it''s'")
    assert ("kw", "SELECT") in toks and ("ident", "My Col") in toks and ("str", "'it''s'") in toks


def test_catalog_signatures_are_distinct():
    reg = workloads.registry_for()
    assert len({tuple(v.values()) for v in reg.values()}) == 5


def test_cosine_examples():
    a = S(2, 5, 1, 10)
    assert cosine_similarity(a, a) == pytest.approx(1.0)
    assert cosine_similarity(S(1, 0, 0, 0), S(0, 1, 0, 0)) == 0.0
    assert cosine_similarity(a, S(4, 10, 2, 20)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(UndefinedSimilarityError):
        cosine_similarity(S(0, 0, 0, 0), a)


def test_nearest_known_exact_member_and_ties():
    reg = {"b": S(1, 2, 0, 3), "a": S(2, 4, 0, 6), "c": S(9, 0, 0, 1)}
    assert nearest_known(S(1, 2, 0, 3), reg) == ("a", pytest.approx(1.0))
    assert nearest_known(S(9, 0, 0, 1), {"c": S(9, 0, 0, 1), "d": S(0, 1, 0, 0)})[0] == "c"
    with pytest.raises(NoKnownQueriesError):
        nearest_known(S(1, 1, 1, 1), {})


def test_nearest_known_accepts_dicts():
    reg = {"x": S(1, 1, 0, 0).to_dict()}
    assert nearest_known(S(2, 2, 0, 0), reg) == ("x", pytest.approx(1.0))


def test_nearest_known_brute_force():
    reg = {k: S.from_dict(v) for k, v in workloads.registry_for().items()}
    keys = sorted(reg)
    for i, k in enumerate(keys):
        a, b = reg[k].vector(), reg[keys[(i + 1) % len(keys)]].vector()
        probe = S(*(int(round((x + y) / 2)) for x, y in zip(a, b)))
        scores = {q: cosine_similarity(probe, reg[q]) for q in keys}
        best = max(scores.values())
        expected = min(q for q in keys if scores[q] == best)
        assert nearest_known(probe, reg) == (expected, best)


def test_signature_validation():
    with pytest.raises(ValueError):
        S(-1, 0, 0, 0)
    assert S.from_dict(S(1, 2, 3, 4).to_dict()) == S(1, 2, 3, 4)
