"""Structural signatures of SQL text and cosine nearest-neighbour routing.

The tokenizer covers a pragmatic SELECT subset: FROM/JOIN lists with
aliases, WHERE/ON/GROUP BY/HAVING/ORDER BY predicates, IN/EXISTS and nested
parenthesized subqueries.
"""
from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass

from .errors import NoKnownQueriesError, UndefinedSimilarityError, UnparseableQueryError

# Scores closer than this are treated as ties so that float rounding never
# overrides the smallest-id rule.
TIE_TOL = 1e-12


@dataclass(frozen=True)
class StructuralSignature:
    n_tables: int
    n_columns: int
    n_subqueries: int
    n_map_tasks: int

    def __post_init__(self):
        if min(self.n_tables, self.n_columns, self.n_subqueries, self.n_map_tasks) < 0:
            raise ValueError("signature fields must be >= 0")

    def vector(self) -> tuple[float, float, float, float]:
        return (float(self.n_tables), float(self.n_columns), float(self.n_subqueries), float(self.n_map_tasks))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StructuralSignature":
        return cls(int(d["n_tables"]), int(d["n_columns"]), int(d["n_subqueries"]), int(d["n_map_tasks"]))


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|--[^\n]*)
    |(?P<str>'(?:[^']|'')*')
    |(?P<qid>"[^"]+"|`[^`]+`)
    |(?P<num>\d+(?:\.\d+)?)
    |(?P<ident>[A-Za-z_][A-Za-z0-9_$]*(?:\.(?:[A-Za-z_][A-Za-z0-9_$]*|\*))*)
    |(?P<star>\*)
    |(?P<op><>|<=|>=|!=|\|\||[=<>+\-/%])
    |(?P<punct>[(),;.])
    """,
    re.VERBOSE,
)

KEYWORDS = frozenset("""
    SELECT FROM WHERE GROUP BY ORDER HAVING LIMIT OFFSET JOIN INNER LEFT RIGHT FULL OUTER CROSS
    NATURAL ON USING AS AND OR NOT IN EXISTS IS NULL LIKE BETWEEN CASE WHEN THEN ELSE END DISTINCT
    ALL ANY SOME ASC DESC UNION INTERSECT EXCEPT WITH TRUE FALSE INTERVAL CAST OVER PARTITION
    ROLLUP CUBE NULLS FIRST LAST
""".split())

_JOIN_WORDS = {"JOIN"}
_CLAUSE_FOR = {"SELECT": "select", "WHERE": "where", "HAVING": "where", "ON": "where",
               "GROUP": "group", "ORDER": "group", "LIMIT": "other", "OFFSET": "other",
               "USING": "where", "UNION": "other", "INTERSECT": "other", "EXCEPT": "other"}
_COLUMN_CLAUSES = {"select", "where", "group"}


def tokenize(text: str) -> list[tuple[str, str]]:
    """Split ``text`` into ``(kind, value)`` pairs; keywords are upper-cased."""
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise UnparseableQueryError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        kind = m.lastgroup
        value = m.group()
        if kind == "ws":
            continue
        if kind == "qid":
            kind, value = "ident", value[1:-1]
        if kind == "ident" and value.upper() in KEYWORDS:
            kind, value = "kw", value.upper()
        out.append((kind, value))
    return out


def _unqualified(name: str) -> str:
    return name.rsplit(".", 1)[-1].lower()


def extract_signature(sql_text: str, n_map_tasks: int = 0) -> StructuralSignature:
    """Count distinct tables, distinct columns and parenthesized subqueries.

    Tables are identifiers introduced by FROM, JOIN or a comma in a FROM
    list, subqueries included. Columns are distinct unqualified names used in
    SELECT lists and WHERE/ON/GROUP BY/HAVING/ORDER BY clauses; ``*`` counts
    as one column. Function names and aliases are not columns.
    """
    if not sql_text or not sql_text.strip():
        raise UnparseableQueryError("empty query text")
    tokens = tokenize(sql_text)
    if not any(k == "kw" and v == "SELECT" for k, v in tokens):
        raise UnparseableQueryError("no SELECT keyword found")

    tables: set[str] = set()
    aliases: set[str] = set()
    columns: set[str] = set()
    subqueries = 0
    clause = "other"
    expect_table = False
    prev_kind, prev_val = "", ""
    for i, (kind, val) in enumerate(tokens):
        nxt = tokens[i + 1] if i + 1 < len(tokens) else ("", "")
        if kind == "kw":
            if val == "FROM":
                clause, expect_table = "from", True
            elif val in _JOIN_WORDS:
                clause, expect_table = "from", True
            elif val in _CLAUSE_FOR:
                clause, expect_table = _CLAUSE_FOR[val], False
        elif kind == "punct" and val == "(":
            if nxt == ("kw", "SELECT"):
                subqueries += 1
            expect_table = False
        elif kind == "punct" and val == "," and clause == "from":
            expect_table = True
        elif kind == "ident":
            if clause == "from":
                if expect_table:
                    tables.add(val.lower())
                    expect_table = False
                else:
                    aliases.add(val.lower())
            elif clause in _COLUMN_CLAUSES:
                is_function = nxt == ("punct", "(")
                is_alias = prev_val == "AS" or (
                    clause == "select" and (prev_kind in ("ident", "num", "str") or prev_val == ")"))
                if is_alias:
                    aliases.add(val.lower())
                elif not is_function:
                    columns.add(_unqualified(val))
        elif kind == "star" and clause == "select":
            columns.add("*")
        prev_kind, prev_val = kind, val

    # ORDER BY and HAVING may refer back to select-list aliases.
    columns -= aliases
    return StructuralSignature(len(tables), len(columns), subqueries, int(n_map_tasks))


def cosine_similarity(a: StructuralSignature, b: StructuralSignature) -> float:
    va, vb = a.vector(), b.vector()
    na = math.sqrt(sum(x * x for x in va))
    nb = math.sqrt(sum(x * x for x in vb))
    if na == 0 or nb == 0:
        raise UndefinedSimilarityError("cosine similarity of a zero signature is undefined")
    score = sum(x * y for x, y in zip(va, vb)) / (na * nb)
    return min(1.0, max(0.0, score))


def nearest_known(sig: StructuralSignature, registry: dict) -> tuple[str, float]:
    """Most similar registered query id; ties go to the smallest id."""
    if not registry:
        raise NoKnownQueriesError("no known queries registered")
    best_id, best_score = None, -1.0
    for qid in sorted(registry):
        other = registry[qid]
        if isinstance(other, dict):
            other = StructuralSignature.from_dict(other)
        score = cosine_similarity(sig, other)
        if score > best_score + TIE_TOL:
            best_id, best_score = qid, score
    return best_id, best_score
