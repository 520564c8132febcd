#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" In-memory evaluation of the SQL subset over a PropertyTable

Evaluation order: WHERE, grouping, HAVING, ORDER BY, DISTINCT, LIMIT.

Missing cells behave like SQL NULL:

    - a comparison, LIKE or IN with a missing operand is unknown
    - AND, OR and NOT use three-valued (Kleene) logic; WHERE and HAVING keep
      a row only when the condition is true
    - aggregates skip missing cells; COUNT(*) counts rows; SUM, AVG, MIN and
      MAX over no values are missing, COUNT is 0
    - missing values sort last in both directions

Text compares case-insensitively. Comparing text with a number succeeds
only when the text is a number; otherwise it is an evaluation error.

.. codeauthor: entitytables developers
"""
import datetime
import json
import logging
import math
import re
from dataclasses import dataclass
from typing import List

import pandas as pd

from . import entityerror as ee
from .sqlsubset import (Agg, And, Col, Compare, InList, IsNull, Like, Lit, Not,
                        Or, Select, Star)
from .values import MISSING, ColumnKind, format_value, parse_date

logger = logging.getLogger(__name__)

_numeric_text = re.compile(r'\s*[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\s*$')


@dataclass
class ResultSet:
    """ Rectangular query result; ``scalar`` is set for a 1x1 result. """
    columns: List[str]
    rows: List[list]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError('result rows must match the column count')

    def __len__(self):
        return len(self.rows)

    @property
    def is_scalar(self):
        return len(self.columns) == 1 and len(self.rows) == 1

    @property
    def scalar(self):
        return self.rows[0][0] if self.is_scalar else None

    def column(self, j=0):
        return [row[j] for row in self.rows]

    def to_csv(self):
        df = pd.DataFrame([[format_value(v) for v in row]
                           for row in self.rows], columns=self.columns)
        return df.to_csv(index=False, lineterminator='\n')

    def to_json(self):
        """ ``{"scalar": v}`` for a 1x1 result, else columns and rows. """
        def cell(v):
            if v is MISSING:
                return None
            if isinstance(v, datetime.date):
                return v.isoformat()
            return v
        if self.is_scalar:
            doc = {'scalar': cell(self.scalar)}
        else:
            doc = {'columns': self.columns,
                   'rows': [[cell(v) for v in row] for row in self.rows]}
        return json.dumps(doc, ensure_ascii=False)


# --- three-valued logic; None is unknown
def and3(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def or3(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def not3(a):
    return None if a is None else not a


def _is_null(v):
    return v is MISSING or v is None


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _comparable(a, b):
    """ Bring two non-null values to a common comparable form. """
    if _is_number(a) and _is_number(b):
        return a, b
    if isinstance(a, str) and isinstance(b, str):
        return a.casefold(), b.casefold()
    if isinstance(a, bool) and isinstance(b, bool):
        return a, b
    if isinstance(a, datetime.date) or isinstance(b, datetime.date):
        da = a if isinstance(a, datetime.date) else _date_or_none(a)
        db = b if isinstance(b, datetime.date) else _date_or_none(b)
        if da is not None and db is not None:
            return da, db
    if _is_number(a) and isinstance(b, str) and _numeric_text.match(b):
        return a, float(b)
    if isinstance(a, str) and _is_number(b) and _numeric_text.match(a):
        return float(a), b
    raise ee.SqlEvaluationError(f"cannot compare {a!r} with {b!r}")


def _date_or_none(v):
    return parse_date(v) if isinstance(v, str) else None


def compare(op, a, b):
    """ Three-valued comparison of two cell values. """
    if _is_null(a) or _is_null(b):
        return None
    a, b = _comparable(a, b)
    if op in ('=', '!='):
        eq = a == b
        return eq if op == '=' else not eq
    if isinstance(a, bool):
        raise ee.SqlEvaluationError(f"cannot order booleans with {op}")
    if op == '<':
        return a < b
    if op == '<=':
        return a <= b
    if op == '>':
        return a > b
    if op == '>=':
        return a >= b
    raise ee.SqlEvaluationError(f"unknown operator {op}")


def like_regex(pattern):
    parts = []
    for ch in pattern:
        if ch == '%':
            parts.append('.*')
        elif ch == '_':
            parts.append('.')
        else:
            parts.append(re.escape(ch))
    return re.compile(''.join(parts), re.IGNORECASE | re.DOTALL)


def like(value, pattern):
    if _is_null(value):
        return None
    text = value if isinstance(value, str) else format_value(value)
    return like_regex(pattern.casefold()).fullmatch(text.casefold()) \
        is not None


def value_key(v):
    """ Equality key for grouping and DISTINCT; text folds case. """
    if v is MISSING or v is None:
        return (0, None)
    if isinstance(v, str):
        return (1, v.casefold())
    if isinstance(v, bool):
        return (2, v)
    if _is_number(v):
        return (3, v)
    return (4, v)


def sort_key(v):
    """ Ordering key for non-null values; kinds order number < date < text. """
    if isinstance(v, bool):
        return (0, int(v))
    if _is_number(v):
        return (0, v)
    if isinstance(v, datetime.date):
        return (1, v.toordinal())
    return (2, str(v).casefold())


def aggregate(agg, values, nrows):
    """ Evaluate ``agg`` over one group's column values. """
    if agg.arg is None:
        return nrows
    present = [v for v in values if not _is_null(v)]
    if agg.distinct:
        seen = {}
        for v in present:
            seen.setdefault(value_key(v), v)
        present = list(seen.values())
    if agg.func == 'COUNT':
        return len(present)
    if not present:
        return MISSING
    if agg.func in ('SUM', 'AVG'):
        if not all(_is_number(v) for v in present):
            raise ee.SqlEvaluationError(f"{agg.func} over non-numeric values")
        if agg.func == 'SUM':
            if all(isinstance(v, int) for v in present):
                return sum(present)
            return math.fsum(present)
        return math.fsum(present) / len(present)
    best = present[0]
    for v in present[1:]:
        a, b = _comparable(v, best)
        if (agg.func == 'MIN' and a < b) or (agg.func == 'MAX' and a > b):
            best = v
    return best


# --- validation
def _walk(node):
    yield node
    for attr in ('left', 'right', 'operand'):
        child = getattr(node, attr, None)
        if child is not None:
            yield from _walk(child)
    if isinstance(node, Agg) and node.arg is not None:
        yield node.arg


def _columns_in(node):
    return [n for n in _walk(node) if isinstance(n, Col)]


def _has_agg(node):
    return any(isinstance(n, Agg) for n in _walk(node))


def validate(ast: Select, schema):
    """ Check ``ast`` against ``schema``.

    Raises:
        SqlSemanticError: unknown column, aggregate in WHERE, a selected
                          column that is neither grouped nor aggregated, or
                          SUM/AVG over a non-numeric column
    """
    aliases = {i.alias.casefold() for i in ast.items if i.alias}

    def known(col, allow_alias=False):
        if schema.has_column(col.name):
            return
        if allow_alias and col.name.casefold() in aliases:
            return
        raise ee.SqlSemanticError(f"unknown column '{col.name}'")

    for item in ast.items:
        for col in _columns_in(item.expr):
            known(col)
        if isinstance(item.expr, Agg) and item.expr.func in ('SUM', 'AVG'):
            kind = schema.column(item.expr.arg.name).kind
            if not kind.is_numeric:
                raise ee.SqlSemanticError(
                    f"{item.expr.func} over {kind.value} column "
                    f"'{item.expr.arg.name}'")
    if ast.where is not None:
        if _has_agg(ast.where):
            raise ee.SqlSemanticError('aggregate in WHERE')
        for col in _columns_in(ast.where):
            known(col)
    for col in ast.group_by:
        known(col)
    grouped = bool(ast.group_by) or ast.has_aggregates \
        or (ast.having is not None)
    group_keys = {schema.index(c.name) for c in ast.group_by}
    if grouped:
        for item in ast.items:
            if isinstance(item.expr, Star):
                raise ee.SqlSemanticError('SELECT * with grouping')
            if isinstance(item.expr, Col) \
                    and schema.index(item.expr.name) not in group_keys:
                raise ee.SqlSemanticError(
                    f"column '{item.expr.name}' is neither grouped nor "
                    f"aggregated")
    if ast.having is not None:
        for col in _columns_in(ast.having):
            known(col, allow_alias=True)
            if not _is_alias(col, ast) and not _inside_agg(col, ast.having) \
                    and schema.index(col.name) not in group_keys:
                raise ee.SqlSemanticError(
                    f"HAVING column '{col.name}' is not grouped")
    for key in ast.order_by:
        for col in _columns_in(key.expr):
            known(col, allow_alias=True)
            if grouped and not _is_alias(col, ast) \
                    and not isinstance(key.expr, Agg) \
                    and schema.index(col.name) not in group_keys:
                raise ee.SqlSemanticError(
                    f"ORDER BY column '{col.name}' is not grouped")


def _is_alias(col, ast):
    return any(i.alias and i.alias.casefold() == col.name.casefold()
               for i in ast.items)


def _inside_agg(col, node):
    return any(isinstance(n, Agg) and n.arg is col for n in _walk(node))


# --- evaluation
class _Evaluator():

    def __init__(self, ast, table):
        self.ast = ast
        self.schema = table.schema
        self.table = table
        self.aliases = {}
        for item in ast.items:
            if item.alias:
                self.aliases.setdefault(item.alias.casefold(), item.expr)

    def cell(self, row, name):
        return row[self.schema.index(name)]

    def value(self, node, row, group=None):
        """ Value of an operand; ``group`` is the list of rows when grouped.
        """
        if isinstance(node, Lit):
            return MISSING if node.value is None else node.value
        if isinstance(node, Agg):
            if group is None:
                raise ee.SqlSemanticError('aggregate outside a grouping')
            values = ([] if node.arg is None
                      else [self.cell(r, node.arg.name) for r in group])
            return aggregate(node, values, len(group))
        if isinstance(node, Col):
            if self.schema.has_column(node.name):
                return self.cell(row, node.name) if row is not None \
                    else MISSING
            expr = self.aliases.get(node.name.casefold())
            if expr is not None:
                return self.value(expr, row, group)
            raise ee.SqlSemanticError(f"unknown column '{node.name}'")
        raise ee.SqlSemanticError(f"unexpected operand {node!r}")

    def truth(self, node, row, group=None):
        if isinstance(node, And):
            left = self.truth(node.left, row, group)
            if left is False:
                return False
            return and3(left, self.truth(node.right, row, group))
        if isinstance(node, Or):
            left = self.truth(node.left, row, group)
            if left is True:
                return True
            return or3(left, self.truth(node.right, row, group))
        if isinstance(node, Not):
            return not3(self.truth(node.operand, row, group))
        if isinstance(node, Compare):
            return compare(node.op, self.value(node.left, row, group),
                           self.value(node.right, row, group))
        if isinstance(node, Like):
            result = like(self.value(node.operand, row, group), node.pattern)
            return not3(result) if node.negated else result
        if isinstance(node, InList):
            v = self.value(node.operand, row, group)
            result = False
            for lit in node.values:
                result = or3(result, compare('=', v, self.value(lit, row)))
                if result is True:
                    break
            return not3(result) if node.negated else result
        if isinstance(node, IsNull):
            result = _is_null(self.value(node.operand, row, group))
            return not result if node.negated else result
        raise ee.SqlSemanticError(f"not a condition: {node!r}")

    def run(self):
        ast = self.ast
        rows = self.table.rows
        if ast.where is not None:
            rows = [r for r in rows if self.truth(ast.where, r) is True]
        grouped = bool(ast.group_by) or ast.has_aggregates \
            or ast.having is not None

        # units are (representative row, group rows or None)
        if grouped:
            groups = {}
            for r in rows:
                key = tuple(value_key(self.cell(r, c.name))
                            for c in ast.group_by)
                groups.setdefault(key, []).append(r)
            if not ast.group_by and not groups:
                groups[()] = []
            units = [(g[0] if g else None, g) for g in groups.values()]
            if ast.having is not None:
                units = [u for u in units
                         if self.truth(ast.having, u[0], u[1]) is True]
        else:
            units = [(r, None) for r in rows]

        for key in reversed(ast.order_by):
            units = self._sorted(units, key)

        if ast.is_star:
            columns = list(self.schema.column_names)
            out = [list(r) for r, _ in units]
        else:
            columns = [item.label for item in ast.items]
            out = [[self.value(item.expr, r, g) for item in ast.items]
                   for r, g in units]

        if ast.distinct:
            seen = set()
            unique = []
            for row in out:
                k = tuple(value_key(v) for v in row)
                if k not in seen:
                    seen.add(k)
                    unique.append(row)
            out = unique
        if ast.limit is not None:
            out = out[:ast.limit]
        return ResultSet(columns, out)

    def _sorted(self, units, key):
        keyed = [(self.value(key.expr, r, g), (r, g)) for r, g in units]
        present = [(v, u) for v, u in keyed if not _is_null(v)]
        absent = [u for v, u in keyed if _is_null(v)]
        present.sort(key=lambda p: sort_key(p[0]), reverse=key.descending)
        return [u for _, u in present] + absent


def execute_sql(ast: Select, table) -> ResultSet:
    """ Evaluate ``ast`` over ``table``.

    Raises:
        SqlSemanticError: ``ast`` does not fit the table's schema
        SqlEvaluationError: a comparison or aggregate hits a type mismatch
    """
    validate(ast, table.schema)
    result = _Evaluator(ast, table).run()
    logger.debug("query returned %d rows", len(result))
    return result


def numeric_column(table, name):
    """ The non-missing numbers of column ``name``. """
    kind = table.schema.column(name).kind
    if kind not in (ColumnKind.integer, ColumnKind.decimal):
        return [v for v in table.column(name) if _is_number(v)]
    return [v for v in table.column(name) if not _is_null(v)]
