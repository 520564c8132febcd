#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Tokenizer, syntax tree, parser and printer for the SQL subset

Supported:

    SELECT [DISTINCT] * | item [, item ...]
    FROM table
    [WHERE condition]
    [GROUP BY column [, column ...]]
    [HAVING condition]
    [ORDER BY key [ASC|DESC] [, ...]]
    [LIMIT n]

An item is a column, a literal or an aggregate (COUNT, SUM, AVG, MIN, MAX;
COUNT(*) and COUNT(DISTINCT column)), optionally followed by AS alias.
Conditions combine comparisons (=, !=, <>, <, <=, >, >=), [NOT] LIKE,
[NOT] IN (literal, ...) and IS [NOT] NULL with AND, OR, NOT and
parentheses. Column names may be quoted with double quotes or backticks.

Anything else (JOIN, UNION, subqueries, arithmetic, scalar functions,
data modification) raises :class:`~.entityerror.UnsupportedSqlFeature`.

.. codeauthor: entitytables developers
"""
import logging
import re
from dataclasses import dataclass
from typing import Optional, Tuple, Union

from . import entityerror as ee

logger = logging.getLogger(__name__)

AGGREGATES = ('COUNT', 'SUM', 'AVG', 'MIN', 'MAX')
COMPARISONS = ('=', '!=', '<', '<=', '>', '>=')

KEYWORDS = {
    'SELECT', 'DISTINCT', 'FROM', 'WHERE', 'GROUP', 'BY', 'HAVING', 'ORDER',
    'ASC', 'DESC', 'LIMIT', 'AND', 'OR', 'NOT', 'LIKE', 'IN', 'AS', 'IS',
    'NULL', 'TRUE', 'FALSE', *AGGREGATES}

UNSUPPORTED = {
    'JOIN', 'INNER', 'LEFT', 'RIGHT', 'FULL', 'OUTER', 'CROSS', 'NATURAL',
    'ON', 'USING', 'UNION', 'INTERSECT', 'EXCEPT', 'INSERT', 'UPDATE',
    'DELETE', 'CREATE', 'DROP', 'ALTER', 'WITH', 'OVER', 'PARTITION',
    'WINDOW', 'CASE', 'EXISTS', 'BETWEEN', 'OFFSET', 'INTO', 'VALUES',
    'SET', 'CAST', 'ILIKE', 'GLOB', 'REGEXP', 'FETCH', 'TOP'}

_token_spec = [
    ('ws', r'\s+|--[^\n]*'),
    ('string', r"'(?:[^']|'')*'"),
    ('qident', r'"(?:[^"]|"")*"|`[^`]*`'),
    ('number', r'(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?'),
    ('word', r'[A-Za-z_][A-Za-z0-9_]*'),
    ('op', r'<=|>=|!=|<>|\|\||[=<>(),;*+\-/%.]'),
    ]
_token_re = re.compile('|'.join(f'(?P<{n}>{p})' for n, p in _token_spec))
_bare_ident = re.compile(r'[A-Za-z_][A-Za-z0-9_]*$')


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int

    @property
    def upper(self):
        return self.text.upper() if self.kind == 'word' else self.text


def tokenize(text):
    """ Split SQL text into Tokens, ending with an 'eof' token. """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _token_re.match(text, pos)
        if m is None:
            raise ee.SqlSyntaxError(f"unexpected character {text[pos]!r}",
                                    pos)
        kind, tok = m.lastgroup, m.group()
        if kind == 'op' and tok == '<>':
            tok = '!='
        if kind != 'ws':
            tokens.append(Token(kind, tok, pos))
        pos = m.end()
    tokens.append(Token('eof', '', len(text)))
    return tokens


# --- syntax tree
@dataclass(frozen=True)
class Col:
    name: str


@dataclass(frozen=True)
class Lit:
    value: Union[str, int, float, bool, None]


@dataclass(frozen=True)
class Star:
    pass


@dataclass(frozen=True)
class Agg:
    func: str
    arg: Optional[Col]             # None for COUNT(*)
    distinct: bool = False


@dataclass(frozen=True)
class Compare:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Like:
    operand: object
    pattern: str
    negated: bool = False


@dataclass(frozen=True)
class InList:
    operand: object
    values: Tuple[Lit, ...]
    negated: bool = False


@dataclass(frozen=True)
class IsNull:
    operand: object
    negated: bool = False


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    operand: object


@dataclass(frozen=True)
class SelectItem:
    expr: object
    alias: Optional[str] = None

    @property
    def label(self):
        return self.alias if self.alias else to_sql_expr(self.expr)


@dataclass(frozen=True)
class OrderItem:
    expr: object
    descending: bool = False


@dataclass(frozen=True)
class Select:
    items: Tuple[SelectItem, ...]
    table: str
    distinct: bool = False
    where: object = None
    group_by: Tuple[Col, ...] = ()
    having: object = None
    order_by: Tuple[OrderItem, ...] = ()
    limit: Optional[int] = None

    @property
    def is_star(self):
        return len(self.items) == 1 and isinstance(self.items[0].expr, Star)

    @property
    def has_aggregates(self):
        return any(isinstance(i.expr, Agg) for i in self.items)


@dataclass(frozen=True)
class SqlProgram:
    text: str
    ast: Select


# --- parser
class _Parser():

    def __init__(self, text):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        raise ee.SqlSyntaxError(message, tok.pos)

    def unsupported(self, tok=None):
        tok = tok or self.tok
        raise ee.UnsupportedSqlFeature(tok.upper, tok.pos)

    def at(self, *words):
        t = self.tok
        return t.kind in ('word', 'op') and t.upper in words

    def accept(self, *words):
        if self.at(*words):
            self.i += 1
            return True
        return False

    def expect(self, word):
        if not self.accept(word):
            self.check_unsupported()
            got = self.tok.text or 'end of query'
            self.error(f"expected {word}, got {got!r}")

    def check_unsupported(self):
        t = self.tok
        if t.kind == 'word' and t.upper in UNSUPPORTED:
            self.unsupported()
        if t.kind == 'op' and t.text in ('+', '-', '/', '%', '||', '.'):
            self.unsupported()

    def identifier(self, what='column'):
        t = self.tok
        if t.kind == 'qident':
            self.i += 1
            if t.text.startswith('"'):
                return t.text[1:-1].replace('""', '"')
            return t.text[1:-1]
        if t.kind == 'word':
            if t.upper in UNSUPPORTED:
                self.unsupported()
            if t.upper in KEYWORDS:
                self.error(f"expected {what} name, got keyword {t.text!r}")
            self.i += 1
            return t.text
        self.check_unsupported()
        self.error(f"expected {what} name, got {t.text or 'end of query'!r}")

    # --- statement
    def select(self):
        if self.tok.kind == 'word' and self.tok.upper in UNSUPPORTED:
            self.unsupported()
        self.expect('SELECT')
        distinct = self.accept('DISTINCT')
        items = self.select_items()
        self.expect('FROM')
        if self.at('('):
            self.i += 1
            if self.at('SELECT'):
                self.unsupported()
            self.error('expected table name')
        table = self.identifier('table')
        if self.at(','):
            raise ee.UnsupportedSqlFeature('multiple tables', self.tok.pos)
        where = having = None
        group_by = ()
        order_by = ()
        limit = None
        if self.accept('WHERE'):
            where = self.condition()
        if self.accept('GROUP'):
            self.expect('BY')
            cols = [Col(self.identifier())]
            while self.accept(','):
                cols.append(Col(self.identifier()))
            group_by = tuple(cols)
        if self.accept('HAVING'):
            having = self.condition()
        if self.accept('ORDER'):
            self.expect('BY')
            keys = [self.order_item()]
            while self.accept(','):
                keys.append(self.order_item())
            order_by = tuple(keys)
        if self.accept('LIMIT'):
            t = self.tok
            if t.kind != 'number' or not t.text.isdigit():
                self.error('LIMIT needs a non-negative integer')
            self.i += 1
            limit = int(t.text)
            if self.at(',') or self.at('OFFSET'):
                self.unsupported()
        self.accept(';')
        if self.tok.kind != 'eof':
            self.check_unsupported()
            self.error(f"unexpected {self.tok.text!r}")
        return Select(tuple(items), table, distinct, where, group_by, having,
                      order_by, limit)

    def select_items(self):
        if self.accept('*'):
            return [SelectItem(Star())]
        items = [self.select_item()]
        while self.accept(','):
            items.append(self.select_item())
        return items

    def select_item(self):
        expr = self.value()
        alias = None
        if self.accept('AS'):
            alias = self.identifier('alias')
        elif self.tok.kind == 'qident' or (self.tok.kind == 'word'
                                           and self.tok.upper not in KEYWORDS
                                           and self.tok.upper
                                           not in UNSUPPORTED):
            alias = self.identifier('alias')
        return SelectItem(expr, alias)

    def order_item(self):
        if self.tok.kind == 'number':
            raise ee.UnsupportedSqlFeature('ORDER BY position', self.tok.pos)
        expr = self.value(allow_literal=False)
        descending = False
        if self.accept('DESC'):
            descending = True
        else:
            self.accept('ASC')
        return OrderItem(expr, descending)

    # --- values
    def value(self, allow_literal=True):
        t = self.tok
        if t.kind == 'word' and t.upper in AGGREGATES:
            return self.aggregate()
        if t.kind == 'word' and self.tokens[self.i+1].text == '(' \
                and t.upper not in KEYWORDS:
            self.unsupported()
        if allow_literal and (t.kind in ('string', 'number')
                              or self.at('NULL', 'TRUE', 'FALSE', '-')):
            return self.literal()
        if self.at('('):
            if self.tokens[self.i+1].upper == 'SELECT':
                self.unsupported(self.tokens[self.i+1])
            self.error('unexpected parenthesis')
        return Col(self.identifier())

    def aggregate(self):
        func = self.tok.upper
        self.i += 1
        self.expect('(')
        distinct = self.accept('DISTINCT')
        if self.at('*'):
            if func != 'COUNT' or distinct:
                self.error(f"{func}(*) is not allowed")
            self.i += 1
            arg = None
        else:
            if self.tok.kind == 'word' and self.tokens[self.i+1].text == '(':
                self.unsupported()
            arg = Col(self.identifier())
        self.expect(')')
        return Agg(func, arg, distinct)

    def literal(self):
        t = self.tok
        if t.kind == 'string':
            self.i += 1
            return Lit(t.text[1:-1].replace("''", "'"))
        if self.accept('NULL'):
            return Lit(None)
        if self.accept('TRUE'):
            return Lit(True)
        if self.accept('FALSE'):
            return Lit(False)
        sign = -1 if self.accept('-') else 1
        t = self.tok
        if t.kind != 'number':
            self.unsupported(self.tokens[self.i-1])
        self.i += 1
        if re.fullmatch(r'\d+', t.text):
            return Lit(sign * int(t.text))
        return Lit(sign * float(t.text))

    # --- conditions
    def condition(self):
        left = self.conjunction()
        while self.accept('OR'):
            left = Or(left, self.conjunction())
        return left

    def conjunction(self):
        left = self.negation()
        while self.accept('AND'):
            left = And(left, self.negation())
        return left

    def negation(self):
        if self.accept('NOT'):
            return Not(self.negation())
        return self.predicate()

    def predicate(self):
        if self.at('('):
            if self.tokens[self.i+1].upper == 'SELECT':
                self.unsupported(self.tokens[self.i+1])
            self.i += 1
            inner = self.condition()
            self.expect(')')
            return inner
        if self.at('EXISTS'):
            self.unsupported()
        left = self.value()
        if self.tok.kind == 'op' and self.tok.text in COMPARISONS:
            op = self.tok.text
            self.i += 1
            if self.at('('):
                if self.tokens[self.i+1].upper == 'SELECT':
                    self.unsupported(self.tokens[self.i+1])
            return Compare(op, left, self.value())
        negated = self.accept('NOT')
        if self.accept('LIKE'):
            t = self.tok
            if t.kind != 'string':
                self.error('LIKE needs a string pattern')
            self.i += 1
            return Like(left, t.text[1:-1].replace("''", "'"), negated)
        if self.accept('IN'):
            self.expect('(')
            if self.at('SELECT'):
                self.unsupported()
            values = [self.literal()]
            while self.accept(','):
                values.append(self.literal())
            self.expect(')')
            return InList(left, tuple(values), negated)
        if negated:
            self.error('expected LIKE or IN after NOT')
        if self.accept('IS'):
            neg = self.accept('NOT')
            self.expect('NULL')
            return IsNull(left, neg)
        self.check_unsupported()
        self.error(f"expected a comparison, got "
                   f"{self.tok.text or 'end of query'!r}")


def parse_sql(text) -> Select:
    """ Parse one SELECT statement of the subset.

    Raises:
        SqlSyntaxError: with the character position
        UnsupportedSqlFeature: naming the first construct outside the subset
    """
    if not text or not text.strip():
        raise ee.SqlSyntaxError('empty query', 0)
    return _Parser(text).select()


# --- printer
def quote_ident(name):
    if _bare_ident.match(name) and name.upper() not in KEYWORDS \
            and name.upper() not in UNSUPPORTED:
        return name
    return '"' + name.replace('"', '""') + '"'


def _literal_sql(value):
    if value is None:
        return 'NULL'
    if value is True:
        return 'TRUE'
    if value is False:
        return 'FALSE'
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_sql_expr(node):
    """ Canonical text of an expression or condition node. """
    if isinstance(node, Col):
        return quote_ident(node.name)
    if isinstance(node, Lit):
        return _literal_sql(node.value)
    if isinstance(node, Star):
        return '*'
    if isinstance(node, Agg):
        arg = '*' if node.arg is None else to_sql_expr(node.arg)
        return f"{node.func}({'DISTINCT ' if node.distinct else ''}{arg})"
    if isinstance(node, Compare):
        return f"{to_sql_expr(node.left)} {node.op} {to_sql_expr(node.right)}"
    if isinstance(node, Like):
        neg = 'NOT ' if node.negated else ''
        return f"{to_sql_expr(node.operand)} {neg}LIKE " \
               f"{_literal_sql(node.pattern)}"
    if isinstance(node, InList):
        neg = 'NOT ' if node.negated else ''
        vals = ', '.join(to_sql_expr(v) for v in node.values)
        return f"{to_sql_expr(node.operand)} {neg}IN ({vals})"
    if isinstance(node, IsNull):
        neg = 'NOT ' if node.negated else ''
        return f"{to_sql_expr(node.operand)} IS {neg}NULL"
    if isinstance(node, Not):
        inner = to_sql_expr(node.operand)
        if isinstance(node.operand, (And, Or)):
            inner = f"({inner})"
        return f"NOT {inner}"
    if isinstance(node, And):
        return f"{_side(node.left, And, False)} AND " \
               f"{_side(node.right, And, True)}"
    if isinstance(node, Or):
        return f"{_side(node.left, Or, False)} OR " \
               f"{_side(node.right, Or, True)}"
    raise TypeError(f"not an SQL node: {node!r}")


def _side(child, parent, right):
    text = to_sql_expr(child)
    if isinstance(child, Or) and parent is And:
        return f"({text})"
    if isinstance(child, parent) and right:
        return f"({text})"
    return text


def to_sql(ast: Select) -> str:
    """ Canonical one-line text of ``ast``; parses back to ``ast``. """
    parts = ['SELECT']
    if ast.distinct:
        parts.append('DISTINCT')
    items = []
    for item in ast.items:
        text = to_sql_expr(item.expr)
        if item.alias:
            text += f" AS {quote_ident(item.alias)}"
        items.append(text)
    parts.append(', '.join(items))
    parts.append(f"FROM {quote_ident(ast.table)}")
    if ast.where is not None:
        parts.append(f"WHERE {to_sql_expr(ast.where)}")
    if ast.group_by:
        parts.append('GROUP BY ' + ', '.join(to_sql_expr(c)
                                             for c in ast.group_by))
    if ast.having is not None:
        parts.append(f"HAVING {to_sql_expr(ast.having)}")
    if ast.order_by:
        keys = [to_sql_expr(k.expr) + (' DESC' if k.descending else ' ASC')
                for k in ast.order_by]
        parts.append('ORDER BY ' + ', '.join(keys))
    if ast.limit is not None:
        parts.append(f"LIMIT {ast.limit}")
    return ' '.join(parts)
