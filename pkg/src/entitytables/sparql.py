#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" SPARQL subset checker, id substitution and query builders

The checker accepts the SELECT queries this package drafts and sends:

    PREFIX declarations, SELECT [DISTINCT] vars | *, a WHERE group of triple
    patterns (with ';' and ',' abbreviations and property paths using '/',
    '|', '^', '*', '+', '?'), FILTER, OPTIONAL, UNION, VALUES, SERVICE
    groups, GROUP BY, ORDER BY, LIMIT and OFFSET.

It is a recognizer, not an evaluator; queries run on the remote endpoint.

Id tokens are prefixed names such as ``wd:Q76`` (entity) and ``wdt:P39``
(property). Drafts written before resolution use the placeholders
``wd:ENT_k`` and ``wdt:PROP_k``.

.. codeauthor: entitytables developers
"""
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

from . import entityerror as ee

logger = logging.getLogger(__name__)

VALUES_CHUNK = 200

_token_spec = [
    ('ws', r'\s+|#[^\n]*'),
    ('iri', r'<[^<>"{}|^`\\\s]*>'),
    ('var', r'[?$][A-Za-z_]\w*'),
    ('string', r'"(?:[^"\\\n]|\\.)*"|\'(?:[^\'\\\n]|\\.)*\''),
    ('langtag', r'@[A-Za-z]+(?:-[A-Za-z0-9]+)*'),
    ('dtype', r'\^\^'),
    ('number', r'[+-]?(?:\d+\.\d+|\d+|\.\d+)(?:[eE][+-]?\d+)?'),
    ('pname', r'[A-Za-z][\w\-]*:(?:[\w\-]+(?:\.[\w\-]+)*)?|:[\w\-]+'),
    ('word', r'[A-Za-z_]\w*'),
    ('op', r'!=|<=|>=|&&|\|\||[{}().;,/|^*+?=<>!-]'),
    ]
_token_re = re.compile('|'.join(f'(?P<{n}>{p})' for n, p in _token_spec))

_id_token = re.compile(
    r'\b(wd|wdt|p|ps|pq|psv|pqv|wdno):(ENT_\d+|PROP_\d+|Q\d+|P\d+)\b')
_placeholder = re.compile(r'\b(?:ENT|PROP)_\d+\b')

_entity_prefixes = {'wd'}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int

    @property
    def upper(self):
        return self.text.upper()


def tokenize(text):
    """ Split SPARQL text into Tokens, ending with an 'eof' token. """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _token_re.match(text, pos)
        if m is None:
            raise ee.SparqlSyntaxError(f"unexpected character {text[pos]!r}",
                                       pos)
        if m.lastgroup != 'ws':
            tokens.append(Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(Token('eof', '', len(text)))
    return tokens


class QueryStatus(Enum):
    Rough = 'Rough'
    Exact = 'Exact'


@dataclass(frozen=True)
class IdReference:
    """ An id token of a query, the mention it stands for and its
    resolution; ``resolved`` is empty until the mention is resolved. """
    token: str
    mention: str
    kind: str
    resolved: str = ''


@dataclass(frozen=True)
class SparqlQuery:
    """ A query with its status and the id references it carries. """
    text: str
    status: QueryStatus = QueryStatus.Rough
    referenced: Tuple[IdReference, ...] = ()

    def __post_init__(self):
        if self.status is QueryStatus.Exact:
            if any(not ref.resolved for ref in self.referenced):
                raise ValueError('Exact query with an unresolved reference')


@dataclass
class SparqlShape:
    """ What the checker learned about an accepted query. """
    variables: List[str] = field(default_factory=list)
    has_limit: bool = False


class _Checker():
    """ Recursive-descent recognizer over a token list. """

    def __init__(self, text):
        self.tokens = tokenize(text)
        self.i = 0
        self.shape = SparqlShape()

    # --- token helpers
    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message):
        raise ee.SparqlSyntaxError(message, self.tok.pos)

    def at(self, *words):
        return self.tok.kind in ('word', 'op') and self.tok.upper in words

    def accept(self, *words):
        if self.at(*words):
            self.i += 1
            return True
        return False

    def expect(self, word):
        if not self.accept(word):
            got = self.tok.text or 'end of query'
            self.error(f"expected {word}, got {got!r}")

    def expect_kind(self, kind):
        if self.tok.kind != kind:
            got = self.tok.text or 'end of query'
            self.error(f"expected {kind}, got {got!r}")
        t = self.tok
        self.i += 1
        return t

    # --- grammar
    def query(self):
        while self.accept('PREFIX'):
            t = self.expect_kind('pname')
            if not t.text.endswith(':'):
                self.error('prefix name must end with ":"')
            self.expect_kind('iri')
        self.expect('SELECT')
        self.accept('DISTINCT', 'REDUCED')
        if self.accept('*'):
            self.shape.variables = ['*']
        else:
            while self.tok.kind == 'var' or self.at('('):
                if self.accept('('):
                    self.expression(closing=('AS',))
                    self.expect('AS')
                    self.shape.variables.append(
                        self.expect_kind('var').text[1:])
                    self.expect(')')
                else:
                    self.shape.variables.append(self.tok.text[1:])
                    self.i += 1
            if not self.shape.variables:
                self.error('SELECT needs a variable list or *')
        self.accept('WHERE')
        self.group()
        self.modifiers()
        if self.tok.kind != 'eof':
            self.error(f"unexpected {self.tok.text!r} after query")
        return self.shape

    def group(self):
        self.expect('{')
        while not self.at('}'):
            if self.tok.kind == 'eof':
                self.error("unterminated group, expected '}'")
            self.group_element()
            self.accept('.')
        self.expect('}')

    def group_element(self):
        if self.accept('FILTER'):
            self.filter()
        elif self.accept('OPTIONAL', 'MINUS'):
            self.group()
        elif self.accept('SERVICE'):
            self.accept('SILENT')
            if self.tok.kind not in ('pname', 'iri'):
                self.error('SERVICE needs a name')
            self.i += 1
            self.group()
        elif self.accept('VALUES'):
            self.values()
        elif self.accept('BIND'):
            self.expect('(')
            self.expression(closing=('AS',))
            self.expect('AS')
            self.expect_kind('var')
            self.expect(')')
        elif self.at('{'):
            self.group()
            while self.accept('UNION'):
                self.group()
        else:
            self.triples()

    def filter(self):
        if self.accept('NOT'):
            self.expect('EXISTS')
            self.group()
        elif self.accept('EXISTS'):
            self.group()
        else:
            if self.tok.kind == 'word':
                self.i += 1
            self.expect('(')
            self.expression(closing=(')',))
            self.expect(')')

    def expression(self, closing):
        """ Balanced tokens up to one of ``closing`` at depth 0. """
        depth = 0
        start = self.i
        while True:
            t = self.tok
            if t.kind == 'eof' or t.text in ('{', '}'):
                if self.at('{') and self.tokens[self.i-1].upper == 'EXISTS':
                    self.group()
                    continue
                self.error('unterminated expression')
            if depth == 0 and self.at(*closing):
                break
            if t.text == '(':
                depth += 1
            elif t.text == ')':
                depth -= 1
            self.i += 1
        if self.i == start:
            self.error('empty expression')

    def values(self):
        if self.accept('('):
            nvars = 0
            while self.tok.kind == 'var':
                self.i += 1
                nvars += 1
            self.expect(')')
            self.expect('{')
            while self.accept('('):
                for _ in range(nvars):
                    self.term(allow_undef=True)
                self.expect(')')
            self.expect('}')
        else:
            self.expect_kind('var')
            self.expect('{')
            while not self.at('}'):
                self.term(allow_undef=True)
            self.expect('}')

    def triples(self):
        self.term()
        self.property_list()

    def property_list(self):
        self.verb()
        self.object_list()
        while self.accept(';'):
            if self.at('.', '}') or self.tok.kind == 'eof':
                break
            self.verb()
            self.object_list()

    def object_list(self):
        self.term()
        while self.accept(','):
            self.term()

    def verb(self):
        if self.tok.kind == 'var':
            self.i += 1
            return
        if self.tok.kind == 'word' and self.tok.text == 'a':
            self.i += 1
            return
        self.path_sequence()

    def path_sequence(self):
        self.path_elt()
        while self.accept('/', '|'):
            self.path_elt()

    def path_elt(self):
        if self.accept('^'):
            self.path_elt()
            return
        if self.accept('('):
            self.path_sequence()
            self.expect(')')
        elif self.tok.kind in ('pname', 'iri'):
            self.i += 1
        elif self.tok.kind == 'word' and self.tok.text == 'a':
            self.i += 1
        else:
            self.error(f"expected a predicate, got {self.tok.text!r}")
        self.accept('*', '+', '?')

    def term(self, allow_undef=False):
        t = self.tok
        if t.kind in ('var', 'iri', 'pname', 'number'):
            self.i += 1
        elif t.kind == 'string':
            self.i += 1
            if self.tok.kind == 'langtag':
                self.i += 1
            elif self.tok.kind == 'dtype':
                self.i += 1
                if self.tok.kind not in ('pname', 'iri'):
                    self.error('datatype must be a name')
                self.i += 1
        elif t.kind == 'word' and t.text.lower() in ('true', 'false'):
            self.i += 1
        elif allow_undef and t.upper == 'UNDEF':
            self.i += 1
        else:
            self.error(f"expected a term, got {t.text or 'end of query'!r}")

    def modifiers(self):
        if self.accept('GROUP'):
            self.expect('BY')
            if self.tok.kind != 'var':
                self.error('GROUP BY needs a variable')
            while self.tok.kind == 'var':
                self.i += 1
        if self.accept('ORDER'):
            self.expect('BY')
            count = 0
            while True:
                if self.accept('ASC', 'DESC'):
                    self.expect('(')
                    self.expression(closing=(')',))
                    self.expect(')')
                elif self.tok.kind == 'var':
                    self.i += 1
                else:
                    break
                count += 1
            if count == 0:
                self.error('ORDER BY needs a key')
        for _ in range(2):
            if self.accept('LIMIT', 'OFFSET'):
                if self.tokens[self.i-1].upper == 'LIMIT':
                    self.shape.has_limit = True
                self.expect_kind('number')


def check_sparql(text):
    """ Check ``text`` against the supported subset.

    Returns:
        SparqlShape: the selected variables and whether a LIMIT is present

    Raises:
        SparqlSyntaxError: with the character position of the problem
    """
    if not text or not text.strip():
        raise ee.SparqlSyntaxError('empty query', 0)
    return _Checker(text).query()


def find_placeholders(text):
    """ Placeholder tokens (ENT_k, PROP_k) in order of first appearance. """
    return list(dict.fromkeys(_placeholder.findall(text)))


def find_ids(text):
    """ Distinct id tokens in order of first appearance.

    Returns:
        list of (local id, kind) with kind 'entity' or 'property'
    """
    found = {}
    for m in _id_token.finditer(text):
        prefix, local = m.groups()
        if local.startswith('ENT_'):
            kind = 'entity'
        elif local.startswith('PROP_'):
            kind = 'property'
        else:
            kind = 'entity' if prefix in _entity_prefixes else 'property'
        found.setdefault(local, kind)
    return list(found.items())


def substitute_ids(text, mapping):
    """ Replace the local part of every id token found in ``mapping``.

    Substitution is one pass, so swapping ids is safe.
    """
    def repl(m):
        prefix, local = m.groups()
        return f"{prefix}:{mapping.get(local, local)}"
    return _id_token.sub(repl, text)


def values_block(var, entity_ids):
    items = ' '.join(f"wd:{eid}" for eid in entity_ids)
    return f"VALUES ?{var} {{ {items} }}"


def hop_query(source_ids, relation_id):
    """ Build the query following ``relation_id`` from ``source_ids``. """
    return '\n'.join([
        'SELECT DISTINCT ?item ?itemLabel WHERE {',
        '  ' + values_block('source', source_ids),
        f'  ?source wdt:{relation_id} ?item .',
        '  SERVICE wikibase:label { bd:serviceParam wikibase:language "en". }',
        '}',
        ])


def hop_queries(source_ids, relation_id, chunk=VALUES_CHUNK):
    """ :func:`hop_query` over ``source_ids`` in chunks of ``chunk`` ids. """
    ids = list(source_ids)
    return [hop_query(ids[i:i+chunk], relation_id)
            for i in range(0, len(ids), chunk)]


_template_call = re.compile(r'\{\{[^{}]*\}\}')
_ref_tag = re.compile(r'<ref[^>/]*/>|<ref[^>]*>.*?</ref>',
                      re.DOTALL | re.IGNORECASE)
_html_tag = re.compile(r'<[^>]+>')
_link = re.compile(r'\[\[(?:[^|\]]*\|)?([^\]]*)\]\]')
_ext_link = re.compile(r'\[https?://\S+\s*([^\]]*)\]')
_citation = re.compile(r'\[(?:\d+|citation needed|note \d+)\]',
                       re.IGNORECASE)
_emphasis = re.compile(r"'{2,}")
_empty_parens = re.compile(r'\(\s*[;,]?\s*\)')


def strip_markup(text):
    """ Reduce wiki or HTML markup in a page intro to plain text. """
    prev = None
    while prev != text:
        prev = text
        text = _template_call.sub('', text)
    for pattern, repl in ((_ref_tag, ''), (_html_tag, ''), (_link, r'\1'),
                          (_ext_link, r'\1'), (_citation, ''),
                          (_emphasis, ''), (_empty_parens, '')):
        text = pattern.sub(repl, text)
    text = re.sub(r'[ \t]+', ' ', text)
    text = re.sub(r' +([,.;:])', r'\1', text)
    paras = [p.strip() for p in re.split(r'\n\s*\n', text)]
    return '\n\n'.join(p for p in paras if p)
