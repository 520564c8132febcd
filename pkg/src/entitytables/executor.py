#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Answer a question over a property table

Comparison, aggregation and relationship questions are answered by SQL the
language model writes against the table schema; the query is parsed and
run by the in-memory engine. The three statistics question types are
answered by choosing the columns and the test that would answer them; the
numeric test itself runs as well and travels with the answer under
``oracle``.

.. codeauthor: entitytables developers
"""
import datetime
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Tuple

from . import entityerror as ee
from . import stattests
from .caselessDictionary import fold_key
from .llmgateway import TaskClass, clean_reply, parse_structured
from .retrieval import run_stage
from .sqlengine import ResultSet, execute_sql, validate
from .sqlsubset import SqlProgram, parse_sql, quote_ident
from .tablegen import NAME_COLUMN
from .values import MISSING, format_value
from .wikigraph import Category, QueryType

logger = logging.getLogger(__name__)

MAX_SAMPLE_ROWS = 5


class Method(Enum):
    PearsonCorrelation = 'PearsonCorrelation'
    VarianceFTest = 'VarianceFTest'
    NormalityCheck = 'NormalityCheck'

    @property
    def arity(self):
        return 1 if self is Method.NormalityCheck else 2


method_for = {
    QueryType.DistributionCompliance: Method.NormalityCheck,
    QueryType.CorrelationAnalysis: Method.PearsonCorrelation,
    QueryType.VarianceAnalysis: Method.VarianceFTest,
    }


@dataclass(frozen=True)
class MethodSelection:
    columns: Tuple[str, ...]
    method: Method

    def __post_init__(self):
        object.__setattr__(self, 'columns', tuple(self.columns))
        object.__setattr__(self, 'method', Method(self.method))
        if len(self.columns) != self.method.arity:
            raise ValueError(f"{self.method.value} takes "
                             f"{self.method.arity} column(s), got "
                             f"{len(self.columns)}")
        if len({fold_key(c) for c in self.columns}) != len(self.columns):
            raise ValueError('selected columns must differ')

    def to_dict(self):
        return {'columns': list(self.columns), 'method': self.method.value}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data['columns']), Method(data['method']))


class AnswerKind(Enum):
    Scalar = 'Scalar'
    EntityList = 'EntityList'
    Boolean = 'Boolean'
    MethodSelection = 'MethodSelection'


def answer_kinds(qtype):
    """ The answer kinds a question of ``qtype`` may have. """
    qtype = QueryType.parse(qtype)
    if qtype.is_statistics_method:
        return (AnswerKind.MethodSelection,)
    if qtype is QueryType.Aggregation:
        return (AnswerKind.Scalar,)
    if qtype.category is Category.Comparison:
        return (AnswerKind.EntityList, AnswerKind.Scalar)
    return (AnswerKind.Boolean,)


@dataclass
class Answer:
    """ The answer to one question.

    The payload is a cell value (MISSING when the query found nothing) for
    Scalar, a tuple of entity names for EntityList, a bool for Boolean and
    a :class:`MethodSelection` for MethodSelection. ``meta`` holds the SQL
    text, oracle results or an error note; it is never scored.
    """
    kind: AnswerKind
    payload: Any
    question_id: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = AnswerKind(self.kind)
        if self.kind is AnswerKind.EntityList:
            self.payload = tuple(self.payload)
        elif self.kind is AnswerKind.Boolean:
            if not isinstance(self.payload, bool):
                raise ValueError('Boolean answer needs a bool payload')
        elif self.kind is AnswerKind.MethodSelection:
            if isinstance(self.payload, dict):
                self.payload = MethodSelection.from_dict(self.payload)
            if not isinstance(self.payload, MethodSelection):
                raise ValueError('MethodSelection answer needs a selection')
        elif self.payload is None:
            self.payload = MISSING

    def payload_json(self):
        if self.kind is AnswerKind.MethodSelection:
            return self.payload.to_dict()
        if self.kind is AnswerKind.EntityList:
            return list(self.payload)
        if self.payload is MISSING:
            return None
        if isinstance(self.payload, datetime.date):
            return self.payload.isoformat()
        return self.payload

    def to_dict(self):
        return {'question_id': self.question_id, 'kind': self.kind.value,
                'payload': self.payload_json(), 'meta': self.meta}

    @classmethod
    def from_dict(cls, data):
        return cls(AnswerKind(data['kind']), data.get('payload'),
                   data.get('question_id'), dict(data.get('meta') or {}))

    def describe(self):
        """ Short human-readable form of the payload. """
        if self.kind is AnswerKind.MethodSelection:
            return (f"{self.payload.method.value}"
                    f"({', '.join(self.payload.columns)})")
        if self.kind is AnswerKind.EntityList:
            return ', '.join(self.payload) if self.payload else '(none)'
        if self.kind is AnswerKind.Boolean:
            return 'yes' if self.payload else 'no'
        return format_value(self.payload) or '(missing)'


# --- result interpretation
def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


_no = {'no', 'false', 'n', '0'}


def scalar_of(result: ResultSet):
    """ The single value of ``result``: its first cell, MISSING if empty. """
    if not result.rows or not result.columns:
        return MISSING
    return result.rows[0][0]


def entities_of(result: ResultSet):
    """ Entity names in ``result``: the ``name`` column if selected, else
    the first column; missing cells dropped, duplicates folded. """
    if not result.columns:
        return ()
    folded = [fold_key(c) for c in result.columns]
    j = folded.index(NAME_COLUMN) if NAME_COLUMN in folded else 0
    names = []
    seen = set()
    for v in result.column(j):
        if v is MISSING:
            continue
        text = format_value(v)
        if fold_key(text) not in seen:
            seen.add(fold_key(text))
            names.append(text)
    return tuple(names)


def truth_of(result: ResultSet):
    """ Read a yes/no answer from ``result``.

    A 1x1 result is read as a number (non-zero), a bool, or yes/no text;
    otherwise any row at all means yes.
    """
    if not result.rows:
        return False
    if not result.is_scalar:
        return True
    v = result.scalar
    if v is MISSING:
        return False
    if isinstance(v, bool):
        return v
    if _is_number(v):
        return v != 0
    text = fold_key(format_value(v))
    if text in _no:
        return False
    return True


def answer_from_result(qtype, result: ResultSet):
    """ (kind, payload) for a non-statistics question type. """
    qtype = QueryType.parse(qtype)
    if qtype is QueryType.Aggregation:
        return AnswerKind.Scalar, scalar_of(result)
    if qtype.category is Category.Comparison:
        if result.is_scalar and _is_number(result.scalar):
            return AnswerKind.Scalar, result.scalar
        return AnswerKind.EntityList, entities_of(result)
    return AnswerKind.Boolean, truth_of(result)


# --- column matching
def normalize_column(text):
    return ' '.join(re.sub(r'[_\-]+', ' ', fold_key(str(text))).split())


def match_columns(mentions, text, columns):
    """ Columns named by ``mentions`` or appearing in ``text``, in order.

    Each mention is matched exactly after normalization (case, spaces,
    underscores), then by containment either way. Remaining columns are
    taken from ``text`` in order of their first appearance.
    """
    chosen = []

    def take(col):
        if col not in chosen:
            chosen.append(col)

    norm = {c: normalize_column(c) for c in columns}
    for mention in mentions:
        m = normalize_column(mention)
        if not m:
            continue
        exact = [c for c in columns if norm[c] == m]
        if exact:
            take(exact[0])
            continue
        partial = [c for c in columns if norm[c] and (norm[c] in m
                                                      or m in norm[c])]
        if partial:
            take(max(partial, key=lambda c: len(norm[c])))
    q = normalize_column(text)
    found = []
    for c in columns:
        hit = re.search(r'\b' + re.escape(norm[c]) + r'\b', q) \
            if norm[c] else None
        if hit:
            found.append((hit.start(), -len(norm[c]), c))
    for _, _, c in sorted(found):
        take(c)
    return chosen


def format_samples(schema, rows):
    lines = [' | '.join(schema.column_names)]
    lines += [' | '.join(format_value(v) for v in row) for row in rows]
    return '\n'.join(lines)


class Executor():
    """ The question answering stages over a built table.

    Attributes:
        gateway: the language model Gateway
        max_sample_rows: rows shown to the model with the schema, at most 5
    """

    def __init__(self, gateway, max_sample_rows=MAX_SAMPLE_ROWS):
        self.gateway = gateway
        self.max_sample_rows = max(0, min(int(max_sample_rows),
                                          MAX_SAMPLE_ROWS))

    def _program(self, reply, schema):
        text = clean_reply(reply, structured=False)
        ast = parse_sql(text)
        validate(ast, schema)
        return SqlProgram(text, ast)

    def generate_sql(self, q, schema, samples=()) -> SqlProgram:
        """ Ask for SQL answering ``q`` over ``schema``.

        A reply that does not parse or does not fit the schema is sent back
        once with the error message.

        Raises:
            SqlGenerationError: the repaired reply fails too
        """
        samples = list(samples)[:MAX_SAMPLE_ROWS]
        table = quote_ident(schema.table_name)
        reply = self.gateway.ask(
            TaskClass.SqlGeneration, 'generate_sql',
            {'table': table, 'schema': schema.describe(),
             'samples': format_samples(schema, samples),
             'question': q.text})
        try:
            program = self._program(reply, schema)
            logger.info("sql: %s", program.text)
            return program
        except ee.SqlError as e:
            logger.warning("generated SQL rejected: %s", e)
            error = e
        repaired = self.gateway.ask(
            TaskClass.SqlGeneration, 'repair_sql',
            {'error': str(error), 'query': clean_reply(reply, False),
             'schema': schema.describe(), 'table': table,
             'question': q.text})
        try:
            program = self._program(repaired, schema)
        except ee.SqlError as e:
            raise ee.SqlGenerationError([reply, repaired], str(e)) from e
        logger.info("repaired sql: %s", program.text)
        return program

    def select_stat_method(self, q, schema) -> MethodSelection:
        """ The columns and test that answer a statistics question.

        Raises:
            SelectionError: fewer matching columns than the test takes
        """
        qtype = QueryType.parse(q.qtype) if q.qtype is not None else None
        if qtype not in method_for:
            raise ValueError(f"{qtype} is not answered by method selection")
        method = method_for[qtype]
        columns = [c for c in schema.column_names
                   if fold_key(c) != NAME_COLUMN]
        chosen = match_columns(q.properties, q.text, columns)
        if len(chosen) < method.arity:
            chosen += [c for c in self._ask_columns(q, columns, method.arity)
                       if c not in chosen]
        if len(chosen) < method.arity:
            raise ee.SelectionError(q.text, method.arity)
        selection = MethodSelection(tuple(chosen[:method.arity]), method)
        logger.info("method selection: %s %s", method.value,
                    list(selection.columns))
        return selection

    def _ask_columns(self, q, columns, count):
        reply = self.gateway.ask(
            TaskClass.SqlGeneration, 'select_columns',
            {'question': q.text, 'count': str(count),
             'columns': '\n'.join(f"- {c}" for c in columns)})
        try:
            data = parse_structured(reply)
        except ee.LlmOutputError as e:
            logger.warning("column selection reply ignored: %s", e)
            return []
        if isinstance(data, dict):
            data = data.get('columns') or []
        if not isinstance(data, list):
            return []
        return match_columns([str(d) for d in data], '', columns)

    def run_oracle(self, selection: MethodSelection, table):
        """ Run the selected test on the table's numbers.

        Returns ``{'oracle': {...}}``, or ``{'error': message}`` when the
        columns are too short or constant.
        """
        cols = [table.column(c) for c in selection.columns]
        try:
            if selection.method is Method.PearsonCorrelation:
                pairs = [(x, y) for x, y in zip(*cols)
                         if _is_number(x) and _is_number(y)]
                r = stattests.pearson([p[0] for p in pairs],
                                      [p[1] for p in pairs])
                return {'oracle': {'test': 'pearson', 'statistic': r,
                                   'n': len(pairs)}}
            nums = [[v for v in col if _is_number(v)] for col in cols]
            if selection.method is Method.VarianceFTest:
                outcome = stattests.variance_ratio_test(*nums)
            else:
                outcome = stattests.normality_check(nums[0])
            return {'oracle': outcome.to_dict()}
        except ee.StatsError as e:
            logger.info("oracle skipped: %s", e)
            return {'error': str(e)}

    def answer(self, q, table) -> Answer:
        """ Answer ``q`` over ``table``.

        Raises:
            StageError: tagged 'select_stat_method', 'generate_sql' or
                        'execute_sql'
        """
        if q.qtype is None:
            raise ValueError('answer needs a typed question')
        qtype = QueryType.parse(q.qtype)
        if qtype.is_statistics_method:
            selection = run_stage('select_stat_method',
                                  self.select_stat_method, q, table.schema)
            return Answer(AnswerKind.MethodSelection, selection,
                          q.question_id, self.run_oracle(selection, table))
        program = run_stage('generate_sql', self.generate_sql, q,
                            table.schema,
                            table.samples(self.max_sample_rows))
        result = run_stage('execute_sql', execute_sql, program.ast, table)
        kind, payload = answer_from_result(qtype, result)
        answer = Answer(kind, payload, q.question_id, {'sql': program.text})
        logger.info("answer %s: %s", kind.value, answer.describe())
        return answer
