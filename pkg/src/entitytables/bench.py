#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Benchmark generation over gold topic tables

A benchmark item is a question instantiated from a template over one
topic's gold table, with the slot bindings kept in ``meta`` and a gold
answer computed from those bindings:

    - comparison and aggregation items by a gold query on the gold table
    - relationship items from the topic graph: an edge between the two
      entities, or for hypothetical scenarios a shared neighbour (a
      stand-in rule, marked ``synthetic_semantics`` in ``meta``)
    - statistics items by the bound columns and the method of the type

Items are split into train and test sets stratified by question type.

.. codeauthor: entitytables developers
"""
import json
import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import yaml

from . import entityerror as ee
from .caselessDictionary import fold_key
from .executor import (Answer, AnswerKind, MethodSelection, answer_kinds,
                       entities_of, method_for)
from .fixtures import fixture_graph, fixture_table
from .llmgateway import TaskClass
from .sqlengine import execute_sql, value_key
from .sqlsubset import (Agg, Col, Compare, InList, Lit, OrderItem, Select,
                        SelectItem, to_sql)
from .tablegen import NAME, NAME_COLUMN, Column, PropertyTable, TableSchema
from .util import Counter, atomic_write_text, get_filepath, slugify
from .values import MISSING, ColumnKind, format_value
from .wikigraph import (Category, EntityRef, MultiEntityQuestion, QueryType,
                        WikiGraph)

logger = logging.getLogger(__name__)

TRAIN_FRACTION = 3406 / 4780
MAX_ATTEMPTS = 20
MIN_NORMALITY = 8
MIN_CORRELATION = 3
MIN_VARIANCE = 2

_slot = re.compile(r'\[([A-Za-z][A-Za-z ]*)\]')

required_slots = {
    QueryType.Intercomparison: {'entity A', 'entity B', 'property'},
    QueryType.Superlative: {'entity', 'property'},
    QueryType.Aggregation: {'entities', 'property', 'value'},
    QueryType.DistributionCompliance: {'property'},
    QueryType.CorrelationAnalysis: {'property A', 'property B'},
    QueryType.VarianceAnalysis: {'property A', 'property B'},
    QueryType.DescriptiveRelationship: {'entity A', 'entity B'},
    QueryType.HypotheticalScenarios: {'entity A', 'entity B'},
    }

_bound_slots = {'entity', 'entities', 'entity A', 'entity B', 'property',
                'property A', 'property B', 'value'}
_descending = {'highest', 'higher', 'largest', 'larger', 'greatest',
               'greater', 'most', 'more', 'latest', 'later'}

_orderable = (ColumnKind.integer, ColumnKind.decimal, ColumnKind.date)


@dataclass
class TopicConfig:
    """ A benchmark topic and where its gold table comes from. """
    name: str
    properties: List[Column]
    entity: str = ''
    entities: str = ''
    question: str = ''
    root_query: Optional[str] = None
    entity_ids: List[str] = field(default_factory=list)
    expected_count: Optional[int] = None
    table: Optional[Path] = None
    graph: Optional[Path] = None
    fixture: Optional[int] = None

    def __post_init__(self):
        if not self.properties:
            raise ValueError(f"topic '{self.name}' has no properties")
        self.entity = self.entity or self.name
        self.entities = self.entities or self.entity
        self.question = self.question or f"Which {self.entities} are there?"

    def schema(self):
        return TableSchema(self.name, [NAME] + list(self.properties))

    @classmethod
    def from_dict(cls, data, base=None):
        base = Path(base) if base is not None else Path('.')
        props = [p if isinstance(p, dict) else {'name': p}
                 for p in data.get('properties') or []]
        return cls(
            data['name'],
            [Column(p['name'], ColumnKind.parse(p.get('kind', 'text')),
                    p.get('description', '')) for p in props],
            data.get('entity', ''), data.get('entities', ''),
            data.get('question', ''), data.get('root_query'),
            list(data.get('entity_ids') or []), data.get('expected_count'),
            base / data['table'] if data.get('table') else None,
            base / data['graph'] if data.get('graph') else None,
            data.get('fixture'))


def load_topics(path=None) -> List[TopicConfig]:
    """ Read a topics document; the packaged one when ``path`` is None.

    Raises:
        ConfigError: unreadable document or an invalid topic
    """
    path = Path(path) if path is not None else get_filepath('topics.yaml')
    try:
        doc = yaml.safe_load(path.read_text(encoding='utf-8'))
        return [TopicConfig.from_dict(t, path.parent) for t in doc['topics']]
    except (OSError, yaml.YAMLError, KeyError, TypeError, ValueError) as e:
        raise ee.ConfigError(f"{path}: {e}")


@dataclass
class QuestionTemplate:
    """ A question pattern for one question type.

    Slots are written in square brackets, e.g. ``[entity A]``; each
    ``variants`` slot is filled with one of its options.
    """
    qtype: QueryType
    pattern: str
    answer_kind: AnswerKind
    numeric_pattern: Optional[str] = None
    variants: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.qtype = QueryType.parse(self.qtype)
        self.answer_kind = AnswerKind(self.answer_kind)
        self.variants = {k: tuple(v) for k, v in self.variants.items()}
        if self.answer_kind not in answer_kinds(self.qtype):
            raise ValueError(f"{self.qtype.value} cannot have a "
                             f"{self.answer_kind.value} answer")
        for pattern in filter(None, (self.pattern, self.numeric_pattern)):
            slots = set(_slot.findall(pattern))
            missing = required_slots[self.qtype] - slots
            if missing:
                raise ValueError(f"'{pattern}' lacks slots {sorted(missing)}")
            unknown = slots - _bound_slots - set(self.variants)
            if unknown:
                raise ValueError(f"'{pattern}' has unknown slots "
                                 f"{sorted(unknown)}")

    @staticmethod
    def render(pattern, values):
        return _slot.sub(lambda m: str(values[m.group(1)]), pattern)

    @classmethod
    def from_dict(cls, data):
        return cls(data['qtype'], data['pattern'], data['answer_kind'],
                   data.get('numeric_pattern'),
                   dict(data.get('variants') or {}))


def load_question_templates(path=None) -> List[QuestionTemplate]:
    """ Read a templates document; the packaged one when ``path`` is None.

    Raises:
        ConfigError: unreadable document or an invalid template
    """
    path = Path(path) if path is not None \
        else get_filepath('templates.yaml')
    try:
        doc = yaml.safe_load(path.read_text(encoding='utf-8'))
        return [QuestionTemplate.from_dict(t) for t in doc['templates']]
    except (OSError, yaml.YAMLError, KeyError, TypeError, ValueError) as e:
        raise ee.ConfigError(f"{path}: {e}")


@dataclass
class BenchItem:
    """ One benchmark question with its bindings and gold answer.

    ``meta`` holds ``template`` (index), ``columns`` and, per type,
    ``entity_ids``/``entities``, ``value``/``op`` or ``descending``.
    """
    id: str
    question: str
    qtype: QueryType
    topic: str
    meta: dict = field(default_factory=dict)
    gold: Optional[Answer] = None
    split: Optional[str] = None

    def __post_init__(self):
        self.qtype = QueryType.parse(self.qtype)
        if self.split not in (None, 'train', 'test'):
            raise ValueError(f"unknown split '{self.split}'")
        if self.gold is not None \
                and self.gold.kind not in answer_kinds(self.qtype):
            raise ValueError(f"gold {self.gold.kind.value} answer for a "
                             f"{self.qtype.value} item")

    def to_dict(self):
        return {'id': self.id, 'split': self.split, 'topic': self.topic,
                'qtype': self.qtype.value, 'question': self.question,
                'meta': self.meta,
                'gold': None if self.gold is None else self.gold.to_dict()}

    @classmethod
    def from_dict(cls, data):
        gold = data.get('gold')
        return cls(data['id'], data['question'], data['qtype'],
                   data['topic'], dict(data.get('meta') or {}),
                   None if gold is None else Answer.from_dict(gold),
                   data.get('split'))

    def as_question(self):
        """ The item as a typed question, for the systems under test. """
        names = self.meta.get('entities') or []
        ids = self.meta.get('entity_ids') or []
        return MultiEntityQuestion(
            self.question, self.qtype,
            [EntityRef(i, n) for i, n in zip(ids, names)],
            list(self.meta.get('columns') or []), self.topic, self.id)


# --- gold tables
def build_gold_table(cfg: TopicConfig, build=None) -> PropertyTable:
    """ The gold table of ``cfg``: its saved table, its seeded fixture, or
    ``build(cfg)``, in that order.

    Raises:
        FixtureDriftError: the row count differs from ``expected_count``
        ConfigError: no saved table, fixture or builder
    """
    if cfg.table is not None:
        table = PropertyTable.load(cfg.table)
    elif cfg.fixture is not None:
        table = fixture_table(cfg, cfg.fixture)
    elif build is not None:
        table = build(cfg)
    else:
        raise ee.ConfigError(f"topic '{cfg.name}' has no table, fixture or "
                             f"builder")
    if cfg.expected_count is not None and len(table) != cfg.expected_count:
        raise ee.FixtureDriftError(cfg.name, cfg.expected_count, len(table))
    logger.info("gold table %s: %d rows", cfg.name, len(table))
    return table


def topic_graph(cfg: TopicConfig, table=None) -> Optional[WikiGraph]:
    """ The relationship graph of ``cfg``: its graph dump, else the fixture
    graph over ``table``, else None. """
    if cfg.graph is not None:
        return WikiGraph.load(cfg.graph)
    if cfg.fixture is not None and table is not None:
        return fixture_graph(table, cfg.fixture)
    return None


# --- instantiation
def display(column):
    """ A column name as it reads in a question. """
    return ' '.join(column.replace('_', ' ').split())


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _unique_name_rows(table):
    names = [format_value(n) for n in table.column(NAME_COLUMN)]
    counts = Counter()
    for n in names:
        counts[fold_key(n)] += 1
    return [i for i, n in enumerate(names)
            if n and counts[fold_key(n)] == 1]


def _filled(table, j, rows=None):
    rows = range(len(table)) if rows is None else rows
    return [(i, table.rows[i][j]) for i in rows
            if table.rows[i][j] is not MISSING]


def _property_columns(table, kinds=None):
    return [(j, c) for j, c in enumerate(table.schema.columns)
            if fold_key(c.name) != NAME_COLUMN
            and (kinds is None or c.kind in kinds)]


def _numbers(table, j):
    return [i for i, v in _filled(table, j)
            if isinstance(v, (int, float)) and not isinstance(v, bool)]


def _variant_values(tpl, rng):
    return {slot: _pick(rng, options)
            for slot, options in sorted(tpl.variants.items())}


def _bind_comparison(tpl, table, rng):
    rows = _unique_name_rows(table)
    names = table.column(NAME_COLUMN)
    eligible = []
    for j, c in _property_columns(table, _orderable):
        cells = _filled(table, j, rows)
        if len({value_key(v) for _, v in cells}) >= 2:
            eligible.append((c, cells))
    if not eligible:
        return None
    c, cells = _pick(rng, eligible)
    variant = _variant_values(tpl, rng)
    descending = any(v in _descending for v in variant.values()) \
        if variant else True
    values = dict(variant, property=display(c.name))
    meta = {'columns': [c.name], 'descending': descending}
    if tpl.qtype is QueryType.Superlative:
        return values, meta
    ia, va = _pick(rng, cells)
    ib, _ = _pick(rng, [(i, v) for i, v in cells
                        if value_key(v) != value_key(va)])
    pair = [format_value(names[ia]), format_value(names[ib])]
    values.update({'entity A': pair[0], 'entity B': pair[1]})
    meta.update({'entity_ids': [table.entity_ids[ia], table.entity_ids[ib]],
                 'entities': pair})
    return values, meta


def _bind_aggregation(tpl, table, rng):
    eligible = [(j, c) for j, c in _property_columns(
                    table, (ColumnKind.text, ColumnKind.integer,
                            ColumnKind.decimal))
                if _filled(table, j)]
    if not eligible:
        return None
    j, c = _pick(rng, eligible)
    cells = [v for _, v in _filled(table, j)]
    if c.kind is ColumnKind.text:
        counts = Counter()
        first = {}
        for v in cells:
            counts[fold_key(v)] += 1
            first.setdefault(fold_key(v), v)
        shared = [first[k] for k in first if counts[k] > 1]
        value = _pick(rng, shared or list(first.values()))
        op, pattern = '=', tpl.pattern
    else:
        distinct = sorted({v for v in cells})
        if len(distinct) < 2:
            return None
        value = _pick(rng, distinct[:-1])
        op, pattern = '>', tpl.numeric_pattern or tpl.pattern
    values = {'property': display(c.name), 'value': format_value(value)}
    meta = {'columns': [c.name], 'op': op, 'value': value,
            'pattern': 'numeric' if op == '>' else 'text'}
    return values, meta, pattern


def _bind_statistics(tpl, table, rng):
    numeric = _property_columns(table, (ColumnKind.integer,
                                        ColumnKind.decimal))
    if tpl.qtype is QueryType.DistributionCompliance:
        eligible = [c for j, c in numeric
                    if len(_numbers(table, j)) >= MIN_NORMALITY]
        if not eligible:
            return None
        c = _pick(rng, eligible)
        return {'property': display(c.name)}, {'columns': [c.name]}
    pairs = []
    for a in range(len(numeric)):
        for b in range(a + 1, len(numeric)):
            (ja, ca), (jb, cb) = numeric[a], numeric[b]
            na, nb = set(_numbers(table, ja)), set(_numbers(table, jb))
            if tpl.qtype is QueryType.CorrelationAnalysis:
                ok = len(na & nb) >= MIN_CORRELATION
            else:
                ok = len(na) >= MIN_VARIANCE and len(nb) >= MIN_VARIANCE
            if ok:
                pairs.append((ca, cb))
    if not pairs:
        return None
    ca, cb = _pick(rng, pairs)
    if rng.random() < 0.5:
        ca, cb = cb, ca
    return ({'property A': display(ca.name), 'property B': display(cb.name)},
            {'columns': [ca.name, cb.name]})


def _adjacency(graph, pool):
    adj = defaultdict(set)
    for e in graph.edges:
        if e.source != e.target:
            adj[e.source].add(e.target)
            adj[e.target].add(e.source)
    return {k: v & pool for k, v in adj.items()}


def _bind_relationship(tpl, table, rng, graph):
    if graph is None:
        return None
    names = table.column(NAME_COLUMN)
    pool = [table.entity_ids[i] for i in _unique_name_rows(table)
            if table.entity_ids[i] in graph]
    if len(pool) < 2:
        return None
    name_of = {eid: format_value(n) for eid, n in
               zip(table.entity_ids, names)}
    pool_set = set(pool)
    pair = None
    linked = rng.random() < 0.5
    if linked and tpl.qtype is QueryType.DescriptiveRelationship:
        edges = sorted(e for e in graph.edges if e.source != e.target
                       and e.source in pool_set and e.target in pool_set)
        if edges:
            e = _pick(rng, edges)
            pair = [e.source, e.target]
    elif linked:
        adj = _adjacency(graph, pool_set)
        hubs = sorted(k for k, v in adj.items() if len(v) >= 2)
        if hubs:
            around = sorted(adj[_pick(rng, hubs)])
            a, b = rng.choice(len(around), 2, replace=False)
            pair = [around[int(a)], around[int(b)]]
    if pair is None:
        a, b = rng.choice(len(pool), 2, replace=False)
        pair = [pool[int(a)], pool[int(b)]]
    labels = [name_of[p] for p in pair]
    meta = {'columns': [], 'entity_ids': pair, 'entities': labels}
    if tpl.qtype is QueryType.HypotheticalScenarios:
        meta['synthetic_semantics'] = True
    return {'entity A': labels[0], 'entity B': labels[1]}, meta


def instantiate_template(tpl: QuestionTemplate, table: PropertyTable, seed,
                         topic: TopicConfig, graph=None, item_id='',
                         template_index=0) -> Optional[BenchItem]:
    """ Fill ``tpl`` from ``table`` by seeded sampling.

    Args:
        seed: an int seed or a numpy Generator, which is advanced
        graph: the topic graph, needed by relationship templates

    Returns:
        a BenchItem without gold answer, or None when the table has no
        eligible slot fillers
    """
    rng = np.random.default_rng(seed)
    pattern = tpl.pattern
    if tpl.qtype.category is Category.Comparison:
        bound = _bind_comparison(tpl, table, rng)
    elif tpl.qtype is QueryType.Aggregation:
        bound = _bind_aggregation(tpl, table, rng)
        if bound is not None:
            values, meta, pattern = bound
            bound = values, meta
    elif tpl.qtype.is_statistics_method:
        bound = _bind_statistics(tpl, table, rng)
    else:
        bound = _bind_relationship(tpl, table, rng, graph)
    if bound is None:
        logger.debug("%s: no slot fillers in %s", tpl.qtype.value,
                     topic.name)
        return None
    values, meta = bound
    values.update({'entity': topic.entity, 'entities': topic.entities})
    text = QuestionTemplate.render(pattern, values)
    meta = dict({'template': template_index}, **meta)
    return BenchItem(item_id, text, tpl.qtype, topic.name, meta)


# --- gold answers
def _lit(value):
    if hasattr(value, 'isoformat'):
        return Lit(value.isoformat())
    return Lit(value)


def compute_gold_answer(item: BenchItem, table: PropertyTable,
                        graph=None) -> Answer:
    """ The gold answer of ``item`` from its bindings.

    Raises:
        GenerationBugError: a gold query found nothing, or a relationship
                            item has no graph
    """
    qt = item.qtype
    m = item.meta
    if qt.is_statistics_method:
        return Answer(AnswerKind.MethodSelection,
                      MethodSelection(tuple(m['columns']), method_for[qt]),
                      item.id)
    if qt.category is Category.Relationship:
        if graph is None:
            raise ee.GenerationBugError(item.id, 'no graph for relationship')
        a, b = m['entity_ids']
        if qt is QueryType.DescriptiveRelationship:
            truth = graph.edge_between(a, b)
        else:
            truth = bool(graph.shared_neighbors(a, b))
        return Answer(AnswerKind.Boolean, truth, item.id)
    tname = table.schema.table_name
    col = Col(m['columns'][0])
    name = Col(NAME_COLUMN)
    if qt is QueryType.Aggregation:
        ast = Select((SelectItem(Agg('COUNT', None)),), tname,
                     where=Compare(m['op'], col, _lit(m['value'])))
    elif qt is QueryType.Intercomparison:
        ast = Select((SelectItem(name),), tname,
                     where=InList(name, tuple(Lit(n) for n in m['entities'])),
                     order_by=(OrderItem(col, m['descending']),), limit=1)
    else:
        func = 'MAX' if m['descending'] else 'MIN'
        top = execute_sql(Select((SelectItem(Agg(func, col)),), tname),
                          table).scalar
        if top is MISSING or top is None:
            raise ee.GenerationBugError(item.id, f"SELECT {func}({col.name})")
        ast = Select((SelectItem(name),), tname,
                     where=Compare('=', col, _lit(top)))
    sql = to_sql(ast)
    result = execute_sql(ast, table)
    if not result.rows:
        raise ee.GenerationBugError(item.id, sql)
    if qt is QueryType.Aggregation:
        return Answer(AnswerKind.Scalar, result.scalar, item.id, {'sql': sql})
    return Answer(AnswerKind.EntityList, entities_of(result), item.id,
                  {'sql': sql})


# --- refinement
def refine_question(text, gateway=None, keep=()):
    """ Ask the model to reword ``text``; best effort.

    The rewrite is rejected when it drops any of the strings in ``keep``
    (entity names, bound values). Without a gateway, or when the model
    cannot be reached or the tape has no reply, ``text`` is returned.
    """
    if gateway is None:
        return text
    try:
        reply = gateway.ask(TaskClass.QuestionRefinement, 'refine_question',
                            {'question': text})
    except (ee.GatewayError, ee.TransportError) as e:
        logger.info("refinement skipped: %s", e)
        return text
    lines = [ln.strip() for ln in reply.strip().splitlines() if ln.strip()]
    rewrite = lines[0].strip('"') if lines else ''
    if not rewrite:
        return text
    folded = fold_key(rewrite)
    dropped = [k for k in keep if k and fold_key(str(k)) not in folded]
    if dropped:
        logger.info("refinement of '%s' dropped %s; kept original", text,
                    dropped)
        return text
    return rewrite


# --- splitting
def split_dataset(items, train_fraction=TRAIN_FRACTION, seed=0):
    """ Label ``items`` 'train' or 'test', stratified by question type.

    The train total is ``round(train_fraction * N)``; each type gets the
    floor of its share, and the leftover places go to the types with the
    largest remainders. Within a type, a seeded permutation picks the
    train items. Items keep their order.
    """
    if not 0 < train_fraction < 1:
        raise ValueError('train_fraction must lie strictly between 0 and 1')
    items = list(items)
    if not items:
        return []
    frame = pd.DataFrame({'qtype': [it.qtype.value for it in items]})
    groups = frame.groupby('qtype', sort=True).indices
    share = {k: len(idx) * train_fraction for k, idx in groups.items()}
    quota = {k: int(math.floor(v)) for k, v in share.items()}
    short = int(round(train_fraction * len(items))) - sum(quota.values())
    for k in sorted(share, key=lambda k: (quota[k] - share[k], k))[:short]:
        quota[k] += 1
    rng = np.random.default_rng(seed)
    labels = [None] * len(items)
    for k in sorted(groups):
        for n, i in enumerate(rng.permutation(groups[k])):
            labels[int(i)] = 'train' if n < quota[k] else 'test'
    return [replace(it, split=s) for it, s in zip(items, labels)]


# --- generation
def _shares(total, n):
    return [total // n + (1 if i < total % n else 0) for i in range(n)]


def generate_bench(topics, templates, tables, count, seed, graphs=None,
                   gateway=None, train_fraction=TRAIN_FRACTION):
    """ Generate ``count`` items with gold answers and split labels.

    The count is spread evenly over the templates (the first templates
    take the remainder), and each template's share over the topics in
    round-robin. Topics without a table are skipped, as are duplicate
    question texts. What a template cannot fill is spread again over the
    templates that filled their share, until the count is reached or no
    template can add more.

    Args:
        tables: dict of topic name to gold PropertyTable
        graphs: dict of topic name to WikiGraph, for relationship items
        gateway: when given, questions are reworded by the model
    """
    if count < 1:
        raise ValueError('count must be at least 1')
    if not templates or not topics:
        raise ValueError('need at least one topic and one template')
    rng = np.random.default_rng(seed)
    graphs = graphs or {}
    items = []
    seen = set()

    def fill(t_index, quota):
        tpl = templates[t_index]
        made = 0
        for attempt in range(quota * MAX_ATTEMPTS + len(topics)):
            if made >= quota:
                break
            topic = topics[attempt % len(topics)]
            table = tables.get(topic.name)
            if table is None:
                continue
            graph = graphs.get(topic.name)
            item_id = f"{len(items):05d}-{slugify(tpl.qtype.value)}"
            item = instantiate_template(tpl, table, rng, topic, graph,
                                        item_id, t_index)
            if item is None or fold_key(item.question) in seen:
                continue
            seen.add(fold_key(item.question))
            item.gold = compute_gold_answer(item, table, graph)
            keep = list(item.meta.get('entities') or [])
            if 'value' in item.meta:
                keep.append(format_value(item.meta['value']))
            item.question = refine_question(item.question, gateway, keep)
            items.append(item)
            made += 1
        return made

    open_templates = []
    for t_index, quota in enumerate(_shares(count, len(templates))):
        made = fill(t_index, quota)
        if made < quota:
            logger.warning("%s: generated %d of %d items",
                           templates[t_index].qtype.value, made, quota)
        else:
            open_templates.append(t_index)
    while len(items) < count and open_templates:
        short = count - len(items)
        still_open = []
        for t_index, quota in zip(open_templates,
                                  _shares(short, len(open_templates))):
            if fill(t_index, quota) == quota:
                still_open.append(t_index)
        open_templates = still_open
    if len(items) < count:
        logger.warning("generated %d of %d items", len(items), count)
    return split_dataset(items, train_fraction, seed)


def type_counts(items):
    """ Number of items per question type, in type order. """
    counts = Counter()
    for it in items:
        counts[it.qtype] += 1
    return {qt.value: counts[qt] for qt in QueryType if counts[qt]}


# --- benchmark files
def write_bench(items, path):
    """ One JSON object per line, fields in a fixed order. """
    text = ''.join(json.dumps(it.to_dict(), ensure_ascii=False) + '\n'
                   for it in items)
    atomic_write_text(path, text)
    return Path(path)


def read_bench(path) -> List[BenchItem]:
    """ Read a benchmark file written by :func:`write_bench`.

    Raises:
        BenchFileError: a malformed line or a duplicate id, with its line
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as e:
        raise ee.BenchFileError(path, 0, str(e))
    items = []
    ids = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            item = BenchItem.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError, AttributeError) as e:
            raise ee.BenchFileError(path, line_no, f"{type(e).__name__}: {e}")
        if item.id in ids:
            raise ee.BenchFileError(path, line_no,
                                    f"duplicate item id '{item.id}'")
        ids.add(item.id)
        items.append(item)
    return items
