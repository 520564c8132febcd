#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Build a relational table from a question and its retrieved entities

The table is built in four steps:

    1. generate_schema: the language model proposes typed columns
    2. critique_schema: a second pass specializes generic columns and
       flags unused ones; mechanical checks then enforce the schema rules
    3. extract_row: one extraction call per entity fills a row from the
       entity's page introduction
    4. normalize_values: synonyms and number formats are made uniform

Every table starts with the ``name`` column holding the entity label.

.. codeauthor: entitytables developers
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List

import pandas as pd

from . import entityerror as ee
from .caselessDictionary import CaselessDictionary, fold_key
from .llmgateway import TaskClass, parse_structured
from .util import Counter, atomic_write_text, slugify
from .values import (MISSING, ColumnKind, SynonymDictionary, coerce,
                     format_value, is_null_text)

logger = logging.getLogger(__name__)

NAME_COLUMN = 'name'
ID_COLUMN = 'entity_id'


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind = ColumnKind.text
    description: str = ''

    def to_dict(self):
        return {'name': self.name, 'kind': self.kind.value,
                'description': self.description}


NAME = Column(NAME_COLUMN, ColumnKind.text, 'the entity name')


@dataclass
class TableSchema:
    """ Ordered, typed columns of a property table.

    Rules: the first column is ``name``; column names are unique after
    folding; at least one column follows ``name``; no two columns share a
    description.
    """
    table_name: str
    columns: List[Column]

    def __post_init__(self):
        problems = schema_problems(self.columns)
        if problems:
            raise ValueError('; '.join(problems))
        self._index = CaselessDictionary(
            (c.name, i) for i, c in enumerate(self.columns))

    def __len__(self):
        return len(self.columns)

    def __eq__(self, other):
        return (isinstance(other, TableSchema)
                and self.table_name == other.table_name
                and self.columns == other.columns)

    @property
    def column_names(self):
        return [c.name for c in self.columns]

    def has_column(self, name):
        return name in self._index

    def index(self, name):
        return self._index[name]

    def column(self, name):
        return self.columns[self._index[name]]

    def describe(self):
        """ One line per column, for prompts. """
        return '\n'.join(f"- {c.name} ({c.kind.value}): {c.description}"
                         for c in self.columns)

    def to_dict(self):
        return {'table_name': self.table_name,
                'columns': [c.to_dict() for c in self.columns]}

    @classmethod
    def from_dict(cls, data):
        return cls(data['table_name'],
                   [Column(c['name'], ColumnKind.parse(c.get('kind', 'text')),
                           c.get('description', ''))
                    for c in data['columns']])


def schema_problems(columns):
    problems = []
    if not columns or fold_key(columns[0].name) != NAME_COLUMN:
        problems.append("first column must be 'name'")
    if len(columns) < 2:
        problems.append("no column besides 'name'")
    names = [fold_key(c.name) for c in columns]
    if len(set(names)) != len(names):
        problems.append('duplicate column names')
    if ID_COLUMN in names:
        problems.append(f"'{ID_COLUMN}' is reserved")
    descs = [fold_key(c.description) for c in columns if c.description]
    if len(set(descs)) != len(descs):
        problems.append('duplicate column descriptions')
    return problems


def mechanical_checks(columns, renames=None, unused=()):
    """ Apply critique edits and the schema rules to a column list.

    Renames and drops never touch ``name``. Columns repeating an earlier
    name or description are dropped, and ``name`` is moved or added to the
    front. The result is a fixed point when ``renames`` and ``unused`` are
    empty.

    Returns:
        list of Column
    """
    rename = CaselessDictionary(renames or {})
    drop = {fold_key(u) for u in unused}
    out = []
    seen_names = set()
    seen_descs = set()
    name_col = None
    for c in columns:
        key = fold_key(c.name)
        if key == NAME_COLUMN:
            if name_col is None:
                name_col = c
            continue
        if key in drop or key == ID_COLUMN:
            continue
        if c.name in rename and str(rename[c.name]).strip():
            c = replace(c, name=str(rename[c.name]).strip())
            key = fold_key(c.name)
            if key == NAME_COLUMN:
                continue
        desc = fold_key(c.description)
        if key in seen_names or (desc and desc in seen_descs):
            logger.info("dropping redundant column '%s'", c.name)
            continue
        seen_names.add(key)
        if desc:
            seen_descs.add(desc)
        out.append(c)
    if name_col is None or fold_key(name_col.description) in seen_descs:
        name_col = NAME
    return [replace(name_col, name=NAME_COLUMN, kind=ColumnKind.text)] + out


def _columns_from(data):
    if not isinstance(data, list):
        raise ValueError('columns is not a list')
    columns = []
    for c in data:
        if isinstance(c, str):
            c = {'name': c}
        if not isinstance(c, dict) or not str(c.get('name', '')).strip():
            raise ValueError(f"bad column entry {c!r}")
        columns.append(Column(str(c['name']).strip(),
                              ColumnKind.parse(c.get('kind', 'text')),
                              str(c.get('description') or '').strip()))
    return columns


def schema_from_reply(raw, default_name='entities'):
    """ Parse a schema reply.

    Raises:
        SchemaParseError: the reply holds no usable column list
    """
    try:
        data = parse_structured(raw)
    except ee.LlmOutputError as e:
        raise ee.SchemaParseError(raw, e.reason)
    if isinstance(data, list):
        data = {'columns': data}
    try:
        columns = mechanical_checks(_columns_from(data.get('columns')))
        name = slugify(data.get('table_name') or default_name) or 'entities'
        return TableSchema(name.replace('-', '_'), columns)
    except ValueError as e:
        raise ee.SchemaParseError(raw, str(e))


@dataclass
class PropertyTable:
    """ One row per entity, values aligned to the schema's columns.

    A cell holding MISSING is a missing cell; every other cell is filled.
    """
    schema: TableSchema
    entity_ids: List[str]
    rows: List[list]
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.entity_ids) != len(self.rows):
            raise ValueError('one entity id per row required')
        if len(set(self.entity_ids)) != len(self.entity_ids):
            raise ValueError('duplicate entity id in table')
        width = len(self.schema.columns)
        for eid, row in zip(self.entity_ids, self.rows):
            if len(row) != width:
                raise ValueError(f"row {eid} has {len(row)} cells, "
                                 f"expected {width}")

    def __len__(self):
        return len(self.rows)

    @classmethod
    def from_records(cls, schema, records):
        """ Build from (entity id, {column: raw value}) pairs, coercing. """
        ids = []
        rows = []
        for eid, values in records:
            values = CaselessDictionary(values)
            ids.append(eid)
            rows.append([coerce(values.get(c.name), c.kind)
                         for c in schema.columns])
        return cls(schema, ids, rows)

    def column(self, name):
        j = self.schema.index(name)
        return [row[j] for row in self.rows]

    def flags(self):
        """ Per-cell 'filled' or 'missing'. """
        return [['missing' if v is MISSING else 'filled' for v in row]
                for row in self.rows]

    def completeness(self):
        total = len(self.rows) * len(self.schema.columns)
        missing = sum(v is MISSING for row in self.rows for v in row)
        return {'missing_cells': missing, 'total_cells': total,
                'omission_rate': missing / total if total else 0.0}

    def samples(self, k=5):
        return self.rows[:k]

    def to_frame(self):
        """ DataFrame with the entity id column first; MISSING as None. """
        data = [[eid] + [None if v is MISSING else v for v in row]
                for eid, row in zip(self.entity_ids, self.rows)]
        return pd.DataFrame(data, columns=[ID_COLUMN]
                            + self.schema.column_names)

    def save(self, path):
        """ Write ``path`` (CSV) and its ``.schema.json`` sidecar. """
        path = Path(path)
        text_rows = [[eid] + [format_value(v) for v in row]
                     for eid, row in zip(self.entity_ids, self.rows)]
        df = pd.DataFrame(text_rows,
                          columns=[ID_COLUMN] + self.schema.column_names)
        atomic_write_text(path, df.to_csv(index=False, lineterminator='\n'))
        sidecar = dict(self.schema.to_dict())
        sidecar['completeness'] = self.completeness()
        sidecar['missing'] = [[i, j] for i, row in enumerate(self.rows)
                              for j, v in enumerate(row) if v is MISSING]
        atomic_write_text(sidecar_path(path),
                          json.dumps(sidecar, ensure_ascii=False, indent=1)
                          + '\n')
        return path

    @classmethod
    def load(cls, path):
        """ Read a table written by :meth:`save`.

        Raises:
            TableFileError: missing sidecar, header mismatch or bad JSON
        """
        path = Path(path)
        try:
            sidecar = json.loads(sidecar_path(path).read_text(
                encoding='utf-8'))
            schema = TableSchema.from_dict(sidecar)
        except (OSError, ValueError, KeyError) as e:
            raise ee.TableFileError(sidecar_path(path), str(e))
        try:
            df = pd.read_csv(path, dtype=str, keep_default_na=False)
        except (OSError, ValueError) as e:
            raise ee.TableFileError(path, str(e))
        expected = [ID_COLUMN] + schema.column_names
        if list(df.columns) != expected:
            raise ee.TableFileError(path, f"header {list(df.columns)} does "
                                    f"not match schema {expected}")
        rows = [[MISSING if cell == '' else coerce(cell, c.kind)
                 for cell, c in zip(record[1:], schema.columns)]
                for record in df.itertuples(index=False, name=None)]
        try:
            return cls(schema, list(df[ID_COLUMN]), rows)
        except ValueError as e:
            raise ee.TableFileError(path, str(e))


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.stem + '.schema.json')


def demote_kinds(schema, raw_rows, threshold=0.5):
    """ Switch a column to text when more than ``threshold`` of its
    non-null raw values fail coercion to the declared kind. """
    columns = list(schema.columns)
    for j, c in enumerate(columns):
        if c.kind is ColumnKind.text:
            continue
        observed = [r[j] for r in raw_rows if not is_null_text(r[j])]
        if not observed:
            continue
        failed = sum(coerce(v, c.kind) is MISSING for v in observed)
        if failed > threshold * len(observed):
            logger.warning("column '%s': %d of %d values are not %s, "
                           "using text", c.name, failed, len(observed),
                           c.kind.value)
            columns[j] = replace(c, kind=ColumnKind.text)
    return TableSchema(schema.table_name, columns)


class TableBuilder():
    """ The table generation stages.

    Attributes:
        gateway: the language model Gateway
        synonyms: SynonymDictionary used by normalize_values
        pool: thread pool for per-entity extraction
    """

    def __init__(self, gateway, synonyms=None, workers=8, pool=None):
        self.gateway = gateway
        self.synonyms = synonyms if synonyms is not None \
            else SynonymDictionary()
        self.pool = (pool if pool is not None
                     else ThreadPoolExecutor(max_workers=workers))

    def generate_schema(self, q) -> TableSchema:
        if q.qtype is None:
            raise ValueError('generate_schema needs an analyzed question')
        topic = q.topic or q.text
        raw = self.gateway.ask(TaskClass.SchemaGeneration, 'schema',
                               {'topic': topic, 'question': q.text})
        schema = schema_from_reply(raw, default_name=topic)
        logger.info("schema %s: %s", schema.table_name, schema.column_names)
        return schema

    def critique_schema(self, q, schema: TableSchema) -> TableSchema:
        """ Refine ``schema``; an unusable critique keeps the original. """
        raw = self.gateway.ask(TaskClass.SchemaGeneration, 'critique_schema',
                               {'question': q.text,
                                'schema': json.dumps(schema.to_dict(),
                                                     ensure_ascii=False)})
        try:
            data = parse_structured(raw)
            if not isinstance(data, dict):
                raise ValueError('critique is not a JSON object')
            columns = (_columns_from(data['columns']) if data.get('columns')
                       else schema.columns)
            refined = TableSchema(
                schema.table_name,
                mechanical_checks(columns, data.get('renames') or {},
                                  data.get('unused') or ()))
        except (ee.LlmOutputError, ValueError, TypeError,
                AttributeError) as e:
            logger.warning("schema critique ignored: %s", e)
            return schema
        if refined != schema:
            logger.info("critique: %s -> %s", schema.column_names,
                        refined.column_names)
        return refined

    def _extract_raw(self, entity, intro, schema):
        raw = [None] * len(schema.columns)
        raw[schema.index(NAME_COLUMN)] = entity.label or entity.id
        if not intro or not intro.strip():
            logger.info("no intro for %s, row left empty", entity.id)
            return raw
        listing = '\n'.join(f"- {c.name} ({c.kind.value}): {c.description}"
                            for c in schema.columns
                            if fold_key(c.name) != NAME_COLUMN)
        try:
            reply = self.gateway.ask(
                TaskClass.InformationExtraction, 'extract_row',
                {'entity': entity.label or entity.id, 'columns': listing,
                 'intro': intro})
            data = parse_structured(reply)
            if not isinstance(data, dict):
                raise ee.LlmOutputError(reply, 'extraction is not an object')
        except (ee.LlmOutputError, ee.TransportError) as e:
            logger.warning("extraction failed for %s: %s", entity.id, e)
            return raw
        values = CaselessDictionary(data)
        for j, c in enumerate(schema.columns):
            if fold_key(c.name) == NAME_COLUMN:
                continue
            v = values.get(c.name)
            raw[j] = v if not isinstance(v, (list, dict)) else None
        return raw

    def extract_row(self, entity, intro, schema: TableSchema) -> list:
        """ One value or MISSING per column of ``schema``. """
        raw = self._extract_raw(entity, intro, schema)
        return [coerce(v, c.kind) for v, c in zip(raw, schema.columns)]

    def normalize_values(self, table: PropertyTable) -> PropertyTable:
        """ Make equal-meaning cells identical.

        Text columns other than ``name`` map through the synonym dictionary
        and then to the first spelling seen of each case-folded value.
        Numeric and date columns are re-coerced from any text left in them.
        """
        subs = Counter()
        columns = table.schema.columns
        rows = [list(r) for r in table.rows]
        for j, c in enumerate(columns):
            if fold_key(c.name) == NAME_COLUMN:
                continue
            if c.kind is not ColumnKind.text:
                for row in rows:
                    if isinstance(row[j], str):
                        row[j] = coerce(row[j], c.kind)
                continue
            spelling = {}
            for row in rows:
                v = row[j]
                if v is MISSING:
                    continue
                text = ' '.join(str(v).split())
                canon = self.synonyms.canonical(text)
                canon = spelling.setdefault(fold_key(canon), canon)
                if canon != v:
                    subs[f"{c.name}: {v} -> {canon}"] += 1
                    row[j] = canon
        for sub, n in sorted(subs.items()):
            logger.info("normalized %s (%d)", sub, n)
        return PropertyTable(table.schema, list(table.entity_ids), rows,
                             dict(table.stats))

    def build_table(self, q, r) -> PropertyTable:
        """ Schema, one row per retrieved entity, normalization.

        Raises:
            EmptyTableError: ``r`` has no entities
        """
        if not r.entities:
            raise ee.EmptyTableError(q.text)
        schema = self.critique_schema(q, self.generate_schema(q))
        return self.fill_table(schema, r)

    def fill_table(self, schema, r, demote=True) -> PropertyTable:
        """ Extract and normalize one row per entity of ``r`` under a
        fixed ``schema``; with ``demote`` sparse numeric columns become
        text. """
        raw_rows = list(self.pool.map(
            lambda e: self._extract_raw(e, r.intros.get(e.id, ''), schema),
            r.entities))
        if demote:
            schema = demote_kinds(schema, raw_rows)
        rows = [[coerce(v, c.kind) for v, c in zip(raw, schema.columns)]
                for raw in raw_rows]
        table = PropertyTable(schema, [e.id for e in r.entities], rows)
        table = self.normalize_values(table)
        table.stats = table.completeness()
        logger.info("table %s: %d rows, omission rate %.4f",
                    schema.table_name, len(table),
                    table.stats['omission_rate'])
        return table
