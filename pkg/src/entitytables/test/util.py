#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Scripted backends, fake HTTP sessions and synthetic tables for tests

.. codeauthor: entitytables developers
"""
import json
import re
from urllib.parse import quote, unquote

import numpy as np

from entitytables.llmgateway import FunctionBackend, Gateway
from entitytables.tablegen import NAME, Column, PropertyTable, TableSchema
from entitytables.values import MISSING, ColumnKind
from entitytables.wikigraph import Edge, EntityRef, WikiGraph

# a phrase that only the given prompt template contains
template_markers = {
    'semantic_analysis': 'Analyze the question below',
    'draft_sparql': 'Write a SPARQL query',
    'repair_sparql': 'The SPARQL query below is not valid',
    'disambiguate': 'Which knowledge-base',
    'schema': 'Create a table schema',
    'critique_schema': 'Review the table schema',
    'extract_row': 'Extract the following attributes of',
    'generate_sql': 'Write one SQLite-style SELECT',
    'repair_sql': 'The SQL query below failed',
    'select_columns': 'of these columns does the question refer to',
    'refine_question': 'Rewrite the question below',
    }


def template_of(prompt):
    for tid, marker in template_markers.items():
        if marker in prompt:
            return tid
    raise AssertionError(f"unrecognized prompt: {prompt[:60]!r}")


class ScriptedBackend(FunctionBackend):
    """ Replies by prompt template.

    ``replies`` maps a template id to a reply string, a list of strings
    served in turn, or a callable taking the prompt. Every call is logged
    in ``calls`` as (template id, prompt).
    """

    def __init__(self, replies):
        super().__init__(self._reply, 'scripted')
        self.replies = {k: (list(v) if isinstance(v, list) else v)
                        for k, v in replies.items()}
        self.calls = []

    def _reply(self, request):
        tid = template_of(request.prompt)
        self.calls.append((tid, request.prompt))
        if tid not in self.replies:
            raise AssertionError(f"no scripted reply for {tid}")
        reply = self.replies[tid]
        if isinstance(reply, list):
            return reply.pop(0) if len(reply) > 1 else reply[0]
        if callable(reply):
            return reply(request.prompt)
        return reply

    def templates_called(self):
        return [tid for tid, _ in self.calls]


def scripted_gateway(replies):
    backend = ScriptedBackend(replies)
    return Gateway(backend), backend


class FakeResponse():

    def __init__(self, status_code=200, data=None, text=None):
        self.status_code = status_code
        self._data = data
        self.text = text if text is not None else json.dumps(data)

    def json(self):
        if self._data is None:
            return json.loads(self.text)
        return self._data


class FakeSession():
    """ Stands in for requests.Session; ``handler(method, url, kwargs)``
    returns a FakeResponse or raises. Calls are logged. """

    def __init__(self, handler):
        self.handler = handler
        self.headers = {}
        self.calls = []

    def request(self, method, url, **kwargs):
        self.calls.append((method, url, kwargs))
        return self.handler(method, url, kwargs)


def sparql_reply(rows):
    """ A SPARQL JSON results document for a list of plain dicts. """
    return {'head': {'vars': sorted({k for r in rows for k in r})},
            'results': {'bindings': [
                {k: {'type': 'literal', 'value': v} for k, v in r.items()}
                for r in rows]}}


def make_table(name, columns, rows, ids=None):
    """ A PropertyTable from (column name, kind) pairs and raw rows, each
    row starting with the entity name. """
    schema = TableSchema(name, [NAME] + [Column(c, ColumnKind.parse(k),
                                                f"the {c}")
                                         for c, k in columns])
    ids = ids or [f"Q{i+1}" for i in range(len(rows))]
    records = [(eid, dict(zip(schema.column_names, row)))
               for eid, row in zip(ids, rows)]
    return PropertyTable.from_records(schema, records)


def synthetic_topic_table(name, n_rows, n_numeric=12, n_text=3, seed=0,
                          prefix='Q'):
    """ A gold table of ``n_rows`` uniquely named entities with numeric
    columns drawn from a seeded generator and a few low-cardinality text
    columns. """
    rng = np.random.default_rng(seed)
    columns = ([(f"measure_{k}", 'decimal') for k in range(n_numeric)]
               + [(f"group_{k}", 'text') for k in range(n_text)])
    rows = []
    for i in range(n_rows):
        row = [f"{name} item {i}"]
        row += [round(float(rng.normal(100 + 10*k, 5 + k)), 3)
                for k in range(n_numeric)]
        row += [f"kind {int(rng.integers(4))}" for _ in range(n_text)]
        rows.append(row)
    ids = [f"{prefix}{i+1}" for i in range(n_rows)]
    return make_table(name.lower().replace(' ', '_'), columns, rows, ids)


def ring_graph(table, chords=True):
    """ A graph over a table's entities: a ring, plus every third entity
    joined to the one two steps ahead. """
    graph = WikiGraph()
    ids = list(table.entity_ids)
    names = table.column('name')
    for eid, label in zip(ids, names):
        graph.add_entity(EntityRef(eid, label))
    n = len(ids)
    for i in range(n):
        graph.add_edge(Edge(ids[i], ids[(i+1) % n], 'P1'))
        if chords and i % 3 == 0:
            graph.add_edge(Edge(ids[i], ids[(i+2) % n], 'P2'))
    return graph


SPARQL_URL = 'https://query.wikidata.org/sparql'
SEARCH_URL = 'https://www.wikidata.org/w/api.php'
PAGES_URL = 'https://en.wikipedia.org/api/rest_v1/page/summary/'
WD = 'http://www.wikidata.org/entity/'

relation_labels = {'P31': 'instance of', 'P39': 'position held',
                   'P166': 'award received'}
_root_triple = re.compile(r'wdt:(P\d+) wd:(Q\d+)')
_paging = re.compile(r'LIMIT (\d+)\s+OFFSET (\d+)\s*$')


def root_ids(topic):
    """ (property id, class id) of the triple in a topic's root query. """
    return _root_triple.search(topic.root_query).groups()


def intro_of(name, topic):
    return f"'''{name}''' is a {topic.entity}."


class FixtureKnowledgeBase():
    """ A FakeSession handler serving topic gold tables as the public
    endpoints would: root queries list the entities with their articles,
    mentions resolve to the root query's ids and every entity has a page.
    """

    def __init__(self, topics, tables):
        self.rows = {}
        self.found = {}
        self.pages = {}
        for topic in topics:
            table = tables[topic.name]
            pid, qid = root_ids(topic)
            names = [str(n) for n in table.column('name')]
            self.rows[(pid, qid)] = [
                {'item': WD + eid, 'itemLabel': name,
                 'article': 'https://en.wikipedia.org/wiki/'
                            + quote(name.replace(' ', '_'))}
                for eid, name in zip(table.entity_ids, names)]
            self.found[topic.entity] = (qid, topic.entity, topic.entities)
            self.found[relation_labels[pid]] = (pid, relation_labels[pid],
                                                'relation')
            self.pages.update((n, intro_of(n, topic)) for n in names)

    def __call__(self, method, url, kwargs):
        params = kwargs.get('params') or {}
        if url == SPARQL_URL:
            query = params['query']
            rows = []
            for key in _root_triple.findall(query):
                rows = self.rows.get(key, rows)
            m = _paging.search(query)
            if m:
                limit, offset = int(m.group(1)), int(m.group(2))
                rows = rows[offset:offset + limit]
            return FakeResponse(data=sparql_reply(rows))
        if url == SEARCH_URL:
            hit = self.found.get(params.get('search'))
            return FakeResponse(data={'search': [
                {'id': hit[0], 'label': hit[1], 'description': hit[2]}]
                if hit else []})
        if url.startswith(PAGES_URL.rstrip('/')):
            title = unquote(url.rsplit('/', 1)[-1]).replace('_', ' ')
            if title in self.pages:
                return FakeResponse(data={'extract': self.pages[title]})
        return FakeResponse(404, data={'status': 404})


def _line_after(marker, prompt):
    m = re.search(re.escape(marker) + r'(.*)$', prompt, re.MULTILINE)
    if m is None:
        raise AssertionError(f"no {marker!r} in prompt")
    return m.group(1).strip()


def _json_cell(value):
    if value is MISSING:
        return None
    if hasattr(value, 'isoformat'):
        return value.isoformat()
    return value


class GoldModel():
    """ Replies a flawless model would give for benchmark items over topic
    gold tables, keyed by the question text in each prompt.

    ``replies()`` feeds a ScriptedBackend: the analysis names the topic's
    entity and root relation, the draft is the topic's root query with
    placeholders, the schema is the topic's schema, extraction reads the
    gold row and the SQL is the item's gold query.
    """

    def __init__(self, topics, tables, items):
        by_name = {t.name: t for t in topics}
        self.items = {it.question: it for it in items}
        self.topics = {it.question: by_name[it.topic] for it in items}
        self.cells = {}
        for topic in topics:
            table = tables[topic.name]
            columns = table.schema.column_names[1:]
            for row in table.rows:
                self.cells[str(row[0])] = {
                    c: _json_cell(v) for c, v in zip(columns, row[1:])}

    def replies(self):
        return {'semantic_analysis': self.analysis,
                'draft_sparql': self.draft,
                'schema': self.schema,
                'critique_schema': json.dumps({'renames': {}, 'unused': []}),
                'extract_row': self.extract,
                'generate_sql': self.sql}

    def analysis(self, prompt):
        question = _line_after('Question: ', prompt)
        topic, item = self.topics[question], self.items[question]
        pid, _ = root_ids(topic)
        return json.dumps({'entities': [topic.entity],
                           'relations': [relation_labels[pid]],
                           'properties': list(item.meta.get('columns', [])),
                           'qtype': item.qtype.value, 'hops': 1})

    def draft(self, prompt):
        topic = self.topics[_line_after('Question: ', prompt)]
        return _root_triple.sub('wdt:PROP_1 wd:ENT_1', topic.root_query,
                                count=1)

    def schema(self, prompt):
        topic = self.topics[_line_after('answer this question: ', prompt)]
        return json.dumps(topic.schema().to_dict())

    def extract(self, prompt):
        m = re.search(r'attributes of (.+) from the text', prompt)
        return json.dumps(self.cells[m.group(1)])

    def sql(self, prompt):
        return self.items[_line_after('Question: ', prompt)].gold.meta['sql']
