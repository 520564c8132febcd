#!/usr/bin/env python3
# -*- coding: utf-8 -*-
""" unit test for the graph model and question types

.. codeauthor: entitytables developers
"""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from entitytables import entityerror as ee
from entitytables.wikigraph import (Category, Edge, EntityRef,
                                    MultiEntityQuestion, QueryType,
                                    RelationRef, WikiGraph, neighbors)


def small_graph():
    g = WikiGraph()
    for eid, label in [('Q1', 'Ada'), ('Q2', 'Bob'), ('Q3', 'Cy'),
                       ('Q4', 'Di'), ('Q5', 'Ed')]:
        g.add_entity(EntityRef(eid, label))
    g.add_relation(RelationRef('P1', 'advisor'))
    g.add_edge(Edge('Q1', 'Q2', 'P1'))
    g.add_edge(Edge('Q2', 'Q3', 'P1'))
    g.add_edge(Edge('Q2', 'Q4', 'P1'))
    g.add_edge(Edge('Q4', 'Q5', 'P2'))
    return g


class WikiGraphTestCase(unittest.TestCase):

    def test_add_entity_idempotent(self):
        g = small_graph()
        g.add_entity(EntityRef('Q1', 'Ada'))
        self.assertEqual(len(g), 5)

    def test_add_entity_conflict(self):
        g = small_graph()
        with self.assertRaises(ee.GraphConflictError):
            g.add_entity(EntityRef('Q1', 'Ada Lovelace'))

    def test_edge_needs_endpoints(self):
        g = small_graph()
        with self.assertRaises(ee.MissingEntityError):
            g.add_edge(Edge('Q1', 'Q99', 'P1'))
        self.assertEqual(len(g.edges), 4)

    def test_duplicate_edges_collapse(self):
        g = small_graph()
        g.add_edge(Edge('Q1', 'Q2', 'P1'))
        self.assertEqual(len(g.edges), 4)

    def test_property_owner_must_exist(self):
        g = small_graph()
        g.add_property('Q1', 'born', '1815', 'date')
        g.add_property(Edge('Q1', 'Q2', 'P1'), 'since', '1840')
        with self.assertRaises(ee.MissingEntityError):
            g.add_property('Q42', 'born', '1900')
        with self.assertRaises(ee.MissingEntityError):
            g.add_property(Edge('Q1', 'Q3', 'P1'), 'since', '1840')
        self.assertEqual(g.node_properties('Q1')['born'].kind, 'date')

    def test_neighbors_hops(self):
        g = small_graph()
        self.assertEqual(neighbors(g, 'Q1', 'P1', 0), {g.entity('Q1')})
        self.assertEqual({e.id for e in neighbors(g, 'Q1', 'P1', 1)}, {'Q2'})
        self.assertEqual({e.id for e in neighbors(g, 'Q1', 'P1', 2)},
                         {'Q3', 'Q4'})
        self.assertEqual(neighbors(g, 'Q1', 'P1', 3), set())

    def test_neighbors_relation_per_hop(self):
        g = small_graph()
        found = neighbors(g, 'Q2', ['P1', 'P2'], 2)
        self.assertEqual({e.id for e in found}, {'Q5'})
        with self.assertRaises(ValueError):
            neighbors(g, 'Q2', ['P1', 'P2'], 3)

    def test_neighbors_unknown_relation(self):
        g = small_graph()
        self.assertEqual(neighbors(g, 'Q1', 'P404', 1), set())
        with self.assertRaises(ee.MissingEntityError):
            neighbors(g, 'Q404', 'P1', 1)

    def test_relationship_queries(self):
        g = small_graph()
        self.assertTrue(g.edge_between('Q2', 'Q1'))
        self.assertFalse(g.edge_between('Q1', 'Q3'))
        self.assertEqual(g.adjacent('Q2'), {'Q1', 'Q3', 'Q4'})
        self.assertEqual(g.shared_neighbors('Q1', 'Q3'), {'Q2'})
        self.assertEqual(g.shared_neighbors('Q1', 'Q5'), set())

    def test_dump_load(self):
        g = small_graph()
        g.add_property('Q3', 'field', 'logic')
        g.add_property(Edge('Q2', 'Q3', 'P1'), 'since', '1901')
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp)/'graph.jsonl'
            g.dump(path)
            h = WikiGraph.load(path)
            self.assertEqual(h.entities, g.entities)
            self.assertEqual(h.edges, g.edges)
            self.assertEqual(h.properties, g.properties)
            self.assertEqual(h.validate(), [])
            second = Path(tmp)/'again.jsonl'
            h.dump(second)
            self.assertEqual(path.read_text(encoding='utf-8'),
                             second.read_text(encoding='utf-8'))

    def test_load_bad_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp)/'graph.jsonl'
            path.write_text('{"record": "entity", "id": "Q1", "label": "A"}\n'
                            'not json\n', encoding='utf-8')
            with self.assertRaises(ee.GraphFileError) as cm:
                WikiGraph.load(path)
            self.assertEqual(cm.exception.line_no, 2)
            self.assertEqual(cm.exception.exit_code, ee.EXIT_INTEGRITY)


class QueryTypeTestCase(unittest.TestCase):

    def test_categories(self):
        counts = {c: 0 for c in Category}
        for qt in QueryType:
            counts[qt.category] += 1
        self.assertEqual(counts, {Category.Comparison: 2,
                                  Category.Statistics: 4,
                                  Category.Relationship: 2})

    def test_parse_spellings(self):
        for text in ('VarianceAnalysis', 'Variance Analysis',
                     'variance_analysis'):
            self.assertIs(QueryType.parse(text), QueryType.VarianceAnalysis)
        with self.assertRaises(ValueError):
            QueryType.parse('Trivia')

    def test_question_needs_text(self):
        with self.assertRaises(ValueError):
            MultiEntityQuestion('  ')
        q = MultiEntityQuestion('Which city is largest?', 'Superlative')
        self.assertIs(q.qtype, QueryType.Superlative)


def random_graph(rng):
    g = WikiGraph()
    n = int(rng.integers(1, 51))
    for i in range(n):
        g.add_entity(EntityRef(f"Q{i}", f"node {i}"))
    rels = ['P1', 'P2']
    for rel in rels:
        g.add_relation(RelationRef(rel))
    for _ in range(int(rng.integers(0, 2*n + 1))):
        s, t = rng.integers(n, size=2)
        g.add_edge(Edge(f"Q{s}", f"Q{t}", rels[int(rng.integers(2))]))
    return g


def walk_ends(edges, start, rels):
    """ End points of every edge sequence from ``start`` along ``rels``. """
    if not rels:
        return {start}
    ends = set()
    for e in edges:
        if e.source == start and e.relation == rels[0]:
            ends |= walk_ends(edges, e.target, rels[1:])
    return ends


class NeighborsOracleTestCase(unittest.TestCase):

    def test_against_walk_enumeration(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            g = random_graph(rng)
            edges = sorted(g.edges, key=lambda e: (e.source, e.target,
                                                   e.relation))
            start = f"Q{int(rng.integers(len(g)))}"
            for k in range(4):
                expected = walk_ends(edges, start, ['P1']*k)
                found = {e.id for e in neighbors(g, start, 'P1', k)}
                self.assertEqual(found, expected, (start, k))
            mixed = ['P1', 'P2', 'P1']
            self.assertEqual({e.id for e in neighbors(g, start, mixed, 3)},
                             walk_ends(edges, start, mixed))


if __name__ == '__main__':
    unittest.main(verbosity=2)
