#!/usr/bin/env python3
# -*- coding: utf-8 -*-
""" unit test for question analysis, SPARQL drafting, id resolution and
multi-hop retrieval

.. codeauthor: entitytables developers
"""

import json
import unittest
from concurrent.futures import ThreadPoolExecutor

from entitytables import entityerror as ee
from entitytables import sparql as sp
from entitytables.retrieval import (Candidate, Resolution, Retriever,
                                    SemanticParse, bind_references)
from entitytables.test.util import scripted_gateway
from entitytables.wikigraph import EntityRef, MultiEntityQuestion, QueryType

WD = 'http://www.wikidata.org/entity/'

label_service = ('  SERVICE wikibase:label { bd:serviceParam '
                 'wikibase:language "en". }')


def draft(*patterns):
    body = '\n'.join(f"  {p} ." for p in patterns)
    return ("```sparql\nSELECT ?item ?itemLabel WHERE {\n" + body + '\n'
            + label_service + "\n}\n```")


def analysis(entities, relations, qtype='Superlative', hops=None,
             properties=()):
    doc = {'entities': entities, 'relations': relations,
           'properties': list(properties), 'qtype': qtype}
    if hops is not None:
        doc['hops'] = hops
    return json.dumps(doc)


def binding_rows(*pairs):
    return [{'item': WD + eid, 'itemLabel': label} for eid, label in pairs]


class FakeKnowledgeBase():
    """ In-memory stand-in for the KnowledgeBaseClient.

    ``answers`` is a list of (substring, rows); a query gets the rows of the
    first substring it contains.
    """
    sparql_endpoint = 'http://kb.local/sparql'

    def __init__(self, search=None, answers=(), sitelinks=None, pages=None):
        self.found = search or {}
        self.answers = list(answers)
        self.sitelinks = sitelinks or {}
        self.pages = pages or {}
        self.queries = []

    def search(self, mention, kind='entity', limit=10):
        return list(self.found.get((kind, mention), []))[:limit]

    def sparql(self, query):
        self.queries.append(query)
        for needle, rows in self.answers:
            if needle in query:
                return list(rows)
        return []

    def sitelink(self, entity_id, site='enwiki'):
        return self.sitelinks.get(entity_id)

    def page_intro(self, title):
        if title not in self.pages:
            raise ee.MissingPageError(title)
        return self.pages[title]


presidents_kb = dict(
    search={('entity', 'president of the United States'): [
                ('Q11696', 'President of the United States', 'office')],
            ('property', 'position held'): [
                ('P39', 'position held', 'office held by the subject'),
                ('P768', 'electoral district', 'district represented')]},
    answers=[('wdt:P39 wd:Q11696', binding_rows(
        ('Q23', 'George Washington'), ('Q76', 'Barack Obama'),
        ('Q23', 'George Washington')))],
    sitelinks={'Q23': 'George Washington'},
    pages={'George Washington': "'''George Washington''' was the first "
                                "president.[1]"})


class RetrieverTestCase(unittest.TestCase):

    def retriever(self, replies, kb):
        gateway, backend = scripted_gateway(replies)
        pool = ThreadPoolExecutor(max_workers=2)
        self.addCleanup(pool.shutdown)
        return Retriever(gateway, kb, pool=pool), backend

    def test_single_hop(self):
        kb = FakeKnowledgeBase(**presidents_kb)
        r, backend = self.retriever({
            'semantic_analysis': analysis(['president of the United States'],
                                          ['position held'],
                                          properties=['birth date']),
            'draft_sparql': draft('?item wdt:PROP_1 wd:ENT_1'),
            'disambiguate': 'The answer is 1.',
            }, kb)
        q = MultiEntityQuestion('Which US president was born first?')
        result = r.retrieve(q)
        self.assertEqual([e.id for e in result.entities], ['Q23', 'Q76'])
        self.assertEqual(result.entities[0].label, 'George Washington')
        self.assertEqual(result.intros,
                         {'Q23': 'George Washington was the first president.'})
        self.assertEqual(list(result.missing_pages), ['Q76'])
        exact = result.provenance[0]
        self.assertIs(exact.status, sp.QueryStatus.Exact)
        self.assertIn('wdt:P39 wd:Q11696', exact.text)
        self.assertEqual({ref.resolved for ref in exact.referenced},
                         {'P39', 'Q11696'})
        self.assertIs(q.qtype, QueryType.Superlative)
        self.assertEqual(q.properties, ['birth date'])
        self.assertEqual([e.id for e in q.entities], ['Q23', 'Q76'])
        self.assertEqual(backend.templates_called(),
                         ['semantic_analysis', 'draft_sparql',
                          'disambiguate'])

    def test_existing_type_is_kept(self):
        r, _ = self.retriever({'semantic_analysis': analysis(
            ['city'], [], qtype='Superlative')}, FakeKnowledgeBase())
        q = MultiEntityQuestion('How many cities?', 'Aggregation')
        parse = r.analyze_question(q)
        self.assertIs(parse.qtype, QueryType.Superlative)
        self.assertIs(q.qtype, QueryType.Aggregation)
        self.assertEqual(parse.hop_count, 0)
        self.assertEqual(q.properties, ['name'])

    def test_bad_analysis(self):
        for reply in ('I am not sure.',
                      analysis([], ['position held']),
                      analysis(['city'], [], qtype='Trivia'),
                      '{"entities": ["city"], "qtype": "Aggregation", '
                      '"hops": "two"}'):
            r, _ = self.retriever({'semantic_analysis': reply},
                                  FakeKnowledgeBase())
            with self.assertRaises(ee.SemanticParseError, msg=reply):
                r.analyze_question(MultiEntityQuestion('How many cities?'))

    def test_draft_repair(self):
        r, backend = self.retriever({
            'draft_sparql': 'SELECT ?item WHERE { ?item wdt:PROP_1 }',
            'repair_sparql': draft('?item wdt:PROP_1 wd:ENT_1'),
            }, FakeKnowledgeBase())
        parse = SemanticParse(['city'], ['country'], QueryType.Aggregation, 1)
        rough = r.draft_sparql(parse, 'How many cities are in France?')
        self.assertIs(rough.status, sp.QueryStatus.Rough)
        refs = {(ref.token, ref.mention) for ref in rough.referenced}
        self.assertEqual(refs, {('ENT_1', 'city'), ('PROP_1', 'country')})
        self.assertEqual(backend.templates_called(),
                         ['draft_sparql', 'repair_sparql'])
        self.assertIn('The SPARQL query below is not valid: expected a term',
                      backend.calls[1][1])

    def test_draft_fails_twice(self):
        kb = FakeKnowledgeBase(**presidents_kb)
        r, _ = self.retriever({
            'semantic_analysis': analysis(['president of the United States'],
                                          ['position held']),
            'draft_sparql': 'SELECT ?item WHERE { ?item wdt:PROP_1 }',
            'repair_sparql': 'Sorry, I cannot write that query.',
            }, kb)
        with self.assertRaises(ee.StageError) as cm:
            r.retrieve(MultiEntityQuestion('Who?'))
        self.assertEqual(cm.exception.stage, 'draft_sparql')
        self.assertIsInstance(cm.exception.cause, ee.DraftError)
        self.assertEqual(kb.queries, [])

    def test_resolve_ids(self):
        kb = FakeKnowledgeBase(**presidents_kb)
        r, backend = self.retriever({'disambiguate': ['2', 'none of them']},
                                    kb)
        res = r.resolve_ids('position held', 'property', 'Who held it?')
        self.assertEqual(res.chosen, 'P768')
        res = r.resolve_ids('position held', 'property', 'Who held it?')
        self.assertEqual(res.chosen, 'P39')
        res = r.resolve_ids('position held', 'property')
        self.assertEqual(res.chosen, 'P39')
        self.assertEqual(len(backend.calls), 2)
        self.assertIn('1. P39 position held', backend.calls[0][1])
        with self.assertRaises(ee.UnresolvedMentionError):
            r.resolve_ids('nothing like this', 'entity')
        with self.assertRaises(ValueError):
            r.resolve_ids('  ', 'entity')

    def test_property_retry(self):
        kb = FakeKnowledgeBase(**presidents_kb)
        kb.answers = [('wdt:P768 wd:Q11696', binding_rows(('Q5', 'Someone')))]
        r, _ = self.retriever({
            'semantic_analysis': analysis(['president of the United States'],
                                          ['position held']),
            'draft_sparql': draft('?item wdt:PROP_1 wd:ENT_1'),
            'disambiguate': '1',
            }, kb)
        result = r.retrieve(MultiEntityQuestion('Who?'))
        self.assertEqual([e.id for e in result.entities], ['Q5'])
        self.assertEqual(len(result.provenance), 2)
        self.assertIn('wdt:P768', result.provenance[1].text)
        self.assertEqual(len(kb.queries), 2)

    def test_multihop(self):
        kb = FakeKnowledgeBase(
            search={('entity', 'Turing Award'): [('Q185667', 'Turing Award',
                                                  'prize')],
                    ('property', 'award received'): [('P166', 'award', '')],
                    ('property', 'doctoral advisor'): [('P184', 'advisor',
                                                        '')]},
            answers=[('wdt:P166 wd:Q185667', binding_rows(('Q1', 'Ann'),
                                                          ('Q2', 'Bo'))),
                     ('?source wdt:P184 ?item', binding_rows(
                         ('Q10', 'Cy'), ('Q11', 'Di'), ('Q10', 'Cy')))],
            sitelinks={'Q10': 'Cy'}, pages={'Cy': 'Cy taught logic.'})
        r, backend = self.retriever({
            'semantic_analysis': analysis(['Turing Award'],
                                          ['award received',
                                           'doctoral advisor'], hops=2),
            'draft_sparql': draft('?item wdt:PROP_1 wd:ENT_1'),
            }, kb)
        result = r.retrieve(MultiEntityQuestion(
            'Who advised the Turing Award winners?'))
        self.assertEqual([e.id for e in result.entities], ['Q10', 'Q11'])
        self.assertEqual(len(result.provenance), 2)
        hop = kb.queries[1]
        self.assertIn('VALUES ?source { wd:Q1 wd:Q2 }', hop)
        self.assertEqual(result.intros, {'Q10': 'Cy taught logic.'})
        self.assertIn('PROP_1: award received', backend.calls[1][1])
        self.assertNotIn('doctoral advisor', backend.calls[1][1])

    def test_multihop_property_retry(self):
        kb = FakeKnowledgeBase(
            search={('entity', 'Turing Award'): [('Q185667', 'Turing Award',
                                                  'prize')],
                    ('property', 'award received'): [('P166', 'award', '')],
                    ('property', 'doctoral advisor'): [
                        ('P1066', 'student of', ''),
                        ('P184', 'doctoral advisor', '')]},
            answers=[('wdt:P166 wd:Q185667', binding_rows(('Q1', 'Ann'))),
                     ('?source wdt:P184 ?item', binding_rows(
                         ('Q10', 'Cy')))])
        r, backend = self.retriever({
            'semantic_analysis': analysis(['Turing Award'],
                                          ['award received',
                                           'doctoral advisor'], hops=2),
            'draft_sparql': draft('?item wdt:PROP_1 wd:ENT_1'),
            'disambiguate': '1',
            }, kb)
        result = r.retrieve(MultiEntityQuestion(
            'Who advised the Turing Award winners?'))
        self.assertEqual([e.id for e in result.entities], ['Q10'])
        self.assertEqual(len(result.provenance), 3)
        self.assertIn('?source wdt:P1066 ?item', kb.queries[1])
        self.assertIn('?source wdt:P184 ?item', kb.queries[2])
        self.assertEqual(len(kb.queries), 3)

    def test_decompose(self):
        r, _ = self.retriever({}, FakeKnowledgeBase())
        parse = SemanticParse(['A'], ['r1', 'r2'], QueryType.Aggregation, 3)
        first = sp.SparqlQuery('SELECT * { ?s ?p ?o }')
        steps = r.decompose_multihop(MultiEntityQuestion('q'), parse, first)
        self.assertEqual([(s.index, s.relation_mention) for s in steps],
                         [(1, 'r1'), (2, 'r2'), (3, None)])
        self.assertIs(steps[0].query, first)
        with self.assertRaises(ValueError):
            r.decompose_multihop(MultiEntityQuestion('q'),
                                 SemanticParse(['A'], [],
                                               QueryType.Aggregation, 0),
                                 first)

    def test_refine_leftovers(self):
        r, _ = self.retriever({}, FakeKnowledgeBase())
        rough = sp.SparqlQuery('SELECT ?x WHERE { ?x wdt:PROP_1 wd:ENT_1 }',
                               sp.QueryStatus.Rough,
                               (sp.IdReference('ENT_1', 'city', 'entity'),))
        res = Resolution('city', 'entity', (Candidate('Q515'),), 'Q515')
        with self.assertRaises(ee.RefinementError) as cm:
            r.refine_sparql(rough, [res])
        self.assertEqual(cm.exception.tokens, ['PROP_1'])

    def test_execute_needs_exact(self):
        r, _ = self.retriever({}, FakeKnowledgeBase())
        with self.assertRaises(ValueError):
            r.execute_sparql(sp.SparqlQuery('SELECT * { ?s ?p ?o }'))

    def test_fetch_page_intro(self):
        r, _ = self.retriever({}, FakeKnowledgeBase(**presidents_kb))
        self.assertEqual(r.fetch_page_intro(EntityRef('Q23', 'Washington')),
                         'George Washington was the first president.')
        with self.assertRaises(ee.MissingPageError):
            r.fetch_page_intro(EntityRef('Q76', 'Barack Obama'))
        with self.assertRaises(ee.MissingPageError):
            r.fetch_page_intro(EntityRef('Q76', 'Barack Obama',
                                         'Barack Obama'))

    def test_retrieve_query(self):
        kb = FakeKnowledgeBase(answers=[('wd:Q11696', [
            {'person': WD + 'Q23', 'personLabel': 'George Washington',
             'article': 'https://en.wikipedia.org/wiki/George_Washington'}])],
            pages={'George Washington': 'First president.'})
        r, _ = self.retriever({}, kb)
        result = r.retrieve_query('SELECT ?person ?personLabel ?article '
                                  'WHERE { ?person wdt:P39 wd:Q11696 }')
        self.assertEqual(result.entities,
                         [EntityRef('Q23', 'George Washington',
                                    'George Washington')])
        self.assertEqual(result.intros, {'Q23': 'First president.'})
        self.assertEqual(result.missing_pages, {})


class BindingTestCase(unittest.TestCase):

    def test_placeholders_bind_by_index(self):
        parse = SemanticParse(['city', 'France'], ['country'],
                              QueryType.Aggregation, 1)
        refs = bind_references('SELECT ?x { ?x wdt:PROP_1 wd:ENT_2 ; '
                               'wdt:PROP_3 wd:ENT_1 }', parse)
        self.assertEqual([(r.token, r.mention, r.kind) for r in refs],
                         [('ENT_2', 'France', 'entity'),
                          ('ENT_1', 'city', 'entity'),
                          ('PROP_1', 'country', 'property')])

    def test_concrete_ids_bind_in_order(self):
        parse = SemanticParse(['France'], ['country', 'capital of'],
                              QueryType.Aggregation, 1)
        refs = bind_references('SELECT ?x { ?x wdt:P17 wd:Q142 ; '
                               'wdt:P1376 ?y }', parse)
        self.assertEqual([(r.token, r.mention) for r in refs],
                         [('Q142', 'France'), ('P17', 'country'),
                          ('P1376', 'capital of')])

    def test_structural_ids_are_kept(self):
        parse = SemanticParse(['President of the United States'],
                              ['position held'], QueryType.Superlative, 1)
        text = ('SELECT ?item WHERE { ?item wdt:P31 wd:Q5 . '
                '?item wdt:P39 wd:ENT_1 }')
        refs = bind_references(text, parse)
        self.assertEqual([(r.token, r.mention) for r in refs],
                         [('ENT_1', 'President of the United States')])
        r = Retriever(None, None, pool=ThreadPoolExecutor(max_workers=1))
        self.addCleanup(r.pool.shutdown)
        rough = sp.SparqlQuery(text, sp.QueryStatus.Rough, tuple(refs))
        res = Resolution('President of the United States', 'entity',
                         (Candidate('Q11696'),), 'Q11696')
        exact = r.refine_sparql(rough, [res])
        self.assertIn('?item wdt:P31 wd:Q5', exact.text)
        self.assertIn('?item wdt:P39 wd:Q11696', exact.text)

        many = bind_references('SELECT ?x { ?x wdt:P17 wd:Q142 ; '
                               'wdt:P1376 ?y ; wdt:P31 wd:Q515 }',
                               SemanticParse(['city'], ['country'],
                                             QueryType.Aggregation, 1))
        self.assertEqual(many, [])

    def test_next_candidate(self):
        res = Resolution('held', 'property',
                         (Candidate('P39'), Candidate('P768')), 'P39')
        self.assertEqual(res.next_candidate().chosen, 'P768')
        self.assertIsNone(res.next_candidate().next_candidate())
        with self.assertRaises(ValueError):
            Resolution('held', 'property', (Candidate('P39'),), 'P1')
        with self.assertRaises(ValueError):
            SemanticParse(['a'], [], QueryType.Aggregation, -1)


if __name__ == '__main__':
    unittest.main(verbosity=2)
