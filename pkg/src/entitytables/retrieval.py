#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Multi-entity retrieval through id-validated SPARQL

The retrieval flow for a question is:

    1. analyze_question: the language model names the entity and relation
       mentions, the query type and the number of hops
    2. draft_sparql: the model writes a rough query, usually with
       placeholder or made-up ids
    3. resolve_ids: every mention is looked up in the knowledge-base search
       API and disambiguated
    4. refine_sparql: the draft ids are replaced by the resolved ids
    5. decompose_multihop: further hops are run one at a time, each starting
       from the entity set of the previous one
    6. execute_sparql and fetch_page_intro: the entities and their page
       introductions are fetched through the cached client

.. codeauthor: entitytables developers
"""
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional
from urllib.parse import unquote

from . import entityerror as ee
from . import sparql as sp
from .llmgateway import TaskClass, clean_reply, parse_structured
from .wikigraph import EntityRef, MultiEntityQuestion, QueryType

logger = logging.getLogger(__name__)

DEFAULT_WORKERS = 8


@dataclass
class SemanticParse:
    """ Mentions and structure the language model read from a question. """
    entity_mentions: List[str]
    relation_mentions: List[str]
    qtype: QueryType
    hop_count: int
    property_mentions: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.hop_count < 0:
            raise ValueError('hop_count must be >= 0')


@dataclass(frozen=True)
class Candidate:
    id: str
    label: str = ''
    description: str = ''


@dataclass(frozen=True)
class Resolution:
    """ The ranked search candidates of a mention and the chosen id. """
    mention: str
    kind: str
    candidates: tuple
    chosen: str

    def __post_init__(self):
        ids = [c.id for c in self.candidates]
        if ids and self.chosen not in ids:
            raise ValueError(f"chosen id {self.chosen} is not a candidate")

    def next_candidate(self) -> Optional['Resolution']:
        """ The same resolution with the next-ranked candidate chosen. """
        ids = [c.id for c in self.candidates]
        i = ids.index(self.chosen) + 1
        if i >= len(ids):
            return None
        return replace(self, chosen=ids[i])


@dataclass(frozen=True)
class HopStep:
    """ One sub-query of a decomposed question.

    The first step carries its query; later steps carry the relation to
    follow from the previous step's entities.
    """
    index: int
    relation_mention: Optional[str]
    query: Optional[sp.SparqlQuery] = None


@dataclass
class RetrievalResult:
    entities: List[EntityRef]
    intros: Dict[str, str]
    provenance: List[sp.SparqlQuery]
    missing_pages: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        ids = {e.id for e in self.entities}
        stray = [k for k in self.intros if k not in ids]
        if stray:
            raise ValueError(f"intros for unlisted entities: {stray}")

    def __len__(self):
        return len(self.entities)


def run_stage(stage, fn, *args, **kwargs):
    """ Call ``fn``, wrapping a package error in a StageError tagged
    ``stage``. """
    try:
        return fn(*args, **kwargs)
    except ee.StageError:
        raise
    except ee.EntityTablesError as e:
        raise ee.StageError(stage, e) from e


def _as_list(value):
    if value is None:
        return []
    if isinstance(value, str):
        value = [value]
    return [str(v).strip() for v in value if str(v).strip()]


def entity_id_from_uri(uri):
    return uri.rstrip('/').rsplit('/', 1)[-1]


def _page_title(url):
    return unquote(url.rstrip('/').rsplit('/', 1)[-1]).replace('_', ' ')


class Retriever():
    """ Retrieval stages over a Gateway and a KnowledgeBaseClient.

    Attributes:
        gateway: the language model Gateway
        kb: the KnowledgeBaseClient
        pool: the thread pool used for page-intro fetches
    """

    def __init__(self, gateway, kb, workers=DEFAULT_WORKERS, pool=None):
        self.gateway = gateway
        self.kb = kb
        self.pool = (pool if pool is not None
                     else ThreadPoolExecutor(max_workers=workers))

    def analyze_question(self, q: MultiEntityQuestion) -> SemanticParse:
        raw = self.gateway.ask(TaskClass.SemanticAnalysis,
                               'semantic_analysis', {'question': q.text})
        try:
            data = parse_structured(raw)
        except ee.LlmOutputError as e:
            raise ee.SemanticParseError(raw, e.reason)
        if not isinstance(data, dict):
            raise ee.SemanticParseError(raw, 'reply is not a JSON object')
        entities = _as_list(data.get('entities'))
        if not entities:
            raise ee.SemanticParseError(raw, 'no entity mentions')
        relations = _as_list(data.get('relations'))
        properties = _as_list(data.get('properties'))
        try:
            qtype = QueryType.parse(str(data.get('qtype', '')))
        except ValueError:
            raise ee.SemanticParseError(raw,
                                        f"unknown qtype {data.get('qtype')!r}")
        try:
            hops = int(data.get('hops', len(relations)))
        except (TypeError, ValueError):
            raise ee.SemanticParseError(raw, 'hops is not a number')
        parse = SemanticParse(entities, relations, qtype, max(hops, 0),
                              properties)
        if q.qtype is None:
            q.qtype = qtype
        elif q.qtype is not qtype:
            logger.info("question typed %s, analysis suggests %s",
                        q.qtype.value, qtype.value)
        q.properties = properties or relations or ['name']
        logger.info("analyzed: entities %s, relations %s, %d hops",
                    entities, relations, parse.hop_count)
        return parse

    def draft_sparql(self, parse: SemanticParse,
                     question='') -> sp.SparqlQuery:
        """ Ask for a rough query; one repair round-trip on a grammar error.

        Raises:
            DraftError: both replies fail the grammar check
        """
        if not parse.entity_mentions:
            raise ValueError('draft_sparql needs at least one entity mention')
        bindings = {
            'question': question or ' '.join(parse.entity_mentions),
            'entities': '; '.join(f"ENT_{k}: {m}" for k, m
                                  in enumerate(parse.entity_mentions, 1)),
            'relations': '; '.join(f"PROP_{k}: {m}" for k, m
                                   in enumerate(parse.relation_mentions, 1))
                         or 'none',
            }
        reply = self.gateway.ask(TaskClass.SemanticAnalysis, 'draft_sparql',
                                 bindings)
        text = clean_reply(reply, structured=False)
        try:
            sp.check_sparql(text)
        except ee.SparqlSyntaxError as e:
            logger.info("draft rejected (%s), requesting repair", e)
            reply2 = self.gateway.ask(TaskClass.SemanticAnalysis,
                                      'repair_sparql',
                                      {'error': str(e), 'query': text})
            text = clean_reply(reply2, structured=False)
            try:
                sp.check_sparql(text)
            except ee.SparqlSyntaxError as e2:
                raise ee.DraftError([reply, reply2], str(e2))
        refs = bind_references(text, parse)
        return sp.SparqlQuery(text, sp.QueryStatus.Rough, tuple(refs))

    def resolve_ids(self, mention, kind, question=None) -> Resolution:
        """ Look ``mention`` up and pick a candidate.

        The top-ranked candidate is chosen unless a disambiguation call,
        given the question, names another one.

        Raises:
            UnresolvedMentionError: the search returned no candidates
        """
        if not mention or not mention.strip():
            raise ValueError('mention must be non-empty')
        found = self.kb.search(mention, kind)
        if not found:
            raise ee.UnresolvedMentionError(mention, kind)
        candidates = tuple(Candidate(*c) for c in found)
        chosen = candidates[0].id
        if len(candidates) > 1 and question:
            listing = '\n'.join(f"{i}. {c.id} {c.label}: {c.description}"
                                for i, c in enumerate(candidates, 1))
            reply = self.gateway.ask(
                TaskClass.SemanticAnalysis, 'disambiguate',
                {'question': question, 'kind': kind, 'mention': mention,
                 'candidates': listing})
            m = re.search(r'\d+', reply)
            if m and 1 <= int(m.group()) <= len(candidates):
                chosen = candidates[int(m.group()) - 1].id
            else:
                logger.info("disambiguation reply %r ignored for '%s'",
                            reply[:40], mention)
        logger.debug("resolved %s '%s' -> %s", kind, mention, chosen)
        return Resolution(mention, kind, candidates, chosen)

    def refine_sparql(self, rough: sp.SparqlQuery,
                      resolutions) -> sp.SparqlQuery:
        """ Replace every draft id by its resolved id.

        Raises:
            RefinementError: a draft token has no resolution
        """
        if rough.status is sp.QueryStatus.Exact:
            return rough
        by_mention = {(r.kind, r.mention): r for r in resolutions}
        mapping = {}
        refs = []
        leftovers = []
        for ref in rough.referenced:
            res = by_mention.get((ref.kind, ref.mention))
            if res is None:
                leftovers.append(ref.token)
            else:
                mapping[ref.token] = res.chosen
                refs.append(replace(ref, resolved=res.chosen))
        known = {ref.token for ref in rough.referenced}
        leftovers.extend(t for t in sp.find_placeholders(rough.text)
                         if t not in known)
        if leftovers:
            raise ee.RefinementError(leftovers)
        text = sp.substitute_ids(rough.text, mapping)
        sp.check_sparql(text)
        return sp.SparqlQuery(text, sp.QueryStatus.Exact, tuple(refs))

    def decompose_multihop(self, q: MultiEntityQuestion,
                           parse: SemanticParse,
                           first: sp.SparqlQuery) -> List[HopStep]:
        """ Split a k-hop question into k sequential steps.

        Step 1 is ``first``; step k follows the k-th relation mention from
        the entities step k-1 produced.
        """
        if parse.hop_count < 1:
            raise ValueError('decompose_multihop needs hop_count >= 1')
        relations = parse.relation_mentions
        steps = [HopStep(1, relations[0] if relations else None, first)]
        for k in range(2, parse.hop_count + 1):
            mention = relations[k-1] if k-1 < len(relations) else None
            steps.append(HopStep(k, mention))
        logger.debug("'%s' decomposed into %d steps", q.text, len(steps))
        return steps

    def execute_sparql(self, query: sp.SparqlQuery) -> List[EntityRef]:
        if query.status is not sp.QueryStatus.Exact:
            raise ValueError('only Exact queries are executed')
        shape = sp.check_sparql(query.text)
        var = next((v for v in shape.variables
                    if v != '*' and not v.endswith('Label')), 'item')
        rows = self.kb.sparql(query.text)
        entities = {}
        for row in rows:
            if var not in row:
                raise ee.EndpointFormatError(self.kb.sparql_endpoint,
                                             f"binding without ?{var}")
            eid = entity_id_from_uri(row[var])
            if eid in entities:
                continue
            page = None
            for page_var in ('article', 'page'):
                if page_var in row:
                    page = _page_title(row[page_var])
            entities[eid] = EntityRef(eid, row.get(var + 'Label', ''), page)
        logger.info("query returned %d entities", len(entities))
        return list(entities.values())

    def fetch_page_intro(self, e: EntityRef) -> str:
        """ Plain-text introduction of the page of ``e``.

        Raises:
            MissingPageError: ``e`` has no page
        """
        title = e.page or self.kb.sitelink(e.id)
        if not title:
            raise ee.MissingPageError(e.id)
        try:
            text = self.kb.page_intro(title)
        except ee.MissingPageError:
            raise ee.MissingPageError(e.id)
        return sp.strip_markup(text)

    def _intro_or_reason(self, e):
        try:
            return self.fetch_page_intro(e), None
        except ee.MissingPageError as err:
            return None, str(err)

    def _follow(self, entities, relation_id, mention):
        """ Entities one hop along ``relation_id`` from ``entities``. """
        found = {}
        queries = []
        ref = sp.IdReference(relation_id, mention or relation_id, 'property',
                             relation_id)
        for text in sp.hop_queries([e.id for e in entities], relation_id):
            query = sp.SparqlQuery(text, sp.QueryStatus.Exact, (ref,))
            queries.append(query)
            for e in self.execute_sparql(query):
                found.setdefault(e.id, e)
        return list(found.values()), queries

    def retrieve(self, q: MultiEntityQuestion) -> RetrievalResult:
        """ Run every stage for ``q``.

        Raises:
            StageError: tagged with the failing stage
        """
        parse = run_stage('analyze_question', self.analyze_question, q)
        first_parse = parse
        if parse.hop_count > 1:
            first_parse = replace(parse,
                                  relation_mentions=parse.relation_mentions[:1],
                                  hop_count=1)
        rough = run_stage('draft_sparql', self.draft_sparql, first_parse,
                          q.text)
        resolutions = {}
        for ref in rough.referenced:
            key = (ref.kind, ref.mention)
            if key not in resolutions:
                resolutions[key] = run_stage('resolve_ids', self.resolve_ids,
                                             ref.mention, ref.kind, q.text)
        exact = run_stage('refine_sparql', self.refine_sparql, rough,
                          resolutions.values())
        entities = run_stage('execute_sparql', self.execute_sparql, exact)
        provenance = [exact]
        if not entities:
            retried = self._retry_next_property(rough, resolutions)
            if retried is not None:
                exact, entities = retried
                provenance.append(exact)

        if parse.hop_count > 1:
            steps = self.decompose_multihop(q, parse, exact)
            for step in steps[1:]:
                if not entities:
                    break
                if step.relation_mention is None:
                    raise ee.StageError('decompose_multihop',
                                        ee.RefinementError([f"hop {step.index}"]))
                res = run_stage('resolve_ids', self.resolve_ids,
                                step.relation_mention, 'property', q.text)
                found, queries = run_stage('execute_sparql', self._follow,
                                           entities, res.chosen,
                                           step.relation_mention)
                provenance.extend(queries)
                alt = None if found else res.next_candidate()
                if alt is not None:
                    logger.info("no results with %s for '%s', retrying "
                                "with %s", res.chosen, res.mention,
                                alt.chosen)
                    found, queries = run_stage('execute_sparql',
                                               self._follow, entities,
                                               alt.chosen,
                                               step.relation_mention)
                    provenance.extend(queries)
                entities = found

        q.entities = list(entities)
        return self._collect(entities, provenance)

    def retrieve_query(self, text) -> RetrievalResult:
        """ Run a ready SPARQL query and fetch its entities' pages. """
        query = sp.SparqlQuery(text, sp.QueryStatus.Exact)
        entities = run_stage('execute_sparql', self.execute_sparql, query)
        return self._collect(entities, [query])

    def _collect(self, entities, provenance):
        results = run_stage('fetch_page_intro', list,
                            self.pool.map(self._intro_or_reason, entities))
        intros = {}
        missing = {}
        for e, (text, reason) in zip(entities, results):
            if text is None:
                missing[e.id] = reason
            else:
                intros[e.id] = text
        if missing:
            logger.warning("%d of %d entities have no page", len(missing),
                           len(entities))
        return RetrievalResult(list(entities), intros, provenance, missing)

    def _retry_next_property(self, rough, resolutions):
        """ Re-run with the next-ranked candidate of the first property
        that has one; returns (query, entities) or None. """
        for key, res in resolutions.items():
            if res.kind != 'property':
                continue
            alt = res.next_candidate()
            if alt is None:
                continue
            logger.info("no results with %s for '%s', retrying with %s",
                        res.chosen, res.mention, alt.chosen)
            trial = dict(resolutions)
            trial[key] = alt
            exact = run_stage('refine_sparql', self.refine_sparql, rough,
                              trial.values())
            entities = run_stage('execute_sparql', self.execute_sparql,
                                 exact)
            resolutions[key] = alt
            return exact, entities
        return None


def bind_references(text, parse: SemanticParse) -> List[sp.IdReference]:
    """ Bind the id tokens of a draft to the parse's mentions.

    Placeholders bind by their index: ENT_k to the k-th entity mention,
    PROP_k to the k-th relation mention. When a draft uses no placeholder
    of a kind, its concrete ids of that kind bind by order of appearance,
    and only when there are exactly as many ids as mentions. Otherwise
    every id of that kind, structural ones like ``wdt:P31`` included, is
    kept as written.
    """
    found = sp.find_ids(text)
    refs = []
    for kind, mentions in (('entity', parse.entity_mentions),
                           ('property', parse.relation_mentions)):
        tokens = [tok for tok, k in found if k == kind]
        placeholders = [t for t in tokens if t.startswith(('ENT_', 'PROP_'))]
        if placeholders:
            for tok in placeholders:
                idx = int(tok.split('_')[1]) - 1
                if 0 <= idx < len(mentions):
                    refs.append(sp.IdReference(tok, mentions[idx], kind))
        elif len(tokens) == len(mentions):
            for tok, mention in zip(tokens, mentions):
                refs.append(sp.IdReference(tok, mention, kind))
        elif tokens and mentions:
            logger.info("%d %s ids for %d mentions, kept as written: %s",
                        len(tokens), kind, len(mentions), tokens)
    return refs
