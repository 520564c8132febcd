#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Domain types for the encyclopedia graph and multi-entity questions

The graph holds entities (nodes), typed edges between them and string-valued
properties attached to either. A hop is one traversal of a typed edge;
:func:`neighbors` follows a chain of them.

A question carries its query type, the entities it is about and the
properties it needs. The query type determines the question category used
in accuracy reports.

.. codeauthor: entitytables developers
"""
import json
import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Union

from . import entityerror as ee

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class EntityRef:
    """ A knowledge-base entity: opaque id (e.g. 'Q76') and its label. """
    id: str
    label: str = ''
    page: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.id:
            raise ValueError('EntityRef id must be non-empty')


@dataclass(frozen=True, order=True)
class RelationRef:
    """ A relation type: opaque property id (e.g. 'P39') and its name. """
    id: str
    label: str = ''

    def __post_init__(self):
        if not self.id:
            raise ValueError('RelationRef id must be non-empty')


@dataclass(frozen=True, order=True)
class Edge:
    """ A directed, typed edge (source, target, relation) between entity ids """
    source: str
    target: str
    relation: str


@dataclass(frozen=True)
class PropertyValue:
    """ A property value as delivered, with its declared semantic kind """
    value: str
    kind: str = 'text'


class Category(Enum):
    Comparison = 'Comparison'
    Statistics = 'Statistics'
    Relationship = 'Relationship'


class QueryType(Enum):
    """ The eight question types; :attr:`category` groups them in three. """
    Intercomparison = 'Intercomparison'
    Superlative = 'Superlative'
    Aggregation = 'Aggregation'
    DistributionCompliance = 'DistributionCompliance'
    CorrelationAnalysis = 'CorrelationAnalysis'
    VarianceAnalysis = 'VarianceAnalysis'
    DescriptiveRelationship = 'DescriptiveRelationship'
    HypotheticalScenarios = 'HypotheticalScenarios'

    @property
    def category(self) -> Category:
        return _categories[self]

    @property
    def is_statistics_method(self) -> bool:
        """ True for the three types answered by method selection """
        return self in (QueryType.DistributionCompliance,
                        QueryType.CorrelationAnalysis,
                        QueryType.VarianceAnalysis)

    @classmethod
    def parse(cls, text: Union[str, 'QueryType']) -> 'QueryType':
        """ Accept 'VarianceAnalysis', 'Variance Analysis' or
        'variance_analysis'. """
        if isinstance(text, cls):
            return text
        key = ''.join(ch for ch in str(text) if ch.isalnum()).casefold()
        for qt in cls:
            if qt.value.casefold() == key:
                return qt
        raise ValueError(f"unknown query type '{text}'")


_categories = {
    QueryType.Intercomparison: Category.Comparison,
    QueryType.Superlative: Category.Comparison,
    QueryType.Aggregation: Category.Statistics,
    QueryType.DistributionCompliance: Category.Statistics,
    QueryType.CorrelationAnalysis: Category.Statistics,
    QueryType.VarianceAnalysis: Category.Statistics,
    QueryType.DescriptiveRelationship: Category.Relationship,
    QueryType.HypotheticalScenarios: Category.Relationship,
    }


@dataclass
class MultiEntityQuestion:
    """ A question Q with its type, entity set and property set.

    ``entities`` and ``properties`` may be empty until semantic analysis has
    run; ``qtype`` must be set before the question is answered.
    """
    text: str
    qtype: Optional[QueryType] = None
    entities: List[EntityRef] = field(default_factory=list)
    properties: List[str] = field(default_factory=list)
    topic: Optional[str] = None
    question_id: Optional[str] = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError('question text must be non-empty')
        if self.qtype is not None:
            self.qtype = QueryType.parse(self.qtype)


Owner = Union[str, Edge]


class WikiGraph():
    """ In-memory store of entities, relations, edges and properties

    Attributes:
        entities: dict of entity id to :class:`EntityRef`
        relations: dict of relation id to :class:`RelationRef`
        edges: set of :class:`Edge`
        properties: dict of owner (entity id or Edge) to a dict of
                    property name to :class:`PropertyValue`

    Reads may run concurrently; mutations take the graph lock.
    """

    def __init__(self):
        self.entities: Dict[str, EntityRef] = {}
        self.relations: Dict[str, RelationRef] = {}
        self.edges: Set[Edge] = set()
        self.properties: Dict[Owner, Dict[str, PropertyValue]] = {}
        self._out: Dict[str, Dict[str, Set[str]]] = {}
        self._lock = threading.RLock()

    def __len__(self):
        return len(self.entities)

    def __contains__(self, entity_id):
        if isinstance(entity_id, EntityRef):
            entity_id = entity_id.id
        return entity_id in self.entities

    def __repr__(self):
        return (f"WikiGraph({len(self.entities)} entities, "
                f"{len(self.edges)} edges)")

    def entity(self, entity_id) -> EntityRef:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise ee.MissingEntityError(entity_id)

    def add_entity(self, e: EntityRef) -> 'WikiGraph':
        """ Add ``e``; re-adding the same id and label is a no-op.

        Raises:
            GraphConflictError: if the id is present with another label
        """
        with self._lock:
            present = self.entities.get(e.id)
            if present is not None:
                if present.label != e.label:
                    raise ee.GraphConflictError(e.id, present.label, e.label)
                return self
            self.entities[e.id] = e
        return self

    def add_relation(self, r: RelationRef) -> 'WikiGraph':
        with self._lock:
            present = self.relations.get(r.id)
            if present is not None and present.label and r.label \
                    and present.label != r.label:
                raise ee.GraphConflictError(r.id, present.label, r.label)
            if present is None or not present.label:
                self.relations[r.id] = r
        return self

    def add_edge(self, edge: Edge) -> 'WikiGraph':
        """ Add ``edge``; duplicate edges collapse.

        Raises:
            MissingEntityError: if either endpoint is not in the graph
        """
        with self._lock:
            for end in (edge.source, edge.target):
                if end not in self.entities:
                    raise ee.MissingEntityError(end)
            if edge.relation not in self.relations:
                self.relations[edge.relation] = RelationRef(edge.relation)
            self.edges.add(edge)
            by_rel = self._out.setdefault(edge.source, {})
            by_rel.setdefault(edge.relation, set()).add(edge.target)
        return self

    def add_property(self, owner: Owner, name: str, value: str,
                     kind: str = 'text') -> 'WikiGraph':
        """ Attach a property to an entity id or an existing edge. """
        with self._lock:
            if isinstance(owner, Edge):
                if owner not in self.edges:
                    raise ee.MissingEntityError(
                        f"{owner.source}-{owner.relation}-{owner.target}")
            elif owner not in self.entities:
                raise ee.MissingEntityError(owner)
            self.properties.setdefault(owner, {})[name] = PropertyValue(
                str(value), kind)
        return self

    def node_properties(self, entity_id) -> Dict[str, PropertyValue]:
        return dict(self.properties.get(entity_id, {}))

    def successors(self, entity_id, relation_id) -> Set[str]:
        return set(self._out.get(entity_id, {}).get(relation_id, ()))

    def edge_between(self, a, b) -> bool:
        """ True if any edge joins ``a`` and ``b``, in either direction. """
        a_out = self._out.get(a, {})
        b_out = self._out.get(b, {})
        return (any(b in tgts for tgts in a_out.values()) or
                any(a in tgts for tgts in b_out.values()))

    def adjacent(self, entity_id) -> Set[str]:
        """ Ids joined to ``entity_id`` by an edge in either direction. """
        adj = set()
        for tgts in self._out.get(entity_id, {}).values():
            adj |= tgts
        for e in self.edges:
            if e.target == entity_id:
                adj.add(e.source)
        adj.discard(entity_id)
        return adj

    def shared_neighbors(self, a, b) -> Set[str]:
        return (self.adjacent(a) & self.adjacent(b)) - {a, b}

    def validate(self) -> List[str]:
        """ Full scan of the graph invariants; returns a list of problems. """
        problems = []
        for e in self.edges:
            for end in (e.source, e.target):
                if end not in self.entities:
                    problems.append(f"edge {e} has dangling endpoint {end}")
        for owner in self.properties:
            if isinstance(owner, Edge):
                if owner not in self.edges:
                    problems.append(f"property owner edge {owner} missing")
            elif owner not in self.entities:
                problems.append(f"property owner {owner} missing")
        return problems

    # --- flat-file persistence
    def dump(self, path):
        """ Write the graph as line-delimited JSON records, sorted. """
        lines = []
        for e in sorted(self.entities.values()):
            lines.append({'record': 'entity', 'id': e.id, 'label': e.label,
                          'page': e.page})
        for r in sorted(self.relations.values()):
            lines.append({'record': 'relation', 'id': r.id,
                          'label': r.label})
        for e in sorted(self.edges):
            lines.append({'record': 'edge', 'source': e.source,
                          'target': e.target, 'relation': e.relation})

        def owner_key(item):
            owner = item[0]
            if isinstance(owner, Edge):
                return (1, owner.source, owner.target, owner.relation)
            return (0, owner, '', '')

        for owner, props in sorted(self.properties.items(), key=owner_key):
            if isinstance(owner, Edge):
                owner_rec = {'source': owner.source, 'target': owner.target,
                             'relation': owner.relation}
            else:
                owner_rec = owner
            for name in sorted(props):
                pv = props[name]
                lines.append({'record': 'property', 'owner': owner_rec,
                              'name': name, 'value': pv.value,
                              'kind': pv.kind})
        text = ''.join(json.dumps(rec, ensure_ascii=False) + '\n'
                       for rec in lines)
        Path(path).write_text(text, encoding='utf-8')

    @classmethod
    def load(cls, path) -> 'WikiGraph':
        """ Read a graph written by :meth:`dump`.

        Raises:
            GraphFileError: for a malformed line, with its line number
        """
        graph = cls()
        deferred = []
        with Path(path).open(encoding='utf-8') as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    kind = rec['record']
                    if kind == 'entity':
                        graph.add_entity(EntityRef(rec['id'], rec['label'],
                                                   rec.get('page')))
                    elif kind == 'relation':
                        graph.add_relation(RelationRef(rec['id'],
                                                       rec['label']))
                    elif kind in ('edge', 'property'):
                        deferred.append((line_no, rec))
                    else:
                        raise ValueError(f"unknown record kind '{kind}'")
                except (ValueError, KeyError, TypeError) as err:
                    raise ee.GraphFileError(path, line_no, str(err))
        # edges before properties so edge-owned properties resolve
        deferred.sort(key=lambda lr: lr[1]['record'] != 'edge')
        for line_no, rec in deferred:
            try:
                if rec['record'] == 'edge':
                    graph.add_edge(Edge(rec['source'], rec['target'],
                                        rec['relation']))
                else:
                    owner = rec['owner']
                    if isinstance(owner, dict):
                        owner = Edge(owner['source'], owner['target'],
                                     owner['relation'])
                    graph.add_property(owner, rec['name'], rec['value'],
                                       rec.get('kind', 'text'))
            except (ee.GraphError, KeyError, TypeError) as err:
                raise ee.GraphFileError(path, line_no, str(err))
        return graph


def _relation_id(relation) -> str:
    return relation.id if isinstance(relation, RelationRef) else relation


def neighbors(graph: WikiGraph, start: Union[EntityRef, str],
              relation: Union[RelationRef, str, Iterable], hops: int
              ) -> Set[EntityRef]:
    """ Entities reachable from ``start`` by exactly ``hops`` typed edges.

    Args:
        graph: the graph to traverse
        start: the starting entity
        relation: one relation used for every hop, or a list with one
                  relation per hop
        hops: number of edges to traverse; 0 returns ``{start}``

    Unknown relation ids yield an empty set.
    """
    if hops < 0:
        raise ValueError('hops must be >= 0')
    start_id = start.id if isinstance(start, EntityRef) else start
    if start_id not in graph.entities:
        raise ee.MissingEntityError(start_id)
    if isinstance(relation, (str, RelationRef)):
        rels = [_relation_id(relation)]*hops
    else:
        rels = [_relation_id(r) for r in relation]
        if len(rels) == 1:
            rels = rels*hops
        elif len(rels) != hops:
            raise ValueError(f"{len(rels)} relations given for {hops} hops")

    frontier = {start_id}
    for rel in rels:
        frontier = {t for s in frontier for t in graph.successors(s, rel)}
        if not frontier:
            break
    return {graph.entities[eid] for eid in frontier}

