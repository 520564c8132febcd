#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Seeded fixture tables and graphs for benchmark topics

A topic with a ``fixture`` seed gets a gold table of exactly
``expected_count`` uniquely named entities, with values drawn from
the seed by column kind, and a relationship graph over those entities.
Both are reproduced identically from the seed, so a benchmark can be
generated and replayed without the knowledge base.

.. codeauthor: entitytables developers
"""
import datetime
import logging

import numpy as np

from . import entityerror as ee
from .tablegen import NAME_COLUMN, PropertyTable
from .values import ColumnKind, format_value
from .wikigraph import Edge, EntityRef, RelationRef, WikiGraph

logger = logging.getLogger(__name__)

MISSING_RATE = 0.04
TEXT_CHOICES = 9
FIRST_DATE = datetime.date(1800, 1, 1)

# relations of a fixture graph
FOLLOWS = RelationRef('P155', 'follows')
RELATED = RelationRef('P1659', 'see also')


def fixture_id(seed, index):
    """ Entity id of row ``index`` of the fixture with ``seed``. """
    return f"Q{seed}{index + 1:05d}"


def fixture_value(rng, column, position):
    """ One raw cell value for ``column``, the ``position``-th property. """
    kind = column.kind
    if kind is ColumnKind.integer:
        return int(rng.integers(1, 10 ** (2 + position % 3)))
    if kind is ColumnKind.decimal:
        scale = 10.0 * (position + 1)
        return round(float(rng.normal(5 * scale, scale)), 2)
    if kind is ColumnKind.date:
        days = int(rng.integers(0, 80000))
        return (FIRST_DATE + datetime.timedelta(days=days)).isoformat()
    label = ' '.join(column.name.replace('_', ' ').split())
    return f"{label} {int(rng.integers(1, TEXT_CHOICES + 1))}"


def fixture_table(cfg, seed) -> PropertyTable:
    """ The fixture gold table of topic ``cfg``.

    Row ``i`` is named ``"<entity> <i+1>"``; about one cell in
    twenty-five is left missing.

    Raises:
        ConfigError: the topic has no ``expected_count``
    """
    if not cfg.expected_count:
        raise ee.ConfigError(f"topic '{cfg.name}' needs expected_count "
                             f"for a fixture table")
    rng = np.random.default_rng(seed)
    records = []
    for i in range(cfg.expected_count):
        values = {NAME_COLUMN: f"{cfg.entity} {i + 1}"}
        for k, c in enumerate(cfg.properties):
            if rng.random() < MISSING_RATE:
                continue
            values[c.name] = fixture_value(rng, c, k)
        records.append((fixture_id(seed, i), values))
    table = PropertyTable.from_records(cfg.schema(), records)
    logger.debug("fixture %s: %d rows from seed %d", cfg.name, len(table),
                 seed)
    return table


def fixture_graph(table, seed) -> WikiGraph:
    """ A graph over the entities of ``table``.

    Every entity follows the previous one in a ring, and about half as
    many random ``see also`` links as entities are added.
    """
    rng = np.random.default_rng(seed)
    graph = WikiGraph()
    graph.add_relation(FOLLOWS).add_relation(RELATED)
    ids = list(table.entity_ids)
    for eid, name in zip(ids, table.column(NAME_COLUMN)):
        graph.add_entity(EntityRef(eid, format_value(name)))
    n = len(ids)
    if n < 2:
        return graph
    for i in range(n):
        graph.add_edge(Edge(ids[(i + 1) % n], ids[i], FOLLOWS.id))
    for a, b in rng.integers(n, size=(n // 2, 2)):
        if a != b:
            graph.add_edge(Edge(ids[int(a)], ids[int(b)], RELATED.id))
    return graph
