#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Wire the stages into a question answering system

:class:`Pipeline` builds every component from a :class:`~.config.RunConfig`
and shares one bounded worker pool between page fetches and extraction
calls. :func:`run_system` answers benchmark items with one of the
evaluation systems:

    - pipeline: retrieval, table generation and the executor
    - sql-only: the executor over the topic's gold table
    - echo: the gold answers
    - blank: no answers

.. codeauthor: entitytables developers
"""
import logging
from concurrent.futures import ThreadPoolExecutor

from . import entityerror as ee
from .executor import Executor
from .kbclient import KnowledgeBaseClient, ResponseCache
from .llmgateway import (Gateway, HttpChatBackend, Tier, record_session,
                         replay_session)
from .retrieval import Retriever, run_stage
from .tablegen import TableBuilder
from .values import SynonymDictionary
from .wikigraph import MultiEntityQuestion

logger = logging.getLogger(__name__)

systems = ('pipeline', 'sql-only', 'echo', 'blank')


def make_backend(config, inner=None, session=None):
    """ The language-model backend for ``config``'s tape mode.

    Args:
        inner: the backend that reaches a model; an HTTP chat client for
               ``config.llm_base_url`` by default
    """
    if inner is None and not (config.tape_mode == 'replay'
                              and config.strict_replay):
        inner = HttpChatBackend(config.llm_base_url, config.api_key(),
                                session)
    if config.tape_mode == 'record':
        return record_session(config.tape, inner)
    if config.tape_mode == 'replay':
        return replay_session(config.tape, strict=config.strict_replay,
                              fallback=inner)
    return inner


class Pipeline():
    """ Every stage, wired from one configuration.

    Use as a context manager, or call :meth:`close`, to stop the pool.
    """

    def __init__(self, config, backend=None, session=None, llm_session=None):
        self.config = config
        self.pool = ThreadPoolExecutor(max_workers=config.workers)
        self.cache = ResponseCache(config.cache_root)
        self.kb = KnowledgeBaseClient(
            config.sparql_endpoint, config.search_endpoint,
            config.page_endpoint, cache=self.cache, offline=config.offline,
            session=session, page_size=config.page_size)
        self.gateway = Gateway(
            make_backend(config, backend, llm_session),
            models={Tier.Capable: config.capable_model,
                    Tier.Fast: config.fast_model})
        self.synonyms = SynonymDictionary(config.synonyms)
        self.retriever = Retriever(self.gateway, self.kb, pool=self.pool)
        self.builder = TableBuilder(self.gateway, self.synonyms,
                                    pool=self.pool)
        self.executor = Executor(self.gateway, config.max_sample_rows)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        self.pool.shutdown(wait=True)

    def retrieve(self, q):
        return self.retriever.retrieve(q)

    def table_for(self, q, r=None):
        r = r if r is not None else self.retrieve(q)
        return run_stage('build_table', self.builder.build_table, q, r)

    def ask(self, q):
        """ Retrieve, build the table and answer ``q``.

        Returns:
            (Answer, PropertyTable, RetrievalResult)

        Raises:
            StageError: tagged with the failing stage
        """
        r = self.retrieve(q)
        table = self.table_for(q, r)
        answer = self.executor.answer(q, table)
        return answer, table, r

    def gold_table(self, cfg):
        """ Build a topic's gold table under the topic's own schema. """
        if cfg.root_query:
            r = self.retriever.retrieve_query(cfg.root_query)
        else:
            r = self.retrieve(MultiEntityQuestion(cfg.question,
                                                  topic=cfg.name))
        return run_stage('build_table', self.builder.fill_table,
                         cfg.schema(), r, False)


def run_system(system, items, pipeline=None, tables=None):
    """ Answer ``items`` with ``system``.

    Args:
        pipeline: a Pipeline, for 'pipeline' and 'sql-only'
        tables: dict of topic name to gold table, for 'sql-only'

    Returns:
        (list of (item, Answer or None), dict of item id to failure)
    """
    if system not in systems:
        raise ee.ConfigError(f"unknown system '{system}'; expected one of "
                             f"{', '.join(systems)}")
    run = []
    failures = {}
    for item in items:
        answer = None
        try:
            if system == 'echo':
                answer = item.gold
            elif system == 'pipeline':
                q = MultiEntityQuestion(item.question, topic=item.topic,
                                        question_id=item.id)
                answer = pipeline.ask(q)[0]
            elif system == 'sql-only':
                table = (tables or {}).get(item.topic)
                if table is None:
                    raise ee.ConfigError(f"no gold table for topic "
                                         f"'{item.topic}'")
                q = MultiEntityQuestion(item.question, item.qtype,
                                        topic=item.topic,
                                        question_id=item.id)
                answer = pipeline.executor.answer(q, table)
        except ee.StageError as e:
            if e.exit_code == ee.EXIT_INTEGRITY:
                raise
            failures[item.id] = str(e)
            logger.warning("%s failed: %s", item.id, e)
        run.append((item, answer))
    return run, failures
