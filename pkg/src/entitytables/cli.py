#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" The ``entitytables`` command line

Exit codes: 0 success, 1 usage or configuration error, 2 stage failure,
3 fixture, tape or cache integrity problem.

.. codeauthor: entitytables developers
"""
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import entityerror as ee
from .bench import (build_gold_table, generate_bench, load_question_templates,
                    load_topics, read_bench, topic_graph, type_counts,
                    write_bench, TRAIN_FRACTION)
from .config import load_config
from .kbclient import ResponseCache
from .llmgateway import Tape
from .pipeline import Pipeline, run_system, systems
from .scoring import evaluate
from .sqlengine import execute_sql
from .sqlsubset import parse_sql
from .tablegen import PropertyTable
from .util import atomic_write_text
from .wikigraph import MultiEntityQuestion, QueryType

logger = logging.getLogger(__name__)

_levels = {0: logging.WARNING, 1: logging.INFO}


class EntityTablesGroup(click.Group):
    """ Maps errors to exit codes instead of tracebacks. """

    def main(self, args=None, prog_name=None, complete_var=None,
             standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var,
                              standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) else ee.EXIT_OK
        except click.ClickException as e:
            e.show()
            code = ee.EXIT_USAGE
        except click.Abort:
            click.echo('Aborted!', err=True)
            code = ee.EXIT_USAGE
        except ee.EntityTablesError as e:
            click.echo(f"error: {e}", err=True)
            code = e.exit_code
        if standalone_mode:
            sys.exit(code)
        return code


class Settings():
    """ Global options, turned into a RunConfig on first use. """

    def __init__(self, config_path, overrides):
        self.config_path = config_path
        self.overrides = overrides
        self._config = None

    @property
    def config(self):
        if self._config is None:
            self._config = load_config(self.config_path,
                                       overrides=self.overrides)
        return self._config

    def pipeline(self):
        return Pipeline(self.config)


pass_settings = click.make_pass_decorator(Settings)


@click.group(cls=EntityTablesGroup)
@click.option('-v', '--verbose', count=True,
              help='INFO with -v, DEBUG with -vv.')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False),
              default=None, help='YAML run configuration.')
@click.option('--offline', is_flag=True, default=None,
              help='Serve knowledge-base requests from the cache only.')
@click.option('--cache-root', type=click.Path(file_okay=False),
              default=None, help='Response cache directory.')
@click.option('--tape', type=click.Path(dir_okay=False), default=None,
              help='Language-model tape; replayed unless --record.')
@click.option('--record', is_flag=True, default=False,
              help='Record language-model replies onto --tape.')
@click.option('--lenient', is_flag=True, default=False,
              help='Send tape misses to the live model.')
@click.option('--seed', type=click.INT, default=None)
@click.option('--workers', type=click.IntRange(min=1), default=None)
@click.pass_context
def cli(ctx, verbose, config_path, offline, cache_root, tape, record,
        lenient, seed, workers):
    """ Question answering over tables built from knowledge-base entities. """
    logging.basicConfig(
        level=_levels.get(verbose, logging.DEBUG),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    ctx.obj = Settings(config_path, {
        'offline': offline, 'cache_root': cache_root, 'tape': tape,
        'tape_mode': 'record' if record else None,
        'strict_replay': False if lenient else None,
        'seed': seed, 'workers': workers})


def _question(text, qtype):
    return MultiEntityQuestion(text, QueryType.parse(qtype) if qtype
                               else None)


_qtypes = click.Choice([qt.value for qt in QueryType])


@cli.command()
@click.argument('question')
@click.option('--type', 'qtype', type=_qtypes, default=None,
              help='Question type; detected when omitted.')
@click.option('--emit-table', type=click.Path(dir_okay=False), default=None,
              help='Write the generated table as CSV.')
@click.option('--emit-sql', type=click.Path(dir_okay=False), default=None,
              help='Write the executed SQL.')
@pass_settings
def ask(settings, question, qtype, emit_table, emit_sql):
    """ Answer QUESTION end to end. """
    q = _question(question, qtype)
    with settings.pipeline() as pipeline:
        answer, table, _ = pipeline.ask(q)
    if emit_table:
        table.save(emit_table)
    if emit_sql:
        if 'sql' in answer.meta:
            atomic_write_text(emit_sql, answer.meta['sql'] + '\n')
        else:
            logger.warning("no SQL for a %s answer", answer.kind.value)
    click.echo(json.dumps(answer.to_dict(), ensure_ascii=False,
                          sort_keys=True))


@cli.group()
def stage():
    """ Run one pipeline stage. """


@stage.command('retrieve')
@click.argument('question')
@pass_settings
def stage_retrieve(settings, question):
    """ Print the entities retrieved for QUESTION. """
    with settings.pipeline() as pipeline:
        r = pipeline.retrieve(_question(question, None))
    for q in r.provenance:
        click.echo(q.text)
    for e in r.entities:
        state = 'page' if e.id in r.intros else 'no page'
        click.echo(f"{e.id}\t{e.label}\t{state}")


@stage.command('schema')
@click.argument('question')
@click.option('--type', 'qtype', type=_qtypes, default=None)
@pass_settings
def stage_schema(settings, question, qtype):
    """ Print the critiqued table schema for QUESTION. """
    q = _question(question, qtype)
    with settings.pipeline() as pipeline:
        if q.qtype is None:
            pipeline.retriever.analyze_question(q)
        builder = pipeline.builder
        schema = builder.critique_schema(q, builder.generate_schema(q))
    click.echo(json.dumps(schema.to_dict(), ensure_ascii=False, indent=1))


@stage.command('sql')
@click.argument('table_file', type=click.Path(exists=True, dir_okay=False))
@click.argument('sql')
@click.option('--json', 'as_json', is_flag=True, default=False)
def stage_sql(table_file, sql, as_json):
    """ Run SQL on a saved TABLE_FILE. """
    result = execute_sql(parse_sql(sql), PropertyTable.load(table_file))
    click.echo(result.to_json() if as_json else result.to_csv(), nl=as_json)


@cli.command('gen-bench')
@click.option('--topics', 'topics_path', type=click.Path(dir_okay=False),
              default=None, help='Topics document; the packaged one if '
              'omitted.')
@click.option('--templates', 'templates_path',
              type=click.Path(dir_okay=False), default=None)
@click.option('--count', type=click.IntRange(min=1), required=True)
@click.option('--train-fraction', type=click.FloatRange(0, 1, min_open=True,
                                                        max_open=True),
              default=TRAIN_FRACTION, show_default=True)
@click.option('--refine', is_flag=True, default=False,
              help='Reword questions with the language model.')
@click.option('--live', is_flag=True, default=False,
              help='Build gold tables from the knowledge base even for '
              'topics with a fixture seed.')
@click.option('--out', type=click.Path(dir_okay=False), required=True)
@pass_settings
def gen_bench(settings, topics_path, templates_path, count, train_fraction,
              refine, live, out):
    """ Generate a benchmark file. """
    topics = load_topics(topics_path)
    if live:
        topics = [replace(t, fixture=None) for t in topics]
    templates = load_question_templates(templates_path)
    with settings.pipeline() as pipeline:
        tables = {t.name: build_gold_table(t, pipeline.gold_table)
                  for t in topics}
        graphs = {t.name: topic_graph(t, tables[t.name]) for t in topics}
        items = generate_bench(topics, templates, tables, count,
                               settings.config.seed, graphs,
                               pipeline.gateway if refine else None,
                               train_fraction)
    write_bench(items, out)
    for qtype, n in type_counts(items).items():
        click.echo(f"{qtype}\t{n}")
    click.echo(f"total\t{len(items)}")


@cli.command('eval')
@click.argument('bench_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--system', type=click.Choice(systems), default='pipeline',
              show_default=True)
@click.option('--split', type=click.Choice(['test', 'train', 'all']),
              default='test', show_default=True)
@click.option('--topics', 'topics_path', type=click.Path(dir_okay=False),
              default=None, help='Topics document, for sql-only.')
@click.option('--out', type=click.Path(file_okay=False), required=True,
              help='Directory for report.json and report.txt.')
@pass_settings
def eval_cmd(settings, bench_file, system, split, topics_path, out):
    """ Score a system on BENCH_FILE. """
    items = [it for it in read_bench(bench_file)
             if split == 'all' or it.split == split]
    with settings.pipeline() as pipeline:
        tables = None
        if system == 'sql-only':
            wanted = {it.topic for it in items}
            tables = {t.name: build_gold_table(t, pipeline.gold_table)
                      for t in load_topics(topics_path) if t.name in wanted}
        run, failures = run_system(system, items, pipeline, tables)
        report = evaluate(run, system, pipeline.synonyms, failures)
    out = Path(out)
    atomic_write_text(out/'report.json', report.to_json() + '\n')
    atomic_write_text(out/'report.txt', report.to_text())
    click.echo(report.to_text(), nl=False)


@cli.group()
def cache():
    """ Inspect or clear the response cache. """


def _cache(settings):
    root = settings.config.cache_root
    if root is None:
        raise ee.ConfigError('no cache root configured')
    return ResponseCache(root)


@cache.command('stats')
@pass_settings
def cache_stats(settings):
    stats = _cache(settings).stats()
    click.echo(f"entries\t{stats['entries']}")
    click.echo(f"bytes\t{stats['bytes']}")


@cache.command('clear')
@pass_settings
def cache_clear(settings):
    click.echo(f"removed\t{_cache(settings).clear()}")


@cache.command('verify')
@pass_settings
def cache_verify(settings):
    """ Re-hash every entry; exits 3 listing corrupt keys. """
    store = _cache(settings)
    corrupt = store.verify()
    if corrupt:
        for key in corrupt:
            click.echo(f"corrupt\t{key}")
        raise ee.CacheCorruptError(corrupt)
    click.echo(f"ok\t{len(store.entries())}")


@cli.group()
def tape():
    """ Inspect a language-model tape. """


@tape.command('stats')
@click.argument('path', type=click.Path(dir_okay=False), required=False)
@pass_settings
def tape_stats(settings, path):
    path = path or settings.config.tape
    if path is None:
        raise ee.ConfigError('no tape given')
    stats = Tape(path).stats()
    click.echo(f"entries\t{stats['entries']}")
    for task, n in sorted(stats['tasks'].items()):
        click.echo(f"{task}\t{n}")


def run():
    """ Entry point of the ``entitytables`` console script. """
    cli(prog_name='entitytables')


if __name__ == '__main__':
    run()
