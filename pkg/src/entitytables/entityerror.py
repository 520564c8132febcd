#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Support for entitytables exception handling

    Every exception carries the values that caused it as attributes and an
    ``exit_code`` used by the command line: 1 for usage errors, 2 for stage
    failures, 3 for fixture, tape and cache integrity problems.

.. codeauthor: entitytables developers
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STAGE = 2
EXIT_INTEGRITY = 3


class EntityTablesError(Exception):
    """ Base exception for the entitytables package """
    exit_code = EXIT_STAGE


# --- configuration
class ConfigError(EntityTablesError):
    """ Exception raised for an invalid run configuration """
    exit_code = EXIT_USAGE

    def __init__(self, message):
        super().__init__(message)
        self.message = message


# --- graph model
class GraphError(EntityTablesError):
    """ Exception raised when manipulating a WikiGraph """


class GraphConflictError(GraphError):
    """ Exception raised when an entity id is re-added with another label """

    def __init__(self, entity_id, label, new_label):
        super().__init__(f"entity {entity_id} is labelled '{label}', "
                         f"not '{new_label}'")
        self.entity_id = entity_id
        self.label = label
        self.new_label = new_label


class MissingEntityError(GraphError):
    """ Exception raised when an edge or property owner is not in the graph """

    def __init__(self, entity_id):
        super().__init__(f"entity {entity_id} not in graph")
        self.entity_id = entity_id


class GraphFileError(GraphError):
    """ Exception raised for a malformed graph dump line """
    exit_code = EXIT_INTEGRITY

    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


# --- language model gateway
class GatewayError(EntityTablesError):
    """ Exception raised by the language model gateway """


class TemplateError(GatewayError):
    """ Exception raised for an unknown template or an unbound placeholder """

    def __init__(self, template_id, placeholder=None):
        if placeholder is None:
            msg = f"unknown prompt template '{template_id}'"
        else:
            msg = f"template '{template_id}': unbound placeholder '{placeholder}'"
        super().__init__(msg)
        self.template_id = template_id
        self.placeholder = placeholder


class TransportError(EntityTablesError):
    """ Exception raised when an HTTP exchange fails after all retries """

    def __init__(self, url, reason, attempts=1):
        super().__init__(f"{url}: {reason} (after {attempts} attempts)")
        self.url = url
        self.reason = reason
        self.attempts = attempts


class TapeMissError(GatewayError):
    """ Exception raised when a strict replay tape has no entry for a request """
    exit_code = EXIT_INTEGRITY

    def __init__(self, key, task):
        super().__init__(f"no tape entry {key[:12]} for task {task}")
        self.key = key
        self.task = task


class TapeParseError(GatewayError):
    """ Exception raised for a corrupt replay tape line """
    exit_code = EXIT_INTEGRITY

    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class LlmOutputError(GatewayError):
    """ Exception raised when a machine-parsed reply cannot be parsed """

    def __init__(self, raw, reason):
        super().__init__(f"{reason}: {raw[:80]!r}")
        self.raw = raw
        self.reason = reason


# --- response cache
class CacheError(EntityTablesError):
    """ Exception raised by the on-disk response cache """
    exit_code = EXIT_INTEGRITY


class CacheMissError(CacheError):
    """ Exception raised for a cache miss while offline """

    def __init__(self, endpoint, key):
        super().__init__(f"cache miss for {endpoint} ({key[:12]})")
        self.endpoint = endpoint
        self.key = key


class CacheCorruptError(CacheError):
    """ Exception raised when cache entries fail verification """

    def __init__(self, keys):
        super().__init__(f"{len(keys)} corrupt cache entries")
        self.keys = keys


# --- retrieval
class RetrievalError(EntityTablesError):
    """ Exception raised by the retrieval stages """


class SemanticParseError(RetrievalError):
    """ Exception raised when the semantic analysis reply is unusable """

    def __init__(self, raw, reason):
        super().__init__(f"semantic parse failed, {reason}")
        self.raw = raw
        self.reason = reason


class SparqlSyntaxError(RetrievalError):
    """ Exception raised by the local SPARQL grammar checker """

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.message = message
        self.position = position


class DraftError(RetrievalError):
    """ Exception raised when no grammatical SPARQL draft is produced """

    def __init__(self, replies, reason):
        super().__init__(f"SPARQL draft rejected: {reason}")
        self.replies = replies
        self.reason = reason


class UnresolvedMentionError(RetrievalError):
    """ Exception raised when a mention has no knowledge-base candidates """

    def __init__(self, mention, kind):
        super().__init__(f"no {kind} candidates for '{mention}'")
        self.mention = mention
        self.kind = kind


class RefinementError(RetrievalError):
    """ Exception raised when id tokens remain unresolved """

    def __init__(self, tokens):
        super().__init__(f"unresolved tokens: {', '.join(tokens)}")
        self.tokens = tokens


class EndpointFormatError(RetrievalError):
    """ Exception raised for a malformed endpoint reply """

    def __init__(self, endpoint, reason):
        super().__init__(f"{endpoint}: {reason}")
        self.endpoint = endpoint
        self.reason = reason


class MissingPageError(RetrievalError):
    """ Exception raised when an entity has no encyclopedia page """

    def __init__(self, entity_id):
        super().__init__(f"no page for entity {entity_id}")
        self.entity_id = entity_id


# --- table generation
class TableError(EntityTablesError):
    """ Exception raised by table generation """


class SchemaParseError(TableError):
    """ Exception raised when a schema reply is unusable """

    def __init__(self, raw, reason):
        super().__init__(f"schema parse failed, {reason}")
        self.raw = raw
        self.reason = reason


class EmptyTableError(TableError):
    """ Exception raised when a table would have no rows """

    def __init__(self, question):
        super().__init__(f"no entities retrieved for '{question}'")
        self.question = question


class TableFileError(TableError):
    """ Exception raised when a saved table or its sidecar is malformed """
    exit_code = EXIT_INTEGRITY

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


# --- sql
class SqlError(EntityTablesError):
    """ Exception raised by the SQL subset parser and engine """


class SqlSyntaxError(SqlError):
    """ Exception raised for a syntax error, with the character position """

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.message = message
        self.position = position


class UnsupportedSqlFeature(SqlError):
    """ Exception raised for a construct outside the supported subset """

    def __init__(self, token, position):
        super().__init__(f"unsupported SQL feature '{token}' at position "
                         f"{position}")
        self.token = token
        self.position = position


class SqlSemanticError(SqlError):
    """ Exception raised when a query does not fit the target schema """

    def __init__(self, message):
        super().__init__(message)
        self.message = message


class SqlEvaluationError(SqlError):
    """ Exception raised when evaluation hits a type mismatch """

    def __init__(self, message):
        super().__init__(message)
        self.message = message


class SqlGenerationError(SqlError):
    """ Exception raised when generated SQL fails after the repair attempt """

    def __init__(self, replies, reason):
        super().__init__(f"SQL generation failed: {reason}")
        self.replies = replies
        self.reason = reason


# --- statistics and method selection
class StatsError(EntityTablesError):
    """ Exception raised by the numeric oracles """


class DegenerateInputError(StatsError):
    """ Exception raised for zero-variance input """

    def __init__(self, test_name):
        super().__init__(f"{test_name}: zero variance input")
        self.test_name = test_name


class PreconditionError(StatsError):
    """ Exception raised for too-short or mismatched input """

    def __init__(self, test_name, reason):
        super().__init__(f"{test_name}: {reason}")
        self.test_name = test_name
        self.reason = reason


class SelectionError(EntityTablesError):
    """ Exception raised when no column matches a statistics question """

    def __init__(self, question, needed):
        super().__init__(f"could not select {needed} column(s) for "
                         f"'{question}'")
        self.question = question
        self.needed = needed


# --- benchmark
class BenchError(EntityTablesError):
    """ Exception raised by the benchmark harness """


class FixtureDriftError(BenchError):
    """ Exception raised when a gold table's size differs from its topic """
    exit_code = EXIT_INTEGRITY

    def __init__(self, topic, expected, found):
        super().__init__(f"topic '{topic}': expected {expected} entities, "
                         f"found {found}")
        self.topic = topic
        self.expected = expected
        self.found = found


class GenerationBugError(BenchError):
    """ Exception raised when a gold query yields no answer """

    def __init__(self, item_id, sql):
        super().__init__(f"item {item_id}: gold SQL returned nothing: {sql}")
        self.item_id = item_id
        self.sql = sql


class BenchFileError(BenchError):
    """ Exception raised for a malformed benchmark or topic file """
    exit_code = EXIT_INTEGRITY

    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class ReportError(BenchError):
    """ Exception raised when a run cannot be reduced to a report """

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


# --- orchestration
class StageError(EntityTablesError):
    """ Exception wrapping the first fatal error of a pipeline run

    Attributes:
        stage: the name of the operation that failed, e.g. 'resolve_ids'
        cause: the underlying exception
    """

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        # integrity problems keep their exit code through the wrapper
        if getattr(cause, 'exit_code', EXIT_STAGE) == EXIT_INTEGRITY:
            self.exit_code = EXIT_INTEGRITY
        else:
            self.exit_code = EXIT_STAGE
