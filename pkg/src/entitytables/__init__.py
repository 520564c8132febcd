""" package answering multi-entity questions over generated property tables

    The :mod:`entitytables` package answers questions that need many
    entities at once: comparisons across a set, statistics over a property
    and relationships between entities. An answer is produced in three
    stages:

        - :mod:`~.retrieval` turns the question into SPARQL, resolves the
          entity mentions against the knowledge base and fetches each
          entity's page introduction
        - :mod:`~.tablegen` designs a property schema with the language
          model, extracts one row per entity and normalizes the values into
          a :class:`~.tablegen.PropertyTable`
        - :mod:`~.executor` writes SQL over the table (or selects a
          statistical method) and interprets the result as an answer

    Knowledge-base requests go through :mod:`~.kbclient`, which keeps a
    content-addressed response cache; language-model calls go through
    :mod:`~.llmgateway`, which can record them to a tape and replay them.
    The SQL subset is parsed by :mod:`~.sqlsubset` and run in memory by
    :mod:`~.sqlengine`.

    :mod:`~.bench` generates a labelled benchmark from topic tables and
    question templates and :mod:`~.scoring` reduces a run to accuracies
    per question type. The ``entitytables`` command in :mod:`~.cli` drives
    all of it.
"""
from importlib.metadata import version

try:
    __version__ = version(__name__)
except:
    __version__ = 'unknown'
finally:
    del version
