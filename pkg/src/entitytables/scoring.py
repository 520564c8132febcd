#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Score answers against gold answers and reduce a run to accuracies

.. codeauthor: entitytables developers
"""
import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import pandas as pd

from . import entityerror as ee
from .executor import AnswerKind, normalize_column
from .values import MISSING, SynonymDictionary, format_value
from .wikigraph import Category, QueryType

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9

_numeric_text = re.compile(r'\s*[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\s*$')


def _canonical_number(v):
    if isinstance(v, bool):
        return None
    if isinstance(v, (int, float)):
        return v
    if isinstance(v, str) and _numeric_text.match(v):
        text = v.strip()
        return int(text) if re.fullmatch(r'[+-]?\d+', text) else float(text)
    return None


def _same_scalar(a, b, synonyms):
    if a is MISSING or b is MISSING or a is None or b is None:
        return (a is MISSING or a is None) and (b is MISSING or b is None)
    na, nb = _canonical_number(a), _canonical_number(b)
    if na is not None and nb is not None:
        if isinstance(na, int) and isinstance(nb, int):
            return na == nb
        return math.isclose(na, nb, rel_tol=TOLERANCE, abs_tol=TOLERANCE)
    return synonyms.label_key(format_value(a)) == \
        synonyms.label_key(format_value(b))


def score(prediction, gold, synonyms=None) -> bool:
    """ True when ``prediction`` answers like ``gold``.

    Scalars compare as numbers when both are numeric (integers exactly,
    decimals within 1e-9), else as normalized labels. An entity list is
    correct when it shares a normalized label with the gold list (which
    holds every tied entity). Method selections need the same method and
    the same set of columns. Answers of different kinds are wrong.
    """
    if prediction is None or gold is None:
        return False
    if prediction.kind is not gold.kind:
        return False
    synonyms = synonyms if synonyms is not None else _default_synonyms()
    kind = gold.kind
    if kind is AnswerKind.Scalar:
        return _same_scalar(prediction.payload, gold.payload, synonyms)
    if kind is AnswerKind.EntityList:
        pred = {synonyms.label_key(p) for p in prediction.payload}
        return bool(pred & {synonyms.label_key(g) for g in gold.payload})
    if kind is AnswerKind.Boolean:
        return prediction.payload == gold.payload
    p, g = prediction.payload, gold.payload
    return (p.method is g.method and
            {normalize_column(c) for c in p.columns}
            == {normalize_column(c) for c in g.columns})


_synonyms = None


def _default_synonyms():
    global _synonyms
    if _synonyms is None:
        _synonyms = SynonymDictionary()
    return _synonyms


@dataclass
class EvalReport:
    """ Accuracy per question type, per category and overall.

    Counts are (correct, total) pairs; a type or category with no items
    has accuracy None.
    """
    per_type: Dict[str, Tuple[int, int]]
    per_category: Dict[str, Tuple[int, int]]
    correct: int
    total: int
    system: str = ''
    failures: Dict[str, str] = field(default_factory=dict)

    @staticmethod
    def accuracy(counts) -> Optional[float]:
        correct, total = counts
        return correct / total if total else None

    @property
    def overall(self):
        return self.correct / self.total

    def to_dict(self):
        def block(counts):
            return {'accuracy': self.accuracy(counts), 'correct': counts[0],
                    'total': counts[1]}
        return {'system': self.system,
                'overall': block((self.correct, self.total)),
                'categories': {k: block(v)
                               for k, v in self.per_category.items()},
                'types': {k: block(v) for k, v in self.per_type.items()},
                'failures': self.failures}

    def to_json(self):
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=1)

    def to_text(self):
        """ A category table in the order Comparison, Statistics,
        Relationship, Overall, then a per-type table; 3 decimals. """
        def fmt(counts):
            acc = self.accuracy(counts)
            return '-' if acc is None else f"{acc:.3f}"
        summary = pd.DataFrame(
            [[self.system or 'system']
             + [fmt(self.per_category[c.value]) for c in Category]
             + [fmt((self.correct, self.total))]],
            columns=['System'] + [c.value for c in Category] + ['Overall'])
        types = pd.DataFrame(
            [[k, v[0], v[1], fmt(v)] for k, v in self.per_type.items()],
            columns=['Type', 'Correct', 'Total', 'Accuracy'])
        return (summary.to_string(index=False) + '\n\n'
                + types.to_string(index=False) + '\n')


def evaluate(run, system='', synonyms=None, failures=None) -> EvalReport:
    """ Score ``run``, a list of (BenchItem, Answer or None) pairs.

    A None answer (the system failed on the item) is scored incorrect;
    ``failures`` maps item ids to the reasons, for the report.

    Raises:
        ReportError: an empty run or an item scored twice
    """
    run = list(run)
    if not run:
        raise ee.ReportError('nothing scored')
    seen = set()
    records = []
    failures = dict(failures or {})
    for item, answer in run:
        if item.id in seen:
            raise ee.ReportError(f"item '{item.id}' scored twice")
        seen.add(item.id)
        records.append({'qtype': item.qtype.value,
                        'category': item.qtype.category.value,
                        'correct': int(score(answer, item.gold, synonyms))})
    frame = pd.DataFrame(records)

    def counts(column, keys):
        grouped = frame.groupby(column)['correct'].agg(['sum', 'count'])
        return {k: (int(grouped.loc[k, 'sum']), int(grouped.loc[k, 'count']))
                if k in grouped.index else (0, 0) for k in keys}

    report = EvalReport(counts('qtype', [qt.value for qt in QueryType]),
                        counts('category', [c.value for c in Category]),
                        int(frame['correct'].sum()), len(frame), system,
                        failures)
    logger.info("%s: overall %.3f on %d items", system or 'run',
                report.overall, report.total)
    return report
