#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Cell values: column kinds, the missing marker, coercion and synonyms

.. codeauthor: entitytables developers
"""
import datetime
import logging
import re
import warnings
from enum import Enum
from pathlib import Path

import pandas as pd

from . import entityerror as ee
from .caselessDictionary import CaselessDictionary, fold_key
from .util import get_filepath

logger = logging.getLogger(__name__)


class ColumnKind(Enum):
    text = 'text'
    integer = 'integer'
    decimal = 'decimal'
    date = 'date'

    @classmethod
    def parse(cls, text):
        """ Map a kind name, or a common alias of one, to a ColumnKind. """
        if isinstance(text, ColumnKind):
            return text
        key = str(text).strip().casefold()
        return _kind_aliases.get(key, ColumnKind.text)

    @property
    def is_numeric(self):
        return self in (ColumnKind.integer, ColumnKind.decimal)


_kind_aliases = {
    'text': ColumnKind.text, 'string': ColumnKind.text, 'str': ColumnKind.text,
    'integer': ColumnKind.integer, 'int': ColumnKind.integer,
    'count': ColumnKind.integer, 'year': ColumnKind.integer,
    'decimal': ColumnKind.decimal, 'float': ColumnKind.decimal,
    'number': ColumnKind.decimal, 'numeric': ColumnKind.decimal,
    'real': ColumnKind.decimal,
    'date': ColumnKind.date, 'datetime': ColumnKind.date,
    }


class _Missing():
    """ The marker of a cell with no value. Falsy, equal only to itself. """
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return 'MISSING'

    def __bool__(self):
        return False

    def __reduce__(self):
        return (_Missing, ())


MISSING = _Missing()

_null_words = {'', 'null', 'none', 'n/a', 'na', 'nan', 'unknown', '-', '—',
               'not stated', 'not available'}

_number = re.compile(
    r'[+-]?(?:\d{1,3}(?:[,\u00a0\u202f\u2009]\d{3})+|\d+)(?:\.\d+)?'
    r'(?:[eE][+-]?\d+)?|[+-]?\.\d+')
_multipliers = {'thousand': 1e3, 'million': 1e6, 'billion': 1e9,
                'trillion': 1e12}
_multiplier = re.compile(r'\s*(thousand|million|billion|trillion)\b',
                         re.IGNORECASE)
_iso_date = re.compile(r'^[+-]?\d{4}-\d{2}-\d{2}')
_year = re.compile(r'^(\d{3,4})(?:\s*(?:AD|CE))?$', re.IGNORECASE)


def is_missing(value):
    return value is MISSING


def is_null_text(value):
    return value is None or str(value).strip().casefold() in _null_words


def parse_number(value):
    """ Return the first number in ``value`` as a float, or None.

    Thousands separators are removed and a trailing 'thousand', 'million',
    'billion' or 'trillion' scales the number; other units are ignored.
    """
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value)
    m = _number.search(text)
    if m is None:
        return None
    digits = re.sub(r'[,\u00a0\u202f\u2009]', '', m.group())
    number = float(digits)
    mult = _multiplier.match(text, m.end())
    if mult:
        number *= _multipliers[mult.group(1).lower()]
    return number


def parse_date(value):
    """ Return a datetime.date for ``value``, or None.

    Tries ISO dates, then a bare year, then pandas' free-text parser.
    """
    if isinstance(value, datetime.datetime):
        return value.date()
    if isinstance(value, datetime.date):
        return value
    text = str(value).strip()
    if _iso_date.match(text):
        try:
            return datetime.date.fromisoformat(text[:10])
        except ValueError:
            return None
    m = _year.match(text)
    if m:
        return datetime.date(int(m.group(1)), 1, 1)
    if not any(ch.isdigit() for ch in text):
        return None
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        stamp = pd.to_datetime(text, errors='coerce')
    if pd.isna(stamp):
        return None
    return stamp.date()


def coerce(value, kind):
    """ Convert a raw value to ``kind``; MISSING when it cannot be.

    Args:
        value: a raw extracted value (str, number, date or None)
        kind: ColumnKind

    Returns:
        str, int, float, datetime.date or MISSING
    """
    if value is MISSING or is_null_text(value):
        return MISSING
    kind = ColumnKind.parse(kind)
    if kind is ColumnKind.text:
        if isinstance(value, datetime.date):
            return value.isoformat()
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        return ' '.join(str(value).split())
    if kind is ColumnKind.date:
        d = parse_date(value)
        return MISSING if d is None else d
    number = parse_number(value)
    if number is None:
        return MISSING
    if kind is ColumnKind.integer:
        if not float(number).is_integer():
            return MISSING
        return int(number)
    return float(number)


def format_value(value):
    """ The text form of a cell for CSV files and prompts; '' for MISSING. """
    if value is MISSING:
        return ''
    if isinstance(value, datetime.date):
        return value.isoformat()
    if isinstance(value, float) and value.is_integer():
        return str(int(value)) if abs(value) < 1e15 else repr(value)
    return str(value)


class SynonymDictionary():
    """ Map equal-meaning strings to one canonical form.

    The packaged data/synonyms.txt is always loaded; an override file adds
    to it and wins on conflicts. Lines read ``alias = canonical``; text
    after '#' is a comment. Chains (a = b, b = c) are followed to the end.
    """

    def __init__(self, path=None, pairs=None):
        raw = CaselessDictionary()
        self._load(get_filepath('synonyms.txt'), raw)
        if path is not None:
            self._load(Path(path), raw)
        for alias, canonical in (pairs or {}).items():
            raw[alias] = canonical
        self.map = self._close(raw)

    def __len__(self):
        return len(self.map)

    def __contains__(self, text):
        return text in self.map

    @staticmethod
    def _load(path, raw):
        with open(path, encoding='utf-8') as f:
            for line_no, line in enumerate(f, start=1):
                line = line.split('#', 1)[0].strip()
                if not line:
                    continue
                alias, sep, canonical = line.partition('=')
                if not sep or not alias.strip() or not canonical.strip():
                    raise ee.ConfigError(f"{path}:{line_no}: expected "
                                         f"'alias = canonical'")
                raw[alias.strip()] = canonical.strip()

    @staticmethod
    def _close(raw):
        resolved = CaselessDictionary()
        for alias in raw.keys():
            target = raw[alias]
            seen = {fold_key(alias)}
            while target in raw and fold_key(target) not in seen:
                seen.add(fold_key(target))
                target = raw[target]
            if target in raw and fold_key(raw[target]) != fold_key(target):
                raise ee.ConfigError(f"synonym cycle through '{alias}'")
            resolved[alias] = target
        for canonical in set(resolved.values()):
            if canonical not in resolved:
                resolved[canonical] = canonical
        return resolved

    def canonical(self, text):
        """ The canonical form of ``text``; ``text`` itself if unknown. """
        if not isinstance(text, str):
            return text
        return self.map.get(text, text)

    def label_key(self, text):
        """ The comparison key of a label: canonical form, folded. """
        return fold_key(self.canonical(str(text).strip()))
