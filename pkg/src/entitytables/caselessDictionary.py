#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
"""Dictionary that enables caseless, spacing-insensitive lookup

    Column names arrive from language model replies and SQL text in many
    spellings: 'Field of Study', 'field_of_study', '"field of study"'. This
    dictionary folds all of them to one key while preserving the first
    spelling for listing.

.. codeauthor: entitytables developers
"""
import re

_SEPARATORS = re.compile(r'[\s_\-]+')
_QUOTES = '"`\'[]'


def fold_key(key):
    """ Return the lookup form of ``key``: casefolded, unquoted, and with
    runs of whitespace, underscores and hyphens collapsed to one space. """
    key = str(key).strip().strip(_QUOTES)
    return _SEPARATORS.sub(' ', key).strip().casefold()


class CaselessDictionary(dict):
    """Dictionary that enables caseless searching while preserving the
    original spelling of keys when listed via keys() or items().

    Works by storing the folded version of the key as the new key and the
    original key-value pair as the key's value.
    """

    def __init__(self, initval=None):
        super().__init__()
        if initval is None:
            return
        if isinstance(initval, dict):
            initval = initval.items()
        for key, value in initval:
            self.__setitem__(key, value)

    def __contains__(self, key):
        return dict.__contains__(self, fold_key(key))

    def __getitem__(self, key):
        return dict.__getitem__(self, fold_key(key))['val']

    def __setitem__(self, key, value):
        folded = fold_key(key)
        if dict.__contains__(self, folded):
            key = dict.__getitem__(self, folded)['key']
        return dict.__setitem__(self, folded, {'key': key, 'val': value})

    def __delitem__(self, key):
        return dict.__delitem__(self, fold_key(key))

    def __iter__(self):
        return iter(self.keys())

    def get(self, key, default=None):
        try:
            v = dict.__getitem__(self, fold_key(key))
        except KeyError:
            return default
        else:
            return v['val']

    def original_key(self, key):
        """ Return the first spelling stored for ``key``. """
        return dict.__getitem__(self, fold_key(key))['key']

    def items(self):
        return [(v['key'], v['val']) for v in dict.values(self)]

    def keys(self):
        return [v['key'] for v in dict.values(self)]

    def values(self):
        return [v['val'] for v in dict.values(self)]
