#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
"""Utilities including the Singleton metaclass and package data lookup

.. codeauthor: entitytables developers
"""
import hashlib
import json
import os
import re
import tempfile
from pathlib import Path


class Counter(dict):
    """A dict that initializes a missing key's value to 0.

    Example:
        substitutions = Counter()
        substitutions['US -> United States'] += 1
        """

    def __missing__(self, key):
        return 0


class Singleton(type):
    """A metaclass implementation for the Singleton pattern.

    Example:

        class JustOne(metaclass=Singleton):
            pass
    """
    _instances = {}

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            cls._instances[cls] = (super(Singleton, cls).
                                   __call__(*args, **kwargs))
        return cls._instances[cls]


def get_filepath(fname):
    """ given a data file name, return a complete Path to the file

    The data files included with the ``entitytables`` package are located in
    a data directory in the package hierarchy.
    ::

        entitytables/
            data/
                fname

    Args:
        fname (str): the data filename, including extender

    Returns:
        Path: full path including filename for requested data file
    """
    pth = Path(__file__).resolve().parent
    return pth/'data'/fname


def content_key(*parts):
    """ SHA-256 hex digest of the JSON encoding of ``parts``. """
    payload = json.dumps(parts, ensure_ascii=False, sort_keys=True,
                         separators=(',', ':'))
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


def atomic_write_text(path, text):
    """ Write ``text`` to ``path`` via a temporary file and rename. """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def slugify(text):
    """ Lower-case ``text`` and join its words with hyphens. """
    return re.sub(r'[^a-z0-9]+', '-', str(text).casefold()).strip('-')
