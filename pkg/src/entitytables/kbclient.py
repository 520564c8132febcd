#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Knowledge-base HTTP clients behind a content-addressed response cache

Three endpoints are used:

    - a SPARQL endpoint returning the standard JSON results format
    - the entity/property search API (``wbsearchentities``, ``wbgetentities``)
    - a page-summary endpoint returning the introductory extract of a page

Every reply is stored in a :class:`ResponseCache` keyed by the SHA-256 of
(endpoint, request parameters). With the ``offline`` flag set, the client
serves from the cache only and a miss raises
:class:`~.entityerror.CacheMissError`.

.. codeauthor: entitytables developers
"""
import json
import logging
import re
import shutil
import threading
import time
from pathlib import Path
from urllib.parse import quote

import requests

from . import entityerror as ee
from .util import atomic_write_text, content_key

logger = logging.getLogger(__name__)

RETRY_STATUS_CODES = (429, 500, 502, 503, 504)
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = 0.5
USER_AGENT = 'entitytables/1.0 (structured question answering)'
SPARQL_ACCEPT = 'application/sparql-results+json'

_limit_clause = re.compile(r'\b(LIMIT|OFFSET)\s+\d+\s*$', re.IGNORECASE)


def send_with_retry(session, method, url, retries=DEFAULT_RETRIES,
                    backoff=DEFAULT_BACKOFF, ok_status=(), sleep=time.sleep,
                    **kwargs):
    """ Send an HTTP request, retrying transient failures.

    Connection errors and the status codes in ``RETRY_STATUS_CODES`` are
    retried up to ``retries`` attempts in total, sleeping ``backoff`` seconds
    before the second attempt and doubling each time.

    Args:
        session: a requests.Session (or an object with the same ``request``
                 method)
        method: 'GET' or 'POST'
        url: the endpoint url
        retries: total number of attempts
        backoff: initial delay in seconds
        ok_status: non-2xx status codes returned to the caller instead of
                   raising, e.g. (404,) for page lookups
        sleep: delay function, replaceable in tests

    Returns:
        the requests.Response

    Raises:
        TransportError: if every attempt failed or a non-retryable status
                        was returned
    """
    delay = backoff
    reason = 'no attempt made'
    for attempt in range(1, retries + 1):
        try:
            resp = session.request(method, url, **kwargs)
        except requests.exceptions.RequestException as e:
            reason = str(e) or type(e).__name__
        else:
            status = resp.status_code
            if status < 300 or status in ok_status:
                return resp
            reason = f"HTTP {status}"
            if status not in RETRY_STATUS_CODES:
                raise ee.TransportError(url, reason, attempt)
        logger.warning("%s %s attempt %d/%d failed: %s",
                       method, url, attempt, retries, reason)
        if attempt < retries:
            sleep(delay)
            delay *= 2
    raise ee.TransportError(url, reason, retries)


class ResponseCache():
    """ Content-addressed store of endpoint replies.

    Entries live in ``<root>/<key[:2]>/<key>.json``, each a JSON document
    holding the endpoint, the request parameters and the reply value, so
    that the key can be re-derived by :meth:`verify`. Writes go through a
    temporary file and an atomic rename; concurrent readers never see a
    partial entry.

    A cache built with ``root=None`` stores nothing.
    """

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else None

    def __repr__(self):
        return f"{type(self).__name__}({str(self.root)!r})"

    @staticmethod
    def key(endpoint, request):
        return content_key(endpoint, request)

    def path(self, key):
        return self.root/key[:2]/f"{key}.json"

    def get(self, endpoint, request):
        """ Return the cached value or None. """
        if self.root is None:
            return None
        key = self.key(endpoint, request)
        pth = self.path(key)
        if not pth.exists():
            logger.debug("cache miss %s %s", key[:12], endpoint)
            return None
        try:
            entry = json.loads(pth.read_text(encoding='utf-8'))
            value = entry['value']
        except (ValueError, KeyError) as e:
            raise ee.CacheCorruptError([key]) from e
        logger.debug("cache hit %s %s", key[:12], endpoint)
        return value

    def put(self, endpoint, request, value):
        if self.root is None:
            return None
        key = self.key(endpoint, request)
        entry = {'endpoint': endpoint, 'request': request, 'value': value}
        atomic_write_text(self.path(key),
                          json.dumps(entry, ensure_ascii=False, indent=1,
                                     sort_keys=True))
        return key

    def entries(self):
        if self.root is None or not self.root.exists():
            return []
        return sorted(self.root.glob('??/*.json'))

    def stats(self):
        """ Return {'entries': count, 'bytes': total size}. """
        files = self.entries()
        return {'entries': len(files),
                'bytes': sum(f.stat().st_size for f in files)}

    def clear(self):
        """ Remove every entry; return the number removed. """
        files = self.entries()
        for f in files:
            f.unlink()
        if self.root is not None and self.root.exists():
            for sub in self.root.iterdir():
                if sub.is_dir() and not any(sub.iterdir()):
                    shutil.rmtree(sub)
        return len(files)

    def verify(self):
        """ Re-hash every entry; return the list of keys that do not match
        their content or cannot be read. """
        corrupt = []
        for f in self.entries():
            key = f.stem
            try:
                entry = json.loads(f.read_text(encoding='utf-8'))
                ok = (self.key(entry['endpoint'], entry['request']) == key
                      and 'value' in entry)
            except (ValueError, KeyError, TypeError):
                ok = False
            if not ok:
                corrupt.append(key)
        return corrupt


class KnowledgeBaseClient():
    """ Cached access to the SPARQL, search and page-summary endpoints.

    Attributes:
        network_calls: number of HTTP exchanges actually performed
    """

    def __init__(self, sparql_endpoint, search_endpoint, page_endpoint,
                 cache=None, offline=False, session=None, page_size=5000,
                 retries=DEFAULT_RETRIES, backoff=DEFAULT_BACKOFF,
                 timeout=60, sleep=time.sleep):
        if offline and (cache is None or cache.root is None):
            raise ee.ConfigError('offline mode requires a cache root')
        self.sparql_endpoint = sparql_endpoint
        self.search_endpoint = search_endpoint
        self.page_endpoint = page_endpoint.rstrip('/')
        self.cache = cache if cache is not None else ResponseCache()
        self.offline = offline
        if session is None:
            session = requests.Session()
            session.headers['User-Agent'] = USER_AGENT
        self.session = session
        self.page_size = page_size
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.sleep = sleep
        self.network_calls = 0
        self._lock = threading.Lock()

    def _fetch(self, endpoint, params, headers=None, ok_status=()):
        """ Return the JSON reply for (endpoint, params), via the cache.

        A status listed in ``ok_status`` is cached as ``{'status': code}``.
        """
        cached = self.cache.get(endpoint, params)
        if cached is not None:
            return cached
        if self.offline:
            raise ee.CacheMissError(endpoint,
                                    ResponseCache.key(endpoint, params))
        resp = send_with_retry(self.session, 'GET', endpoint,
                               retries=self.retries, backoff=self.backoff,
                               ok_status=ok_status, sleep=self.sleep,
                               params=params, headers=headers,
                               timeout=self.timeout)
        with self._lock:
            self.network_calls += 1
        if resp.status_code in ok_status:
            value = {'status': resp.status_code}
        else:
            try:
                value = resp.json()
            except ValueError as e:
                raise ee.EndpointFormatError(endpoint,
                                             f"reply is not JSON: {e}")
        self.cache.put(endpoint, params, value)
        return value

    def sparql(self, query):
        """ Run a SELECT query and return its bindings, following pages.

        Queries without their own LIMIT are paged with LIMIT/OFFSET
        ``page_size`` until a short page is returned.

        Returns:
            list of binding dicts, variable name -> value string
        """
        if _limit_clause.search(query.strip()):
            return self._sparql_page(query)
        bindings = []
        offset = 0
        while True:
            paged = f"{query.rstrip()}\nLIMIT {self.page_size}\nOFFSET {offset}"
            page = self._sparql_page(paged)
            bindings.extend(page)
            if len(page) < self.page_size:
                break
            offset += self.page_size
        logger.debug("sparql returned %d bindings", len(bindings))
        return bindings

    def _sparql_page(self, query):
        data = self._fetch(self.sparql_endpoint, {'query': query},
                           headers={'Accept': SPARQL_ACCEPT})
        try:
            rows = data['results']['bindings']
            return [{var: cell['value'] for var, cell in row.items()}
                    for row in rows]
        except (KeyError, TypeError) as e:
            raise ee.EndpointFormatError(self.sparql_endpoint,
                                         f"missing results field {e}")

    def search(self, mention, kind='entity', limit=10):
        """ Ranked (id, label, description) candidates for ``mention``.

        Args:
            mention: the text to look up
            kind: 'entity' or 'property'
        """
        params = {'action': 'wbsearchentities', 'search': mention,
                  'language': 'en', 'format': 'json', 'limit': limit,
                  'type': 'property' if kind == 'property' else 'item'}
        data = self._fetch(self.search_endpoint, params)
        if not isinstance(data, dict) or 'search' not in data:
            raise ee.EndpointFormatError(self.search_endpoint,
                                         "missing 'search' field")
        return [(c['id'], c.get('label', ''), c.get('description', ''))
                for c in data['search']]

    def sitelink(self, entity_id, site='enwiki'):
        """ Return the page title of ``entity_id`` on ``site``, or None. """
        params = {'action': 'wbgetentities', 'ids': entity_id,
                  'props': 'sitelinks', 'sitefilter': site, 'format': 'json'}
        data = self._fetch(self.search_endpoint, params)
        try:
            entity = data['entities'][entity_id]
        except (KeyError, TypeError):
            raise ee.EndpointFormatError(self.search_endpoint,
                                         f"no entity {entity_id} in reply")
        link = entity.get('sitelinks', {}).get(site)
        return link['title'] if link else None

    def page_intro(self, title):
        """ Return the introductory extract of page ``title``.

        Raises:
            MissingPageError: the endpoint has no page of that title
        """
        url = f"{self.page_endpoint}/{quote(title.replace(' ', '_'), safe='')}"
        data = self._fetch(url, {}, ok_status=(404,))
        if not isinstance(data, dict):
            raise ee.EndpointFormatError(url, 'reply is not a JSON object')
        if data.get('status') == 404:
            raise ee.MissingPageError(title)
        if 'extract' not in data:
            raise ee.EndpointFormatError(url, "missing 'extract' field")
        return data['extract']
