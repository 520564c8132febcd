#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Language model gateway: model tiers, prompt templates and backends

Every call to a language model goes through a :class:`Gateway`. The gateway
picks the model tier for the task, renders the prompt from the packaged
template catalog and hands an :class:`LlmRequest` to a backend.

Backends:

    - :class:`HttpChatBackend`: an OpenAI-compatible chat-completions
      endpoint
    - :class:`EchoBackend`: returns the prompt, for smoke tests
    - :class:`FunctionBackend`: wraps a Python callable
    - :class:`RecordingBackend`: forwards to another backend and appends
      each exchange to a tape
    - :class:`ReplayBackend`: serves replies from a tape by content hash

A tape is a line-delimited JSON file, one exchange per line, keyed by the
SHA-256 of (task, prompt).

.. codeauthor: entitytables developers
"""
import json
import logging
import re
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import requests
import yaml

from . import entityerror as ee
from .kbclient import DEFAULT_BACKOFF, DEFAULT_RETRIES, send_with_retry
from .util import Counter, Singleton, content_key, get_filepath

logger = logging.getLogger(__name__)

_placeholder = re.compile(r'\{([a-z][a-z0-9_]*)\}')


class TaskClass(Enum):
    SemanticAnalysis = 'SemanticAnalysis'
    SchemaGeneration = 'SchemaGeneration'
    SqlGeneration = 'SqlGeneration'
    InformationExtraction = 'InformationExtraction'
    QuestionRefinement = 'QuestionRefinement'


class Tier(Enum):
    Capable = 'Capable'
    Fast = 'Fast'


_task_tiers = {
    TaskClass.SemanticAnalysis: Tier.Capable,
    TaskClass.SchemaGeneration: Tier.Capable,
    TaskClass.SqlGeneration: Tier.Capable,
    TaskClass.QuestionRefinement: Tier.Capable,
    TaskClass.InformationExtraction: Tier.Fast,
    }


@dataclass(frozen=True)
class ModelTier:
    tier: Tier
    model_name: str


@dataclass(frozen=True)
class LlmRequest:
    task: TaskClass
    prompt: str
    max_output_tokens: int = 512
    temperature: float = 0.0
    model_name: str = ''

    def __post_init__(self):
        if not self.prompt:
            raise ValueError('LlmRequest prompt must be non-empty')
        if self.max_output_tokens <= 0:
            raise ValueError('max_output_tokens must be positive')
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError('temperature must be in [0, 1]')

    @property
    def key(self):
        return request_key(self.task, self.prompt)


@dataclass(frozen=True)
class LlmResponse:
    text: str
    input_tokens: int
    output_tokens: int
    backend_id: str


def request_key(task, prompt):
    """ The tape key of a request: SHA-256 of (task, prompt). """
    return content_key(TaskClass(task).value, prompt)


def count_tokens(text):
    return len(text.split())


def select_model(task, models=None):
    """ Return the ModelTier used for ``task``.

    Args:
        task: a TaskClass
        models: dict of Tier -> model name
    """
    tier = _task_tiers[TaskClass(task)]
    name = (models or {}).get(tier, tier.value.lower())
    return ModelTier(tier, name)


# --- prompt templates
@dataclass(frozen=True)
class PromptTemplate:
    """ A template; ``text`` already includes the output-control suffix when
    the reply is machine-parsed. """
    template_id: str
    text: str
    parsed: bool

    @property
    def placeholders(self):
        return _placeholder.findall(self.text)


class PromptCatalog(metaclass=Singleton):
    """ The packaged prompt templates, loaded once from prompts.yaml. """

    def __init__(self, fname='prompts.yaml'):
        self.templates = load_templates(get_filepath(fname))

    def __getitem__(self, template_id):
        try:
            return self.templates[template_id]
        except KeyError:
            raise ee.TemplateError(template_id)

    def __contains__(self, template_id):
        return template_id in self.templates


def load_templates(path):
    """ Read a template document; returns dict of id -> PromptTemplate. """
    doc = yaml.safe_load(Path(path).read_text(encoding='utf-8'))
    suffix = doc.get('suffix', '')
    templates = {}
    for tid, entry in doc['templates'].items():
        text = entry['text']
        parsed = bool(entry.get('parsed', False))
        if parsed and suffix:
            text = text + '\n\n' + suffix.replace('{output}',
                                                  entry.get('output', 'answer'))
        templates[tid] = PromptTemplate(tid, text, parsed)
    return templates


def render_prompt(template_id, bindings, catalog=None):
    """ Substitute ``bindings`` into the template's {name} placeholders.

    Substitution is a single pass; binding values are never rescanned.

    Raises:
        TemplateError: unknown template or a placeholder with no binding
    """
    catalog = catalog if catalog is not None else PromptCatalog()
    tpl = catalog[template_id]
    for name in tpl.placeholders:
        if name not in bindings:
            raise ee.TemplateError(template_id, name)
    return _placeholder.sub(lambda m: str(bindings[m.group(1)]), tpl.text)


# --- reply cleanup
_fence = re.compile(r'```[^\n]*\n(.*?)(?:```|$)', re.DOTALL)
_code_start = re.compile(r'^\s*(SELECT|PREFIX|WITH|ASK)\b', re.IGNORECASE)


def clean_reply(text, structured=True):
    """ Strip code fences and surrounding prose from a model reply.

    Args:
        text: the raw reply
        structured: True for JSON/YAML payloads, False for query text

    For JSON payloads the result runs from the first line starting with
    '{' or '[' through the last line ending with '}' or ']'. For query text
    it runs from the first line starting with a query keyword up to the
    first blank line, with a trailing ';' removed.
    """
    m = _fence.search(text)
    if m:
        text = m.group(1)
    lines = text.strip().splitlines()
    if structured:
        start = next((i for i, ln in enumerate(lines)
                      if ln.lstrip()[:1] in ('{', '[')), None)
        if start is None:
            return text.strip()
        end = max((i for i, ln in enumerate(lines)
                   if ln.rstrip()[-1:] in ('}', ']')), default=len(lines)-1)
        return '\n'.join(lines[start:max(start, end)+1]).strip()
    start = next((i for i, ln in enumerate(lines) if _code_start.match(ln)),
                 None)
    if start is None:
        return text.strip().rstrip(';').strip()
    body = []
    for ln in lines[start:]:
        if not ln.strip():
            break
        body.append(ln)
    return '\n'.join(body).strip().rstrip(';').strip()


def parse_structured(text):
    """ Parse a JSON (or YAML) payload out of a reply.

    Raises:
        LlmOutputError: nothing parseable to a dict or list remains
    """
    cleaned = clean_reply(text, structured=True)
    try:
        value = json.loads(cleaned)
    except ValueError:
        try:
            value = yaml.safe_load(cleaned)
        except yaml.YAMLError as e:
            raise ee.LlmOutputError(text, f"unparseable reply ({e})")
    if not isinstance(value, (dict, list)):
        raise ee.LlmOutputError(text, 'reply is not a JSON object or list')
    return value


# --- backends
class EchoBackend():
    """ Returns the prompt verbatim. """
    backend_id = 'echo'

    def complete(self, request):
        n = count_tokens(request.prompt)
        return LlmResponse(request.prompt, n, n, self.backend_id)


class FunctionBackend():
    """ Calls ``fn(request) -> str`` for each request. """

    def __init__(self, fn, backend_id='function'):
        self.fn = fn
        self.backend_id = backend_id

    def complete(self, request):
        text = self.fn(request).rstrip()
        return LlmResponse(text, count_tokens(request.prompt),
                           count_tokens(text), self.backend_id)


class HttpChatBackend():
    """ OpenAI-compatible chat-completions client. """
    backend_id = 'http'

    def __init__(self, base_url, api_key=None, session=None,
                 retries=DEFAULT_RETRIES, backoff=DEFAULT_BACKOFF,
                 timeout=120):
        self.url = base_url.rstrip('/') + '/chat/completions'
        self.session = session if session is not None else requests.Session()
        if api_key:
            self.session.headers['Authorization'] = f"Bearer {api_key}"
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout

    def complete(self, request):
        body = {'model': request.model_name,
                'messages': [{'role': 'user', 'content': request.prompt}],
                'temperature': request.temperature,
                'max_tokens': request.max_output_tokens}
        resp = send_with_retry(self.session, 'POST', self.url,
                               retries=self.retries, backoff=self.backoff,
                               json=body, timeout=self.timeout)
        try:
            data = resp.json()
            text = data['choices'][0]['message']['content'] or ''
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise ee.TransportError(self.url, f"malformed reply: {e}")
        usage = data.get('usage') or {}
        text = text.rstrip()
        return LlmResponse(
            text,
            usage.get('prompt_tokens', count_tokens(request.prompt)),
            usage.get('completion_tokens', count_tokens(text)),
            self.backend_id)


class Tape():
    """ Append-only line-delimited record of exchanges.

    Each line holds: hash, task, model_tier, prompt_head (the first 200
    characters of the prompt), response_text, input_tokens, output_tokens.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.entries = {}
        self._lock = threading.Lock()
        if self.path.exists():
            self._read()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def _read(self):
        with self.path.open(encoding='utf-8') as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    key = entry['hash']
                    entry['response_text']
                    entry['task']
                except ValueError as e:
                    raise ee.TapeParseError(self.path, line_no,
                                            f"not JSON ({e})")
                except (KeyError, TypeError) as e:
                    raise ee.TapeParseError(self.path, line_no,
                                            f"missing field {e}")
                self.entries[key] = entry

    def get(self, key):
        return self.entries.get(key)

    def append(self, request, response, tier):
        key = request.key
        entry = {'hash': key,
                 'task': request.task.value,
                 'model_tier': tier.value,
                 'prompt_head': request.prompt[:200],
                 'response_text': response.text,
                 'input_tokens': response.input_tokens,
                 'output_tokens': response.output_tokens}
        with self._lock:
            if key in self.entries:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open('a', encoding='utf-8') as f:
                f.write(json.dumps(entry, ensure_ascii=False) + '\n')
            self.entries[key] = entry

    def stats(self):
        per_task = Counter()
        for entry in self.entries.values():
            per_task[entry['task']] += 1
        return {'entries': len(self.entries), 'tasks': dict(per_task)}


class RecordingBackend():
    """ Forward to ``inner`` and append every exchange to ``tape``. """

    def __init__(self, inner, tape):
        self.inner = inner
        self.tape = tape
        self.backend_id = f"record:{inner.backend_id}"

    def complete(self, request):
        response = self.inner.complete(request)
        self.tape.append(request, response, select_model(request.task).tier)
        return response


class ReplayBackend():
    """ Serve replies from ``tape``.

    In strict mode a miss raises TapeMissError. In lenient mode a miss is
    forwarded to ``fallback`` when one is given, otherwise it also raises.
    """
    backend_id = 'replay'

    def __init__(self, tape, strict=True, fallback=None):
        self.tape = tape
        self.strict = strict
        self.fallback = fallback

    def complete(self, request):
        entry = self.tape.get(request.key)
        if entry is not None:
            logger.debug("tape hit %s %s", request.key[:12],
                         request.task.value)
            return LlmResponse(entry['response_text'],
                               entry.get('input_tokens', 0),
                               entry.get('output_tokens', 0),
                               self.backend_id)
        logger.debug("tape miss %s %s", request.key[:12], request.task.value)
        if not self.strict and self.fallback is not None:
            return self.fallback.complete(request)
        raise ee.TapeMissError(request.key, request.task.value)


def record_session(tape_path, inner):
    return RecordingBackend(inner, Tape(tape_path))


def replay_session(tape_path, strict=True, fallback=None):
    tape_path = Path(tape_path)
    if not tape_path.exists():
        if strict:
            raise ee.TapeParseError(tape_path, 0, 'tape file not found')
        logger.info("no tape at %s; lenient replay starts empty", tape_path)
    return ReplayBackend(Tape(tape_path), strict=strict, fallback=fallback)


class Gateway():
    """ Task-aware front end to a backend.

    Attributes:
        backend: the object whose ``complete(LlmRequest)`` answers requests
        models: dict of Tier -> model name
        catalog: the PromptCatalog used by :meth:`ask`
    """

    def __init__(self, backend, models=None, catalog=None,
                 max_output_tokens=512):
        self.backend = backend
        self.models = models or {}
        self.catalog = catalog if catalog is not None else PromptCatalog()
        self.max_output_tokens = max_output_tokens

    def complete(self, task, prompt, max_output_tokens=None):
        model = select_model(task, self.models)
        request = LlmRequest(TaskClass(task), prompt,
                             max_output_tokens or self.max_output_tokens,
                             0.0, model.model_name)
        logger.debug("%s -> %s tier, prompt %d chars", request.task.value,
                     model.tier.value, len(prompt))
        return self.backend.complete(request)

    def ask(self, task, template_id, bindings, max_output_tokens=None):
        """ Render ``template_id`` and return the reply text. """
        prompt = render_prompt(template_id, bindings, self.catalog)
        return self.complete(task, prompt, max_output_tokens).text
