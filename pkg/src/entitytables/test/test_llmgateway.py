#!/usr/bin/env python3
# -*- coding: utf-8 -*-
""" unit test for prompt rendering, reply parsing, backends and tapes

.. codeauthor: entitytables developers
"""

import json
import tempfile
import unittest
from pathlib import Path

from entitytables import entityerror as ee
from entitytables.llmgateway import (EchoBackend, FunctionBackend, Gateway,
                                     HttpChatBackend, LlmRequest,
                                     PromptCatalog, ReplayBackend, TaskClass,
                                     Tape, Tier, clean_reply,
                                     parse_structured, record_session,
                                     render_prompt, replay_session,
                                     request_key, select_model)
from entitytables.test.util import FakeResponse, FakeSession


class ModelSelectionTestCase(unittest.TestCase):

    def test_tiers(self):
        self.assertIs(select_model(TaskClass.InformationExtraction).tier,
                      Tier.Fast)
        for task in (TaskClass.SemanticAnalysis, TaskClass.SqlGeneration,
                     TaskClass.SchemaGeneration):
            self.assertIs(select_model(task).tier, Tier.Capable)
        model = select_model('SqlGeneration', {Tier.Capable: 'big-model'})
        self.assertEqual(model.model_name, 'big-model')

    def test_request_validation(self):
        with self.assertRaises(ValueError):
            LlmRequest(TaskClass.SqlGeneration, '')
        with self.assertRaises(ValueError):
            LlmRequest(TaskClass.SqlGeneration, 'hi', temperature=1.5)
        with self.assertRaises(ValueError):
            LlmRequest(TaskClass.SqlGeneration, 'hi', max_output_tokens=0)

    def test_key_depends_on_task_and_prompt(self):
        a = LlmRequest(TaskClass.SqlGeneration, 'prompt', model_name='x')
        b = LlmRequest(TaskClass.SqlGeneration, 'prompt', model_name='y')
        c = LlmRequest(TaskClass.SchemaGeneration, 'prompt')
        self.assertEqual(a.key, b.key)
        self.assertNotEqual(a.key, c.key)
        self.assertEqual(a.key, request_key('SqlGeneration', 'prompt'))
        self.assertEqual(len(a.key), 64)


class PromptTestCase(unittest.TestCase):

    def test_catalog_is_shared(self):
        self.assertIs(PromptCatalog(), PromptCatalog())
        for tid in ('semantic_analysis', 'schema', 'extract_row',
                    'generate_sql', 'refine_question'):
            self.assertIn(tid, PromptCatalog())

    def test_render(self):
        text = render_prompt('schema', {'topic': 'US presidents',
                                        'question': 'Who was tallest?'})
        self.assertIn('information about\nUS presidents', text)
        self.assertIn('Who was tallest?', text)
        self.assertIn('"table_name"', text)
        self.assertTrue(text.rstrip().endswith('no other word or symbol.'))
        self.assertIn('Just output the JSON object', text)

    def test_bindings_are_not_rescanned(self):
        text = render_prompt('schema', {'topic': '{question}',
                                        'question': 'q'})
        self.assertIn('{question}', text)

    def test_unbound_and_unknown(self):
        with self.assertRaises(ee.TemplateError):
            render_prompt('schema', {'topic': 'x'})
        with self.assertRaises(ee.TemplateError):
            render_prompt('no_such_template', {})


class ReplyParsingTestCase(unittest.TestCase):

    def test_clean_structured(self):
        reply = 'Sure! Here it is:\n```json\n{"a": 1}\n```\nHope it helps.'
        self.assertEqual(clean_reply(reply), '{"a": 1}')
        self.assertEqual(clean_reply('prefix\n[1, 2]\nsuffix'), '[1, 2]')

    def test_clean_query(self):
        reply = ('The query is:\n\nSELECT name FROM t\nWHERE x > 1;\n\n'
                 'It filters rows.')
        self.assertEqual(clean_reply(reply, structured=False),
                         'SELECT name FROM t\nWHERE x > 1')
        self.assertEqual(clean_reply('```sql\nselect a from t;\n```',
                                     structured=False), 'select a from t')

    def test_parse_structured(self):
        self.assertEqual(parse_structured('```\n{"a": [1, 2]}\n```'),
                         {'a': [1, 2]})
        self.assertEqual(parse_structured('a: 1\nb: two'),
                         {'a': 1, 'b': 'two'})
        for bad in ('just words', '42', '{"a": '):
            with self.assertRaises(ee.LlmOutputError, msg=bad):
                parse_structured(bad)


class BackendTestCase(unittest.TestCase):

    def test_echo_and_function(self):
        gateway = Gateway(EchoBackend())
        self.assertEqual(gateway.complete(TaskClass.SqlGeneration,
                                          'hello there').text, 'hello there')
        gateway = Gateway(FunctionBackend(lambda r: r.model_name + '  \n'),
                          models={Tier.Fast: 'small'})
        self.assertEqual(gateway.complete(TaskClass.InformationExtraction,
                                          'x').text, 'small')

    def test_http_chat(self):
        def handler(method, url, kwargs):
            body = kwargs['json']
            self.assertEqual(method, 'POST')
            self.assertEqual(url, 'http://llm.local/v1/chat/completions')
            self.assertEqual(body['temperature'], 0.0)
            return FakeResponse(data={
                'choices': [{'message': {'content': 'SELECT 1 \n'}}],
                'usage': {'prompt_tokens': 7, 'completion_tokens': 2}})
        session = FakeSession(handler)
        backend = HttpChatBackend('http://llm.local/v1/', api_key='k',
                                  session=session, backoff=0)
        reply = backend.complete(LlmRequest(TaskClass.SqlGeneration, 'q',
                                            model_name='m'))
        self.assertEqual((reply.text, reply.input_tokens,
                          reply.output_tokens), ('SELECT 1', 7, 2))
        self.assertEqual(session.headers['Authorization'], 'Bearer k')
        self.assertEqual(session.calls[0][2]['json']['model'], 'm')

    def test_http_chat_errors(self):
        backend = HttpChatBackend(
            'http://llm.local', backoff=0,
            session=FakeSession(lambda *a: FakeResponse(data={'x': 1})))
        with self.assertRaises(ee.TransportError):
            backend.complete(LlmRequest(TaskClass.SqlGeneration, 'q'))
        session = FakeSession(lambda *a: FakeResponse(503, data={}))
        backend = HttpChatBackend('http://llm.local', backoff=0, retries=2,
                                  session=session)
        with self.assertRaises(ee.TransportError) as cm:
            backend.complete(LlmRequest(TaskClass.SqlGeneration, 'q'))
        self.assertEqual(cm.exception.attempts, 2)
        self.assertEqual(len(session.calls), 2)


class TapeTestCase(unittest.TestCase):

    def test_record_then_replay(self):
        replies = iter(['first', 'second'])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp)/'run'/'tape.jsonl'
            recorder = Gateway(record_session(
                path, FunctionBackend(lambda r: next(replies))))
            self.assertEqual(recorder.complete(TaskClass.SqlGeneration,
                                               'p1').text, 'first')
            self.assertEqual(recorder.complete(TaskClass.SemanticAnalysis,
                                               'p2').text, 'second')
            lines = path.read_text(encoding='utf-8').splitlines()
            self.assertEqual(len(lines), 2)
            entry = json.loads(lines[0])
            self.assertEqual(entry['model_tier'], 'Capable')
            self.assertEqual(entry['prompt_head'], 'p1')

            replay = Gateway(replay_session(path))
            self.assertEqual(replay.complete(TaskClass.SemanticAnalysis,
                                             'p2').text, 'second')
            self.assertEqual(replay.complete(TaskClass.SqlGeneration,
                                             'p1').text, 'first')
            with self.assertRaises(ee.TapeMissError) as cm:
                replay.complete(TaskClass.SemanticAnalysis, 'p1')
            self.assertEqual(cm.exception.exit_code, ee.EXIT_INTEGRITY)
            self.assertEqual(Tape(path).stats(),
                             {'entries': 2, 'tasks': {'SqlGeneration': 1,
                                                      'SemanticAnalysis': 1}})

    def test_duplicate_requests_append_once(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp)/'tape.jsonl'
            gateway = Gateway(record_session(path, EchoBackend()))
            gateway.complete(TaskClass.SqlGeneration, 'same')
            gateway.complete(TaskClass.SqlGeneration, 'same')
            self.assertEqual(len(Tape(path)), 1)

    def test_lenient_replay(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp)/'missing.jsonl'
            with self.assertRaises(ee.TapeParseError):
                replay_session(path)
            backend = replay_session(path, strict=False,
                                     fallback=EchoBackend())
            self.assertEqual(Gateway(backend).complete(
                TaskClass.SqlGeneration, 'echo me').text, 'echo me')
            with self.assertRaises(ee.TapeMissError):
                Gateway(ReplayBackend(Tape(path), strict=False)).complete(
                    TaskClass.SqlGeneration, 'nothing')

    def test_corrupt_tape(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp)/'tape.jsonl'
            path.write_text('{"hash": "ab", "task": "SqlGeneration", '
                            '"response_text": "x"}\n\n{"hash": "cd"}\n',
                            encoding='utf-8')
            with self.assertRaises(ee.TapeParseError) as cm:
                Tape(path)
            self.assertEqual(cm.exception.line_no, 3)
            path.write_text('{broken\n', encoding='utf-8')
            with self.assertRaises(ee.TapeParseError):
                Tape(path)


if __name__ == '__main__':
    unittest.main(verbosity=2)
