#!/usr/bin/env python3
# -*- coding: utf-8 -*-
""" unit test for layered run configuration

.. codeauthor: entitytables developers
"""

import tempfile
import unittest
from pathlib import Path

from entitytables import entityerror as ee
from entitytables.config import (RunConfig, environment_settings,
                                 load_config, read_config_file)


class LoadConfigTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text, name='run.yaml'):
        path = self.dir/name
        path.write_text(text, encoding='utf-8')
        return path

    def test_defaults(self):
        cfg = load_config(environ={})
        self.assertEqual(cfg.sparql_endpoint,
                         'https://query.wikidata.org/sparql')
        self.assertEqual(cfg.capable_model, 'gpt-4')
        self.assertEqual(cfg.fast_model, 'mistralai/Mistral-7B-Instruct-v0.2')
        self.assertEqual((cfg.seed, cfg.workers, cfg.max_sample_rows),
                         (7, 8, 5))
        self.assertFalse(cfg.offline)
        self.assertIsNone(cfg.cache_root)
        self.assertEqual(cfg.tape_mode, 'off')

    def test_precedence(self):
        path = self.write('seed: 11\nworkers: 2\ncache_root: from-file\n')
        env = {'ENTITYTABLES_CACHE_ROOT': str(self.dir/'env-cache'),
               'ENTITYTABLES_OFFLINE': 'yes',
               'OTHER': 'ignored'}
        cfg = load_config(path, env, {'workers': 4, 'seed': None})
        self.assertEqual(cfg.seed, 11)
        self.assertEqual(cfg.workers, 4)
        self.assertEqual(cfg.cache_root, self.dir/'env-cache')
        self.assertTrue(cfg.offline)
        self.assertEqual(environment_settings(env),
                         {'cache_root': str(self.dir/'env-cache'),
                          'offline': 'yes'})

    def test_tape_mode(self):
        cfg = load_config(environ={'ENTITYTABLES_TAPE': 'run.tape'})
        self.assertEqual(cfg.tape, Path('run.tape'))
        self.assertEqual(cfg.tape_mode, 'replay')
        cfg = load_config(environ={'ENTITYTABLES_TAPE': 'run.tape'},
                          overrides={'tape_mode': 'record'})
        self.assertEqual(cfg.tape_mode, 'record')
        with self.assertRaises(ee.ConfigError):
            load_config(environ={}, overrides={'tape_mode': 'record'})
        with self.assertRaises(ee.ConfigError):
            load_config(environ={}, overrides={'tape_mode': 'rewind',
                                               'tape': 'x'})

    def test_problems(self):
        for overrides in ({'offline': True}, {'workers': 0},
                          {'max_sample_rows': 6}, {'page_size': 0},
                          {'offline': 'maybe'}, {'seed': 'seven'},
                          {'workers': True}):
            with self.assertRaises(ee.ConfigError, msg=str(overrides)) as cm:
                load_config(environ={}, overrides=overrides)
            self.assertEqual(cm.exception.exit_code, ee.EXIT_USAGE)

    def test_bad_files(self):
        with self.assertRaises(ee.ConfigError):
            load_config(self.write('seed: [1\n'), {})
        with self.assertRaises(ee.ConfigError):
            load_config(self.write('- a\n- b\n'), {})
        with self.assertRaises(ee.ConfigError):
            load_config(self.write('api_key: secret\n'), {})
        with self.assertRaises(ee.ConfigError):
            load_config(self.dir/'missing.yaml', {})
        with self.assertRaises(ee.ConfigError):
            load_config(environ={}, overrides={'colour': 'red'})
        self.assertEqual(read_config_file(self.write('')), {})

    def test_api_key_from_environment(self):
        cfg = load_config(environ={}, overrides={'api_key_env':
                                                 'ENTITYTABLES_TEST_KEY_X'})
        self.assertIsNone(cfg.api_key())
        self.assertNotIn('api_key', cfg.to_dict())

    def test_to_dict(self):
        cfg = RunConfig('s', 'w', 'p', 'l', 'big', 'small', cache_root='c',
                        seed='3')
        d = cfg.to_dict()
        self.assertEqual(d['cache_root'], 'c')
        self.assertEqual(d['seed'], 3)
        self.assertEqual(d['tape_mode'], 'off')


if __name__ == '__main__':
    unittest.main(verbosity=2)
