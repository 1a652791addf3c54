import json
import math
import os
import shutil
import tempfile

import numpy as np
from django.test import SimpleTestCase
from openpyxl import load_workbook

from closures import exporters
from closures.exceptions import OutputError
from closures.exporters import ResultWriter

METADATA = {'command': 'fit-map', 'config': {'K': 5, 'family': 'beta'}, 'version': '0.1.0', 'quadrature': 'none'}


class SerialisationTest(SimpleTestCase):

    def test_float_format_round_trips(self):
        self.assertEqual(exporters.format_float(0.1), '0.10000000000000001')
        self.assertEqual(float(exporters.format_float(math.pi)), math.pi)

    def test_jsonable(self):
        value = exporters.to_jsonable({'a': np.float64(1.5), 'b': np.arange(2), 'c': (np.nan, np.int64(3)), 'd': np.True_})
        self.assertEqual(value, {'a': 1.5, 'b': [0, 1], 'c': [None, 3], 'd': True})

    def test_dumps_is_sorted(self):
        self.assertEqual(exporters.dumps({'b': 1, 'a': 2}), '{\n  "a": 2,\n  "b": 1\n}\n')


class ResultWriterTest(SimpleTestCase):
    """Tables and reports on disk"""

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp_dir, ignore_errors=True)

    def test_csv_table(self):
        writer = ResultWriter(self.tmp_dir, 'csv', METADATA)
        path = writer.write_table('curve', ['x', 'value', 'ok'], [[0.1, None, True], [2, 0.5, False]])
        with open(path) as handle:
            lines = handle.read().splitlines()
        self.assertEqual(lines[0], '# command: fit-map')
        self.assertEqual(lines[1], '# config: {"K": 5, "family": "beta"}')
        self.assertEqual(lines[2], '# version: 0.1.0')
        self.assertEqual(lines[3], '# quadrature: none')
        self.assertEqual(lines[4:], ['x,value,ok', '0.10000000000000001,,true', '2,0.5,false'])

    def test_json_table(self):
        writer = ResultWriter(self.tmp_dir, 'json', METADATA)
        path = writer.write_table('curve', ['x', 'value'], [[1.0, float('inf')]])
        record = json.loads(open(path).read())
        self.assertEqual(record['columns'], ['x', 'value'])
        self.assertEqual(record['rows'], [[1.0, None]])
        self.assertEqual(record['metadata']['command'], 'fit-map')

    def test_xlsx_table(self):
        writer = ResultWriter(self.tmp_dir, 'xlsx', METADATA)
        path = writer.write_table('curve', ['x', 'value'], [[1.0, 2.0], [3.0, None]])
        workbook = load_workbook(path)
        sheet = workbook['curve']
        self.assertEqual([c.value for c in sheet[1]], ['x', 'value'])
        self.assertEqual([c.value for c in sheet[2]], [1.0, 2.0])
        meta = workbook['metadata']
        self.assertEqual(meta['A2'].value, 'command')
        self.assertEqual(meta['B2'].value, 'fit-map')

    def test_report(self):
        writer = ResultWriter(self.tmp_dir, 'csv', METADATA)
        path = writer.write_report('summary', {'peak': np.float64(0.5)})
        self.assertEqual(path.name, 'summary.json')
        record = json.loads(path.read_text())
        self.assertEqual(record['peak'], 0.5)
        self.assertEqual(record['metadata']['version'], '0.1.0')

    def test_unknown_format(self):
        with self.assertRaises(OutputError):
            ResultWriter(self.tmp_dir, 'pdf')

    def test_unwritable_directory(self):
        blocker = os.path.join(self.tmp_dir, 'file')
        with open(blocker, 'w') as handle:
            handle.write('x')
        with self.assertRaises(OutputError) as ctx:
            ResultWriter(os.path.join(blocker, 'out'), 'csv')
        self.assertEqual(ctx.exception.exit_code, 4)
