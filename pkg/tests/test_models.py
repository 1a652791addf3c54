from django.test import TestCase

from closures.models import BenchmarkRun


class BenchmarkRunModelTest(TestCase):
    """Test cases for BenchmarkRun model"""

    def setUp(self):
        self.run = BenchmarkRun.objects.create(command='invert-beam', config={'N': 1, 'K': 5})

    def test_create_run(self):
        """Test creating a run record"""
        self.assertEqual(self.run.status, 'pending')
        self.assertEqual(self.run.outputs, [])
        self.assertEqual(self.run.error_details, {})
        self.assertIsNotNone(self.run.created_at)
        self.assertFalse(self.run.is_complete)

    def test_string_representation(self):
        self.assertEqual(str(self.run), 'invert-beam - Pending')
        self.run.mark_completed(['/tmp/summary.json'], label='beta_1_5')
        self.assertEqual(str(self.run), 'invert-beam beta_1_5 - Completed')

    def test_mark_running(self):
        self.run.mark_running()
        self.run.refresh_from_db()
        self.assertEqual(self.run.status, 'running')

    def test_mark_completed(self):
        self.run.mark_completed(['/tmp/a.csv', '/tmp/b.json'], label='beta_1_5')
        self.run.refresh_from_db()
        self.assertTrue(self.run.is_complete)
        self.assertEqual(self.run.outputs, ['/tmp/a.csv', '/tmp/b.json'])

    def test_set_error(self):
        """Test setting error information on a run"""
        self.run.set_error('inversion did not converge', {'status': 'max_iter'})
        self.run.refresh_from_db()
        self.assertEqual(self.run.status, 'failed')
        self.assertEqual(self.run.error_message, 'inversion did not converge')
        self.assertEqual(self.run.error_details, {'status': 'max_iter'})
