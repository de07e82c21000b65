import tempfile
from pathlib import Path

from robust_qcd.util import calculate_md5_string, load_yaml_file, to_plain, write_file_atomic
from tests import TestBase


class Md5Test(TestBase):

    def test_string(self):
        self.assertEqual(calculate_md5_string("abc"), "900150983cd24fb0d6963f7d28e17f72")

    def test_mapping_ignores_key_order(self):
        self.assertEqual(calculate_md5_string({"a": 1, "b": [1, 2]}), calculate_md5_string({"b": [1, 2], "a": 1}))
        self.assertNotEqual(calculate_md5_string({"a": 1}), calculate_md5_string({"a": 2}))


class WriteFileAtomicTest(TestBase):

    def test_creates_parent_directories(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = Path(tmp) / "a" / "b" / "out.txt"
            write_file_atomic(target, "hello\n")
            self.assertEqual(target.read_text(), "hello\n")
            self.assertEqual(list(target.parent.glob("*.tmp")), [])

    def test_replaces_existing_content(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = Path(tmp) / "out.txt"
            target.write_text("old content that is longer")
            write_file_atomic(target, "new")
            self.assertEqual(target.read_text(), "new")


class YamlTest(TestBase):

    def test_load_gives_plain_data(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "config.yaml"
            path.write_text("experiment: far\nfar:\n  sigma0: [0.1, 10]\n  eps: 0.05\n")
            data = load_yaml_file(path)
        self.assertEqual(data, {"experiment": "far", "far": {"sigma0": [0.1, 10], "eps": 0.05}})
        self.assertIs(type(data["far"]), dict)
        self.assertIs(type(data["far"]["sigma0"]), list)

    def test_to_plain_keeps_scalars(self):
        self.assertEqual(to_plain({"a": (1, 2.5, None, True)}), {"a": [1, 2.5, None, True]})
