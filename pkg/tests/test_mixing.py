import sys
import os
import unittest
import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from logic.mixing import fmix64, fmix64_array, splitmix64_stream, key_array, parse_key
from logic.models import MASK64


class TestMixing(unittest.TestCase):
    def test_fmix64_values(self):
        self.assertEqual(fmix64(0), 0)
        self.assertEqual(fmix64(1), 6238072747940578789)

    def test_fmix64_array_matches_scalar(self):
        xs = [0, 1, 2, 12345, MASK64, 1 << 63, 0x9E3779B97F4A7C15]
        got = fmix64_array(np.array(xs, dtype=np.uint64)).tolist()
        self.assertEqual(got, [fmix64(x) for x in xs])

    def test_splitmix_stream(self):
        self.assertEqual(splitmix64_stream(0, 3),
                         [16294208416658607535, 7960286522194355700, 487617019471545679])
        self.assertEqual(splitmix64_stream(1, 2), [10451216379200822465, 13757245211066428519])

    def test_key_array_chunks(self):
        """offset 付きで作ったチャンクを並べると一続きの列と同じ"""
        full = key_array(42, 1000)
        parts = np.concatenate([key_array(42, 300, 0), key_array(42, 300, 300), key_array(42, 400, 600)])
        self.assertTrue(np.array_equal(full, parts))
        self.assertEqual(full[:5].tolist(), splitmix64_stream(42, 5))

    def test_parse_key(self):
        self.assertEqual(parse_key("0"), 0)
        self.assertEqual(parse_key(" 42 "), 42)
        self.assertEqual(parse_key("0xFF"), 255)
        self.assertEqual(parse_key("18446744073709551615"), MASK64)
        self.assertEqual(parse_key("1_000"), 1000)

    def test_parse_key_errors(self):
        for bad in ("", "abc", "-1", "18446744073709551616", "1.5", "0x"):
            with self.assertRaises(ValueError, msg=bad):
                parse_key(bad)


if __name__ == "__main__":
    unittest.main()
