import json
import math
import os
import tempfile
import unittest

import pandas as pd

from constants import EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, VERSION
from utils import (BracketError, BudgetError, ConfigurationError, DomainError, InfeasibleError, ModeError,
                   NumericalError, UnboundedError, exit_code_for, finite_difference, flatten_row,
                   load_json_config, metadata_line, read_csv_with_metadata, relative_error, write_csv, write_json)


class TestUtils(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_exit_codes(self):
        self.assertEqual(exit_code_for(None), EXIT_OK)
        self.assertEqual(exit_code_for(InfeasibleError("x")), EXIT_INFEASIBLE)
        for err in (ConfigurationError("x"), DomainError("x"), BudgetError("x"), ModeError("x")):
            self.assertEqual(exit_code_for(err), EXIT_USAGE)
        for err in (NumericalError("x"), BracketError("x"), UnboundedError("x")):
            self.assertEqual(exit_code_for(err), EXIT_NUMERICAL)
        self.assertEqual((EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERICAL), (0, 2, 3, 4))

    def test_load_json_config(self):
        self.assertEqual(load_json_config(None), {})
        with open(self._path("ok.json"), "w") as fp:
            json.dump({"params": {"alpha": 0.8}}, fp)
        self.assertEqual(load_json_config(self._path("ok.json")), {"params": {"alpha": 0.8}})

        with open(self._path("bad.json"), "w") as fp:
            fp.write("{\"params\": ")
        with self.assertRaises(ConfigurationError):
            load_json_config(self._path("bad.json"))
        with open(self._path("list.json"), "w") as fp:
            fp.write("[1, 2]")
        with self.assertRaises(ConfigurationError):
            load_json_config(self._path("list.json"))
        with self.assertRaises(ConfigurationError):
            load_json_config(self._path("missing.json"))

    def test_write_json(self):
        text = write_json({"kappa": [1.0, 0.5]}, self._path("out.json"))
        with open(self._path("out.json")) as fp:
            self.assertEqual(json.load(fp), {"kappa": [1.0, 0.5]})
        self.assertEqual(json.loads(text), {"kappa": [1.0, 0.5]})

    def test_metadata_line(self):
        self.assertEqual(metadata_line(seed=7, command="sweep"),
                         f"# tool=arq-access version={VERSION} seed=7 command=sweep")
        self.assertNotIn("seed", metadata_line())

    def test_csv_with_metadata(self):
        df = pd.DataFrame({"value": [0.0, 0.1], "w_s": [0.2, 1.0 / 3.0]})
        text = write_csv(df, self._path("sweep.csv"), seed=42, variable="epsilon")
        self.assertTrue(text.startswith("# tool=arq-access"))
        self.assertEqual(text, write_csv(df, self._path("again.csv"), seed=42, variable="epsilon"))
        header, back = read_csv_with_metadata(self._path("sweep.csv"))
        self.assertIn("variable=epsilon", header)
        self.assertEqual(list(back.columns), ["value", "w_s"])
        self.assertAlmostEqual(back["w_s"].iloc[1], 1.0 / 3.0, delta=1e-10)

    def test_flatten_row(self):
        row = flatten_row({"kappa": [1.0, 0.5], "stderr": {"w_p": 0.1}, "seed": 3})
        self.assertEqual(row, {"kappa_0": 1.0, "kappa_1": 0.5, "stderr_w_p": 0.1, "seed": 3})
        self.assertEqual(flatten_row({"a": {"b": {"c": 1}}}), {"a_b_c": 1})

    def test_finite_difference(self):
        square = lambda x: x[0] ** 2 + x[1]
        self.assertAlmostEqual(finite_difference(square, [0.5, 0.2], 0), 1.0, delta=1e-8)
        self.assertAlmostEqual(finite_difference(square, [0.0, 0.2], 0), 0.0, delta=1e-8)
        self.assertAlmostEqual(finite_difference(square, [1.0, 0.2], 0), 2.0, delta=1e-8)
        self.assertAlmostEqual(finite_difference(square, [1.0, 1.0], 1), 1.0, delta=1e-8)

    def test_relative_error(self):
        self.assertAlmostEqual(relative_error(1.1, 1.0), 0.1, delta=1e-12)
        self.assertAlmostEqual(relative_error(1e-13, 0.0, floor=1e-12), 0.1, delta=1e-12)
        self.assertTrue(math.isclose(relative_error(-2.0, -1.0), 1.0))


if __name__ == "__main__":
    unittest.main()
