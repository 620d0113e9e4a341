import json
import os
import tempfile
import unittest
from unittest import mock

from constants import (EPSILON_SWEEP_PARAMS, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, REFERENCE_EPSILON, REFERENCE_KAPPA_1,
                       REFERENCE_PARAMS)
from run_optimiser import main
from utils import read_csv_with_metadata

REFERENCE_CONFIG = {
    "params": REFERENCE_PARAMS,
    "constraint": {"metric": "throughput", "epsilon": REFERENCE_EPSILON},
}

SWEEP_CONFIG = {
    "params": EPSILON_SWEEP_PARAMS,
    "constraint": {"metric": "throughput", "epsilon": 0.0},
    "sweep": {"variable": "epsilon", "from": 0.0, "to": 0.2, "steps": 9},
}

BUDGET_CONFIG = {
    "link_budget": {
        "r_p": 3.0, "r_s": 1.0, "p_p": 10.0, "p_s": 10.0,
        "gbar_pp": 1.0, "gbar_ps": 0.1, "gbar_ss": 1.0, "gbar_sp": 0.1,
    },
    "fading": "deterministic",
}


class TestRunOptimiser(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _path(self, name):
        return os.path.join(self.tmp.name, name)

    def _config(self, config, name="config.json"):
        path = self._path(name)
        with open(path, "w") as fp:
            json.dump(config, fp)
        return path

    def _read_json(self, name):
        with open(self._path(name)) as fp:
            return json.load(fp)

    def test_optimize_reference(self):
        code = main(["optimize", "-c", self._config(REFERENCE_CONFIG), "-o", self._path("opt.json")])
        self.assertEqual(code, EXIT_OK)
        out = self._read_json("opt.json")
        self.assertEqual(out["method"], "lp")
        self.assertAlmostEqual(out["kappa"][1], REFERENCE_KAPPA_1, delta=1e-4)
        self.assertLess(out["self_check_gap"], 1e-6)

    def test_flags_override_config(self):
        code = main(["optimize", "-c", self._config(REFERENCE_CONFIG), "-s", "vertical", "-e", "0.0",
                     "-o", self._path("opt.json")])
        self.assertEqual(code, EXIT_OK)
        out = self._read_json("opt.json")
        self.assertEqual(out["method"], "vertical")
        self.assertEqual(out["kappa"], [1.0, 0.0, 0.0])

    def test_analyze(self):
        code = main(["analyze", "-c", self._config(REFERENCE_CONFIG), "-p", "1,0,0", "-o", self._path("a.json")])
        self.assertEqual(code, EXIT_OK)
        out = self._read_json("a.json")
        for got, expected in zip(out["pi"], [0.161290, 0.645161, 0.193548]):
            self.assertAlmostEqual(got, expected, delta=1e-6)
        self.assertAlmostEqual(out["j_p"], 0.412903, delta=1e-6)

    def test_usage_errors(self):
        bad = self._path("bad.json")
        with open(bad, "w") as fp:
            fp.write("{\"params\": ")
        self.assertEqual(main(["optimize", "-c", bad]), EXIT_USAGE)
        self.assertEqual(main(["optimize", "--no-such-flag"]), EXIT_USAGE)
        self.assertEqual(main(["optimize"]), EXIT_USAGE)
        self.assertEqual(main(["analyze", "-c", self._config(REFERENCE_CONFIG), "-p", "1,0"]), EXIT_USAGE)
        unknown = dict(SWEEP_CONFIG, sweep={"variable": "gamma", "from": 0.0, "to": 1.0, "steps": 3})
        self.assertEqual(main(["sweep", "-c", self._config(unknown)]), EXIT_USAGE)

    def test_sweep_csv_is_reproducible(self):
        path = self._config(SWEEP_CONFIG)
        self.assertEqual(main(["sweep", "-c", path, "-o", self._path("one.csv")]), EXIT_OK)
        self.assertEqual(main(["sweep", "-c", path, "-o", self._path("two.csv")]), EXIT_OK)
        self.assertEqual(main(["sweep", "-c", path, "-w", "2", "-o", self._path("pool.csv")]), EXIT_OK)
        with open(self._path("one.csv")) as fp:
            one = fp.read()
        for other in ("two.csv", "pool.csv"):
            with open(self._path(other)) as fp:
                self.assertEqual(fp.read(), one)

        header, df = read_csv_with_metadata(self._path("one.csv"))
        self.assertTrue(header.startswith("# tool=arq-access"))
        self.assertEqual(len(df), 9)
        self.assertEqual(list(df["value"]), sorted(df["value"]))
        self.assertTrue((df["kappa_0"] == 1.0).all())
        self.assertTrue((df["w_s"].diff().dropna() >= -1e-9).all())

    def test_phy(self):
        code = main(["phy", "-c", self._config(BUDGET_CONFIG), "-o", self._path("phy.json")])
        self.assertEqual(code, EXIT_OK)
        out = self._read_json("phy.json")
        self.assertEqual((out["rho"], out["rho_star"]), (0.0, 1.0))
        self.assertEqual(out["lambda"], 1.0)
        self.assertEqual(main(["phy", "-c", self._config(REFERENCE_CONFIG)]), EXIT_USAGE)

    def test_simulate_validates(self):
        args = ["simulate", "-c", self._config(REFERENCE_CONFIG), "--slots", "100000", "--seed", "42",
                "--validate"]
        self.assertEqual(main(args + ["-o", self._path("one.json")]), EXIT_OK)
        self.assertEqual(main(args + ["-o", self._path("two.json")]), EXIT_OK)
        one, two = self._read_json("one.json"), self._read_json("two.json")
        self.assertEqual(one, two)
        self.assertEqual(one["slots_counted"], 100000 - 1000)
        self.assertAlmostEqual(one["kappa"][1], REFERENCE_KAPPA_1, delta=1e-4)

    def test_simulate_trace(self):
        args = ["simulate", "-c", self._config(REFERENCE_CONFIG), "-p", "1,0.5,0", "--slots", "2000",
                "--trace", self._path("trace.csv"), "-o", self._path("sim.json")]
        self.assertEqual(main(args), EXIT_OK)
        header, df = read_csv_with_metadata(self._path("trace.csv"))
        self.assertIn("command=trace", header)
        self.assertEqual(len(df), 1000)

    def test_malformed_values_are_usage_errors(self):
        bad_epsilon = dict(REFERENCE_CONFIG, constraint={"metric": "throughput", "epsilon": "abc"})
        self.assertEqual(main(["optimize", "-c", self._config(bad_epsilon)]), EXIT_USAGE)
        self.assertEqual(main(["optimize", "-c", self._config(dict(REFERENCE_CONFIG, params=[0.8, 0.3]))]),
                         EXIT_USAGE)
        self.assertEqual(main(["optimize", "-c", self._config(dict(REFERENCE_CONFIG, constraint=[0.1]))]),
                         EXIT_USAGE)
        self.assertEqual(main(["simulate", "-c", self._config(dict(REFERENCE_CONFIG, sim={"n_slots": "many"}))]),
                         EXIT_USAGE)
        self.assertEqual(main(["analyze", "-c", self._config(dict(REFERENCE_CONFIG, policy=["a", 0, 0]))]),
                         EXIT_USAGE)
        self.assertEqual(main(["phy", "-c", self._config({"link_budget": [1.0, 2.0]})]), EXIT_USAGE)

    def test_unexpected_failure_is_numerical(self):
        with mock.patch("run_optimiser.cmd_optimize", side_effect=ZeroDivisionError("boom")):
            self.assertEqual(main(["optimize", "-c", self._config(REFERENCE_CONFIG)]), EXIT_NUMERICAL)

    def test_dump_lp(self):
        code = main(["optimize", "-c", self._config(REFERENCE_CONFIG), "--dump-lp", self._path("lp.txt"),
                     "-o", self._path("opt.json")])
        self.assertEqual(code, EXIT_OK)
        with open(self._path("lp.txt")) as fp:
            lines = fp.read().splitlines()
        self.assertEqual(lines[0], "max")
        self.assertEqual(lines[-1], "end")
        self.assertTrue(lines[1].startswith("# "))
        # objective, 3 balance rows, the cost row and the fixed kappa_0 row
        self.assertEqual(len(lines), 9)
        self.assertEqual(len(lines[2].split()), 6)
        self.assertEqual(sum(" <= " in line for line in lines), 1)

    def test_simulate_csv(self):
        args = ["simulate", "-c", self._config(REFERENCE_CONFIG), "-p", "1,0.5,0", "--slots", "2000", "-f", "csv",
                "-o", self._path("sim.csv")]
        self.assertEqual(main(args), EXIT_OK)
        header, df = read_csv_with_metadata(self._path("sim.csv"))
        self.assertIn("command=simulate", header)
        self.assertEqual(len(df), 1)
        self.assertEqual(df["slots_counted"][0], 1000)
        self.assertEqual(df["kappa_1"][0], 0.5)
        self.assertIn("analytic_w_s", df.columns)
        self.assertIn("pi_2", df.columns)

    def test_num_tx_manifests(self):
        experiments = os.path.join(os.path.dirname(os.path.abspath(__file__)), "experiments")
        for lam, name in ((0.3, "num_tx_vs_alpha.json"), (0.9, "num_tx_vs_alpha_lambda_0.9.json")):
            path = os.path.join(experiments, name)
            with open(path) as fp:
                config = json.load(fp)
            self.assertEqual(config["constraint"], {"metric": "throughput", "epsilon": 0.1})
            self.assertEqual(config["params"]["lambda"], lam)
            self.assertEqual(main(["sweep", "-c", path, "-o", self._path(f"{lam}.csv")]), EXIT_OK)
            header, df = read_csv_with_metadata(self._path(f"{lam}.csv"))
            self.assertIn("metric=throughput", header)
            self.assertEqual(len(df), 19)
            self.assertTrue((df["j_ntx"] >= 1.0).all())
            self.assertTrue((df["delta"] <= df["sigma"] + 1e-9).all())

    def test_verify(self):
        self.assertEqual(main(["verify", "-n", "20", "-o", self._path("verify.json")]), EXIT_OK)
        self.assertTrue(self._read_json("verify.json")["passed"])


if __name__ == "__main__":
    unittest.main()
