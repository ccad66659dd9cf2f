#!/usr/bin/env python
# -*- coding: utf-8 -*-

import json
import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

from utils.config_manager import apply_overrides, get_float, get_int, load_config, merge_config
from utils.errors import ConfigurationError

PROJECT_ROOT = Path(__file__).resolve().parents[1]
PYTHON_EXECUTABLE = sys.executable


def run_python_snippet(snippet: str, env: dict) -> subprocess.CompletedProcess:
    return subprocess.run(
        [PYTHON_EXECUTABLE, "-c", snippet],
        cwd=PROJECT_ROOT,
        env=env,
        capture_output=True,
        text=True,
        encoding="utf-8",
        check=True,
    )


class ConfigManagerTests(unittest.TestCase):
    def test_defaults_come_from_template(self):
        config = load_config(use_user_config=False)
        self.assertEqual(0.01, config["process_noise"]["sigma_va"])
        self.assertEqual(50.0, config["segmentation"]["sigma_len"])
        self.assertIsNone(config["unscented"]["kappa"])

    def test_overrides_are_parsed_as_json(self):
        config = apply_overrides(load_config(use_user_config=False),
                                 ["likelihood.sigma_lik=0.7", "prediction.use_filter=false"])
        self.assertEqual(0.7, config["likelihood"]["sigma_lik"])
        self.assertIs(False, config["prediction"]["use_filter"])

    def test_overrides_do_not_touch_input(self):
        base = load_config(use_user_config=False)
        apply_overrides(base, ["likelihood.sigma_lik=0.7"])
        self.assertEqual(0.1, base["likelihood"]["sigma_lik"])

    def test_unknown_keys_rejected(self):
        config = load_config(use_user_config=False)
        with self.assertRaises(ConfigurationError):
            apply_overrides(config, ["likelihood.sigma=0.7"])
        with self.assertRaises(ConfigurationError):
            merge_config(config, {"plotting": {}})
        with self.assertRaises(ConfigurationError):
            apply_overrides(config, ["sigma_lik"])

    def test_typed_getters_validate(self):
        config = apply_overrides(load_config(use_user_config=False),
                                 ["likelihood.sigma_lik=-1", "segmentation.min_len=\"x\""])
        with self.assertRaises(ConfigurationError):
            get_float(config, "likelihood", "sigma_lik", strictly_positive=True)
        with self.assertRaises(ConfigurationError):
            get_int(config, "segmentation", "min_len")

    def test_config_file_is_merged(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.json"
            path.write_text(json.dumps({"geometry": {"ring_radius": 20.0}}), encoding="utf-8")
            config = load_config(str(path), use_user_config=False)
            self.assertEqual(20.0, config["geometry"]["ring_radius"])
            self.assertEqual(80.0, config["geometry"]["leg_length"])

    def test_missing_or_malformed_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                load_config(str(Path(tmp) / "absent.json"), use_user_config=False)
            broken = Path(tmp) / "broken.json"
            broken.write_text("{not json", encoding="utf-8")
            with self.assertRaises(ConfigurationError):
                load_config(str(broken), use_user_config=False)

    def test_user_config_from_data_dir(self):
        with tempfile.TemporaryDirectory() as user_dir:
            Path(user_dir, "config.json").write_text(
                json.dumps({"measurement_noise": {"sigma_nx": 0.5}}), encoding="utf-8"
            )
            env = os.environ.copy()
            env["ROUNDABOUT_USER_DATA_DIR"] = user_dir
            env["PYTHONIOENCODING"] = "utf-8"

            snippet = """
import json
from utils.config_manager import load_config
from utils.path_utils import get_user_config_path
config = load_config()
print(json.dumps(config["measurement_noise"]))
print(get_user_config_path())
"""
            result = run_python_snippet(snippet, env)
            lines = [line for line in result.stdout.splitlines() if line.strip()]
            self.assertEqual(0.5, json.loads(lines[0])["sigma_nx"])
            self.assertEqual(0.25, json.loads(lines[0])["sigma_ny"])
            self.assertTrue(Path(lines[1]).parent.samefile(user_dir))
            self.assertTrue(Path(user_dir, "logs").is_dir())


if __name__ == "__main__":
    unittest.main()
