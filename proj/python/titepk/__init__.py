"""TITE-PK dose finding: PK exposure model, comparators, simulation and the trial service."""

import json
import os

from . import _core
from ._core import ConfigurationError, DataError, InvalidInput, pk_profile, skeleton

__all__ = [
    "ConfigurationError",
    "DataError",
    "InvalidInput",
    "TrialService",
    "analyze",
    "default_config",
    "pk_profile",
    "read_dataset",
    "schemas",
    "simulate",
    "skeleton",
]


def _load(x):
    """dict, JSON text, or a path to a JSON file."""
    if isinstance(x, os.PathLike) or (isinstance(x, str) and not x.lstrip().startswith(("{", "["))):
        with open(x) as f:
            return json.load(f)
    return json.loads(x) if isinstance(x, str) else x


def read_dataset(path):
    """Patient CSV -> list of dicts; DataError names the bad line."""
    return json.loads(_core.read_dataset(str(path)))


def default_config():
    return json.loads(_core.default_config())


def schemas():
    return json.loads(_core.schemas())


def analyze(config, patients, method="titepk", strata="single", schedule=""):
    """config: dict or path to JSON; patients: list of dicts or CSV path."""
    if isinstance(patients, (str, os.PathLike)):
        patients = read_dataset(patients)
    return json.loads(_core.analyze(json.dumps(_load(config)), json.dumps(patients), method, strata, schedule))


def simulate(scenario_file, scenario, method="titepk", mode="exposure-inverse", reps=100, seed=1, threads=0):
    return json.loads(
        _core.simulate(json.dumps(_load(scenario_file)), str(scenario), method, mode, reps, seed, threads))


class TrialService:
    """In-process service; same routes and replies as the HTTP server."""

    def __init__(self, log_dir="", token=""):
        self._s = _core.TrialService(log_dir, token)

    def request(self, method, path, body=None, authorization=""):
        raw = "" if body is None else (body if isinstance(body, str) else json.dumps(body))
        status, reply = self._s.handle(method, path, raw, authorization)
        return status, json.loads(reply)

    def snapshot(self):
        self._s.snapshot()

    @property
    def sessions(self):
        return self._s.sessions
