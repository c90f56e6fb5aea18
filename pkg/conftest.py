"""Shared fixtures for the test suite."""

import os

import pytest

from config import VqeConfig
from lattice import CouplingModel, build_hamiltonian, build_lattice


def pytest_collection_modifyitems(config, items):
    if os.environ.get("VQE_LONG_TESTS") == "1":
        return
    skip_long = pytest.mark.skip(reason="set VQE_LONG_TESTS=1 to run long tests")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip_long)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Run output goes to a per-test directory."""
    path = tmp_path / "runs"
    monkeypatch.setenv("VQE_OUTPUT_DIR", str(path))
    return path


@pytest.fixture
def make_config(output_dir):
    def factory(**overrides) -> VqeConfig:
        values = {"output_dir": str(output_dir), "max_evals": 500}
        values.update(overrides)
        return VqeConfig.from_dict(values)

    return factory


@pytest.fixture
def ring4():
    return build_hamiltonian(build_lattice("ring", [4]))


def heisenberg(kind, dims, boundary=None, seed=None):
    model = CouplingModel("random", seed) if seed is not None else CouplingModel()
    return build_hamiltonian(build_lattice(kind, dims, boundary), model)
