import numpy as np

import pytest

from quantum_portfolio.config import deep_map, deep_merge, default_jobs, resolve_run_config, to_jsonable
from quantum_portfolio.exceptions import ConfigurationError


def test_deep_map():
    data = dict(a=1, b=[2, dict(c=3)], d=(4, 5))
    doubled = deep_map(lambda v: (v * 2, False) if isinstance(v, int) else (v, True), data)
    assert doubled == dict(a=2, b=[4, dict(c=6)], d=[8, 10])


def test_to_jsonable():
    data = dict(a=np.arange(3), b=[np.float64(1.5), np.bool_(True)], c=dict(d=np.int32(4)))
    assert to_jsonable(data) == dict(a=[0, 1, 2], b=[1.5, True], c=dict(d=4))


def test_deep_merge():
    base = dict(a=1, solver=dict(layers=2, optimizer_parameters=dict(max_evals=10, algorithm='cobyla')))
    override = dict(a=None, solver=dict(optimizer_parameters=dict(max_evals=50)), b=3)
    merged = deep_merge(base, override)
    assert merged == dict(a=1, b=3, solver=dict(layers=2, optimizer_parameters=dict(max_evals=50,
                                                                                  algorithm='cobyla')))
    assert base['solver']['optimizer_parameters']['max_evals'] == 10


def test_flags_win_over_the_config_file():
    config = resolve_run_config('qaoa', dict(id=3, solver=dict(layers=4)),
                                dict(id=1, seed=9, solver=dict(layers=2, shots='exact')))
    assert config == dict(command='qaoa', id=3, seed=9, solver=dict(layers=4, shots='exact'))


def test_manifest_as_config_file():
    manifest = dict(schema_version=1, version='1.0', command='qite', config=dict(command='qite', seed=5))
    assert resolve_run_config('qite', {}, manifest) == dict(command='qite', seed=5)


def test_config_file_for_another_command():
    with pytest.raises(ConfigurationError):
        resolve_run_config('qaoa', {}, dict(command='gen'))
    with pytest.raises(ConfigurationError):
        resolve_run_config('qaoa', {}, [1, 2])


def test_default_jobs(monkeypatch):
    monkeypatch.delenv('QUANTUM_PORTFOLIO_JOBS', raising=False)
    assert default_jobs() == 1
    monkeypatch.setenv('QUANTUM_PORTFOLIO_JOBS', '4')
    assert default_jobs() == 4
    monkeypatch.setenv('QUANTUM_PORTFOLIO_JOBS', 'many')
    with pytest.raises(ConfigurationError):
        default_jobs()
