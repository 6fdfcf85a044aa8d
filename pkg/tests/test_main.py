from .fixtures import EMPTY_THEORY_PQ, _write_json

import threading
import time

import pytest

from kripkeforge import henkin
from kripkeforge.main import *


@pytest.fixture
def theory_path(tmp_path):
    path = str(tmp_path / 'theory.json')
    _write_json(path, EMPTY_THEORY_PQ)
    return path


def test_query_appends_demand_stages(theory_path, tmp_path):
    # Arrange
    trace_path = str(tmp_path / 'trace.jsonl')
    construct(theory_path, 5, trace_path=trace_path)
    # Act
    answer = query(theory_path, trace_path, 3, 'p')
    # Assert
    model = load_model(theory_path, trace_path)
    assert isinstance(answer, bool)
    assert len(model.trace) > 5
    assert any(r.forced for r in model.trace)


def test_overlapping_queries_keep_trace_replayable(theory_path, tmp_path, mocker):
    """Test that two queries started together leave a trace that reloads in step order."""
    # Arrange
    trace_path = str(tmp_path / 'trace.jsonl')
    construct(theory_path, 5, trace_path=trace_path)
    query_truth = henkin.query_truth
    answered = threading.Event()

    def slow_query_truth(m, i, f):
        answer = query_truth(m, i, f)
        answered.set()
        time.sleep(0.5)
        return answer

    mocker.patch('kripkeforge.henkin.query_truth', side_effect=slow_query_truth)
    first = threading.Thread(target=query, args=(theory_path, trace_path, 3, 'p'))
    # Act
    first.start()
    answered.wait(timeout=30)
    query(theory_path, trace_path, 2, 'q')
    first.join()
    # Assert
    model = load_model(theory_path, trace_path)
    steps = [r.step for r in model.trace]
    assert steps == list(range(len(steps)))
    assert any(r.forced and r.i == 3 for r in model.trace)
    assert any(r.forced and r.i == 2 for r in model.trace)


def test_load_model_without_trace(theory_path, tmp_path):
    model = load_model(theory_path, str(tmp_path / 'missing.jsonl'))
    assert model.trace == []
    assert len(model.fkd) == 1
