from .fixtures import BOX_P_THEORY, EMPTY_THEORY_PQ, INCONSISTENT_THEORY, _write_json

import json

import pytest

from kripkeforge.cli import *

FO_THEORY = {
    'signature': {'predicates': [{'name': 'P', 'arity': 1}], 'constants': ['a']},
    'axioms': [],
}


@pytest.fixture
def theories(tmp_path):
    paths = {}
    for name, document in [('empty', EMPTY_THEORY_PQ), ('box', BOX_P_THEORY),
                           ('inconsistent', INCONSISTENT_THEORY), ('fo', FO_THEORY)]:
        path = str(tmp_path / f'{name}.json')
        _write_json(path, document)
        paths[name] = path
    return paths


def _read(path):
    with open(path) as fh:
        return fh.read()


def test_decide_valid(theories, capsys):
    # Act
    code = main(['decide', '-t', theories['empty'], '-f', '[]p -> p'])
    # Assert
    assert code == EXIT_OK
    assert json.loads(capsys.readouterr().out)['status'] == 'valid'


def test_decide_countermodel(theories, capsys):
    # Act
    code = main(['decide', '-t', theories['empty'], '-f', 'p'])
    # Assert
    verdict = json.loads(capsys.readouterr().out)
    assert code == EXIT_COUNTERMODEL
    assert verdict['status'] == 'countermodel'
    assert verdict['model']['loop'] == [{'facts': []}]


def test_decide_malformed_formula(theories):
    assert main(['decide', '-t', theories['empty'], '-f', '[](p ->']) == EXIT_USAGE


def test_decide_unknown_symbol(theories):
    assert main(['decide', '-t', theories['empty'], '-f', 'r']) == EXIT_USAGE


def test_decide_missing_theory(tmp_path):
    assert main(['decide', '-t', str(tmp_path / 'nope.json'), '-f', 'p']) == EXIT_NO_INPUT


def test_decide_bad_theory_document(tmp_path):
    # Arrange
    path = str(tmp_path / 'bad.json')
    _write_json(path, {'axioms': ['p']})
    # Act & Assert
    assert main(['decide', '-t', path, '-f', 'p']) == EXIT_DATA


def test_decide_quantified_exhausted(theories, capsys):
    """Test the exit codes of an uncertified first-order entailment."""
    # Arrange
    args = ['decide', '-t', theories['fo'], '-f', '(forall x. P(x)) -> P(a)']
    # Act
    plain = main(args)
    strict = main(args + ['--strict'])
    assumed = main(args + ['--assume-bound-complete'])
    # Assert
    assert plain == EXIT_EXHAUSTED
    assert strict == EXIT_STRICT
    assert assumed == EXIT_OK


def test_decide_missing_option(theories):
    assert main(['decide', '-t', theories['empty']]) == EXIT_USAGE


def test_parse_command(theories, capsys):
    # Act
    code = main(['parse', '-t', theories['empty'], '-f', '<>q'])
    # Assert
    out = capsys.readouterr().out.splitlines()
    assert code == EXIT_OK
    assert out == ['<>q', 'normal form: <>q', 'index: 7']


def test_construct_writes_artifacts(theories, tmp_path):
    # Arrange
    fkd_path = str(tmp_path / 'fkd.json')
    trace_path = str(tmp_path / 'trace.jsonl')
    # Act
    code = main(['construct', '-t', theories['empty'], '--stages', '100',
                 '--fkd-out', fkd_path, '--trace-out', trace_path])
    # Assert
    assert code == EXIT_OK
    assert len(_read(trace_path).splitlines()) == 100
    assert 'worlds' in json.loads(_read(fkd_path))


def test_construct_is_deterministic(theories, tmp_path):
    # Arrange
    outputs = []
    # Act
    for run_name in ('first', 'second'):
        fkd_path = str(tmp_path / f'{run_name}.json')
        trace_path = str(tmp_path / f'{run_name}.jsonl')
        main(['construct', '-t', theories['box'], '-n', '40',
              '--fkd-out', fkd_path, '--trace-out', trace_path])
        outputs.append((_read(fkd_path), _read(trace_path)))
    # Assert
    assert outputs[0] == outputs[1]


def test_construct_prints_diagram_without_output_file(theories, capsys):
    # Act
    code = main(['construct', '-t', theories['empty'], '-n', '5'])
    # Assert
    captured = capsys.readouterr()
    assert code == EXIT_OK
    assert json.loads(captured.out)['schema_version'] == 1
    assert '5 stages' in captured.err


def test_construct_inconsistent_theory(theories):
    assert main(['construct', '-t', theories['inconsistent'], '-n', '5']) == EXIT_INCONSISTENT


def test_construct_refuses_overwrite(theories, tmp_path):
    # Arrange
    fkd_path = str(tmp_path / 'fkd.json')
    args = ['construct', '-t', theories['empty'], '-n', '3', '--fkd-out', fkd_path]
    main(args)
    # Act & Assert
    assert main(args) == EXIT_USAGE
    assert main(args + ['--overwrite']) == EXIT_OK


def test_query_true(theories, tmp_path, capsys):
    # Arrange
    trace_path = str(tmp_path / 'trace.jsonl')
    # Act
    code = main(['query', '-t', theories['empty'], '--trace', trace_path, '-w', '0', '-f', 'true'])
    # Assert
    assert code == EXIT_OK
    assert capsys.readouterr().out.strip() == 'true'


def test_query_sentence_and_negation(theories, tmp_path, capsys):
    """Test that a sentence and its negation get opposite answers and the cache persists."""
    # Arrange
    trace_path = str(tmp_path / 'trace.jsonl')
    main(['construct', '-t', theories['empty'], '-n', '30', '--trace-out', trace_path,
          '--fkd-out', str(tmp_path / 'fkd.json')])
    before = len(_read(trace_path).splitlines())
    capsys.readouterr()
    # Act
    main(['query', '-t', theories['empty'], '--trace', trace_path, '-w', '0', '-f', '<>p'])
    main(['query', '-t', theories['empty'], '--trace', trace_path, '-w', '0', '-f', '~<>p'])
    # Assert
    answers = capsys.readouterr().out.split()
    assert sorted(answers) == ['false', 'true']
    assert len(_read(trace_path).splitlines()) >= before


def test_query_axiom_at_later_world(theories, tmp_path, capsys):
    # Arrange
    trace_path = str(tmp_path / 'trace.jsonl')
    # Act
    main(['query', '-t', theories['box'], '--trace', trace_path, '-w', '2', '-f', '[]p'])
    # Assert
    assert capsys.readouterr().out.strip() == 'true'


def test_psi_and_consistent(theories, tmp_path, capsys):
    # Arrange
    fkd_path = str(tmp_path / 'fkd.json')
    _write_json(fkd_path, {'worlds': [{'id': 0, 'sentences': ['p']}, {'id': 1, 'sentences': ['q']}],
                           'relation': [[0, 1]]})
    # Act
    main(['psi', '-t', theories['empty'], '-d', fkd_path])
    main(['consistent', '-t', theories['empty'], '-d', fkd_path])
    main(['consistent', '-t', theories['box'], '-d', fkd_path])
    # Assert
    assert capsys.readouterr().out.split('\n')[:3] == ['p & <>q', 'true', 'true']


def test_export_dot(theories, tmp_path, capsys):
    # Arrange
    lasso_path = str(tmp_path / 'lasso.json')
    _write_json(lasso_path, {'prefix': [{'facts': ['p']}], 'loop': [{'facts': ['q']}]})
    out_path = str(tmp_path / 'lasso.dot')
    # Act
    printed = main(['export', '-t', theories['empty'], '--lasso', lasso_path])
    written = main(['export', '-t', theories['empty'], '--lasso', lasso_path, '-o', out_path])
    # Assert
    assert printed == written == EXIT_OK
    assert capsys.readouterr().out.startswith('digraph "model" {')
    assert 'style=dashed' in _read(out_path)


def test_export_needs_one_source(theories):
    assert main(['export', '-t', theories['empty']]) == EXIT_USAGE


@pytest.mark.parametrize('placement', ['paper', 'conservative'])
def test_construct_placement_option(theories, tmp_path, placement):
    # Arrange
    trace_path = str(tmp_path / 'trace.jsonl')
    # Act
    code = main(['construct', '-t', theories['empty'], '-n', '20', '--placement', placement,
                 '--trace-out', trace_path])
    # Assert
    assert code == EXIT_OK
    records = [json.loads(line) for line in _read(trace_path).splitlines()]
    assert {r['placement'] for r in records} == {placement}


def test_construct_rejects_unknown_placement(theories):
    assert main(['construct', '-t', theories['empty'], '-n', '2', '--placement', 'random']) == EXIT_USAGE
