"""Command-line front end.

Exit codes: 0 valid or success, 1 countermodel, 2 exhausted, 3 inconsistent
theory, 4 exhaustion in strict mode, 64 usage error, 65 data error, 66
missing input file.
"""
import json
import logging
import sys

import click

from kripkeforge import main as pipeline
from kripkeforge import semantics
from kripkeforge import storage
from kripkeforge.fkd import representing_formula, to_dot as fkd_to_dot
from kripkeforge.henkin import (
    DEFAULT_PLACEMENT,
    PLACEMENTS,
    HenkinConfig,
    InconsistentTheory,
    QueryBudgetExceeded,
)
from kripkeforge.oracle import (
    OracleExhausted,
    SearchBounds,
    SignatureMismatchError,
    Verdict,
    is_valid,
)
from kripkeforge.syntax import (
    ArityError,
    FormulaSyntaxError,
    UnknownSymbolError,
    index_of,
    normalize,
    parse,
    to_text,
)

EXIT_OK = 0
EXIT_COUNTERMODEL = 1
EXIT_EXHAUSTED = 2
EXIT_INCONSISTENT = 3
EXIT_STRICT = 4
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NO_INPUT = 66

_VERDICT_EXIT = {
    Verdict.VALID: EXIT_OK,
    Verdict.COUNTERMODEL: EXIT_COUNTERMODEL,
    Verdict.EXHAUSTED: EXIT_EXHAUSTED,
}


def _bound_options(f):
    f = click.option('--max-prefix', type=click.IntRange(min=0), default=None,
                     help='Longest lasso prefix searched (default: derived).')(f)
    f = click.option('--max-loop', type=click.IntRange(min=1), default=None,
                     help='Longest lasso loop searched (default: derived).')(f)
    f = click.option('--max-domain', type=click.IntRange(min=1), default=2, show_default=True,
                     help='Largest domain searched.')(f)
    f = click.option('--strict', is_flag=True,
                     help='Fail with exit 4 when the search cannot certify validity.')(f)
    f = click.option('--assume-bound-complete', is_flag=True,
                     help='Accept the domain bound as complete for quantified input.')(f)
    return f


def _construction_options(f):
    f = click.option('--placement', type=click.Choice(PLACEMENTS), default=DEFAULT_PLACEMENT,
                     show_default=True, help='Candidate order of diamond stages.')(f)
    f = click.option('--append-every', type=click.IntRange(min=1), default=4, show_default=True,
                     help='Append an empty world every K no-op stages.')(f)
    return f


def _bounds(kwargs):
    return SearchBounds(kwargs['max_prefix'], kwargs['max_loop'], kwargs['max_domain'])


def _config(kwargs):
    return HenkinConfig(
        placement=kwargs['placement'],
        append_every=kwargs['append_every'],
        strict=kwargs['strict'],
        assume_bound_complete=kwargs['assume_bound_complete'],
    )


def _echo_json(document):
    click.echo(json.dumps(document, indent=2))


@click.group()
@click.option('-v', '--verbose', count=True, help='-v for progress, -vv for search details.')
def cli(verbose):
    """Decide and build discrete linear Kripke models."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')


@cli.command('parse')
@click.option('-t', '--theory', 'theory_path', required=True, type=click.Path())
@click.option('-f', '--formula', required=True)
def cmd_parse(theory_path, formula):
    """Print a formula in canonical form with its enumeration index."""
    sig = storage.load_theory(theory_path).signature
    f = parse(formula, sig)
    click.echo(to_text(f))
    click.echo(f'normal form: {to_text(normalize(f))}')
    click.echo(f'index: {index_of(sig, f)}')
    return EXIT_OK


@cli.command('decide')
@click.option('-t', '--theory', 'theory_path', required=True, type=click.Path())
@click.option('-f', '--formula', required=True)
@_bound_options
def cmd_decide(theory_path, formula, **kwargs):
    """Decide whether the theory entails FORMULA on discrete linear frames."""
    verdict = pipeline.decide(theory_path, formula, _bounds(kwargs), kwargs['assume_bound_complete'])
    if verdict.status == Verdict.EXHAUSTED and kwargs['strict']:
        is_valid(verdict, strict=True)
    _echo_json(storage.verdict_to_dict(verdict))
    return _VERDICT_EXIT[verdict.status]


@cli.command('psi')
@click.option('-t', '--theory', 'theory_path', required=True, type=click.Path())
@click.option('-d', '--fkd', 'fkd_path', required=True, type=click.Path())
def cmd_psi(theory_path, fkd_path):
    """Print the representing formula of a diagram."""
    sig = storage.load_theory(theory_path).signature
    d = storage.fkd_from_dict(sig, storage.read_json(fkd_path))
    click.echo(to_text(representing_formula(d)))
    return EXIT_OK


@cli.command('consistent')
@click.option('-t', '--theory', 'theory_path', required=True, type=click.Path())
@click.option('-d', '--fkd', 'fkd_path', required=True, type=click.Path())
@_bound_options
def cmd_consistent(theory_path, fkd_path, **kwargs):
    """Print whether a diagram is consistent with the theory."""
    verdict = pipeline.check_consistency(theory_path, fkd_path, _bounds(kwargs),
                                         kwargs['assume_bound_complete'])
    consistent = not is_valid(verdict, kwargs['strict'])
    click.echo('true' if consistent else 'false')
    return EXIT_OK


@cli.command('construct')
@click.option('-t', '--theory', 'theory_path', required=True, type=click.Path())
@click.option('-n', '--stages', type=click.IntRange(min=0), default=100, show_default=True)
@click.option('--fkd-out', type=click.Path(), default=None, help='Final diagram JSON.')
@click.option('--trace-out', type=click.Path(), default=None, help='Stage trace JSON lines.')
@click.option('--overwrite', is_flag=True)
@_construction_options
@_bound_options
def cmd_construct(theory_path, stages, fkd_out, trace_out, overwrite, **kwargs):
    """Run the construction for a number of scheduled stages."""
    model = pipeline.construct(theory_path, stages, fkd_out, trace_out, _bounds(kwargs),
                               _config(kwargs), overwrite=overwrite)
    if fkd_out is None:
        _echo_json(storage.fkd_to_dict(model.fkd))
    click.echo(f'{stages} stages, {len(model.fkd.worlds)} worlds', err=True)
    return EXIT_OK


@cli.command('query')
@click.option('-t', '--theory', 'theory_path', required=True, type=click.Path())
@click.option('--trace', 'trace_path', required=True, type=click.Path(),
              help='Stage cache; created when missing and extended by the query.')
@click.option('-w', '--world', type=click.IntRange(min=0), required=True)
@click.option('-f', '--formula', required=True)
@_construction_options
@_bound_options
def cmd_query(theory_path, trace_path, world, formula, **kwargs):
    """Print whether FORMULA holds at a world of the constructed model."""
    answer = pipeline.query(theory_path, trace_path, world, formula, _bounds(kwargs),
                            _config(kwargs))
    click.echo('true' if answer else 'false')
    return EXIT_OK


@cli.command('export')
@click.option('-t', '--theory', 'theory_path', required=True, type=click.Path())
@click.option('--fkd', 'fkd_path', type=click.Path(), default=None)
@click.option('--lasso', 'lasso_path', type=click.Path(), default=None)
@click.option('--kripke', 'kripke_path', type=click.Path(), default=None)
@click.option('--format', 'fmt', type=click.Choice(['dot']), default='dot', show_default=True)
@click.option('-o', '--output', type=click.Path(), default=None)
def cmd_export(theory_path, fkd_path, lasso_path, kripke_path, fmt, output):
    """Render a diagram, a lasso or a Kripke model as graphviz dot."""
    given = [p for p in (fkd_path, lasso_path, kripke_path) if p is not None]
    if len(given) != 1:
        raise click.UsageError('Give exactly one of --fkd, --lasso, --kripke')
    sig = storage.load_theory(theory_path).signature
    document = storage.read_json(given[0])
    if fkd_path is not None:
        lines = fkd_to_dot(storage.fkd_from_dict(sig, document))
    elif lasso_path is not None:
        lines = semantics.to_dot(storage.lasso_from_dict(sig, document))
    else:
        lines = semantics.to_dot(storage.kripke_from_dict(sig, document))
    text = ''.join(lines)
    if output is None:
        click.echo(text, nl=False)
    else:
        with open(output, 'w') as f:
            f.write(text)
    return EXIT_OK


def main(argv=None):
    """Run the command line and return its exit code."""
    try:
        code = cli.main(args=argv, prog_name='kripkeforge', standalone_mode=False)
    except click.UsageError as e:
        click.echo(f'Usage error: {e.format_message()}', err=True)
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError) as e:
        click.echo(f'Missing input: {e}', err=True)
        return EXIT_NO_INPUT
    except FileExistsError as e:
        click.echo(f'{e}; pass --overwrite to replace it', err=True)
        return EXIT_USAGE
    except InconsistentTheory as e:
        click.echo(f'Inconsistent theory: {e}', err=True)
        return EXIT_INCONSISTENT
    except OracleExhausted as e:
        click.echo(f'Strict mode: {e}', err=True)
        return EXIT_STRICT
    except QueryBudgetExceeded as e:
        click.echo(str(e), err=True)
        return EXIT_EXHAUSTED
    except (FormulaSyntaxError, UnknownSymbolError, ArityError, SignatureMismatchError) as e:
        click.echo(f'Bad formula: {e}', err=True)
        return EXIT_USAGE
    except ValueError as e:
        click.echo(f'Bad input data: {e}', err=True)
        return EXIT_DATA
    return code if isinstance(code, int) else EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
