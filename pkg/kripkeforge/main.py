import os

from kripkeforge import fkd
from kripkeforge import henkin
from kripkeforge import oracle
from kripkeforge import storage
from kripkeforge.syntax import parse

__all__ = ['decide', 'check_consistency', 'construct', 'load_model', 'query']


def decide(theory_path, formula, bounds=None, assume_bound_complete=False):
    """Decide whether a theory file entails a formula on discrete linear frames.

    Parameters
    ----------
    theory_path : str
        Path to a theory JSON file.
    formula : str
        The sentence, in the ASCII syntax.
    bounds : SearchBounds, optional
        Oracle bounds, by default the derived ones.
    assume_bound_complete : bool, optional
        Treat the domain bound as complete for quantified input.

    Returns
    -------
    OracleVerdict
    """
    theory = storage.load_theory(theory_path)
    f = parse(formula, theory.signature)
    return oracle.entails_linear(theory, f, bounds, assume_bound_complete)


def check_consistency(theory_path, fkd_path, bounds=None, assume_bound_complete=False):
    """Oracle verdict on whether the diagram in `fkd_path` is consistent with the theory."""
    theory = storage.load_theory(theory_path)
    d = storage.fkd_from_dict(theory.signature, storage.read_json(fkd_path))
    return fkd.consistency_verdict(d, theory, bounds, assume_bound_complete)


def construct(theory_path, stages, fkd_path=None, trace_path=None, bounds=None, config=None,
              overwrite=False):
    """Run the construction and store the final diagram and the stage trace.

    Parameters
    ----------
    theory_path : str
        Path to a theory JSON file.
    stages : int
        Number of scheduled stages.
    fkd_path : str, optional
        Where the final diagram is written; skipped when None.
    trace_path : str, optional
        Where the JSON-lines trace is written; skipped when None.
    bounds : SearchBounds, optional
    config : HenkinConfig, optional
    overwrite : bool, optional
        Replace existing output files instead of raising FileExistsError.

    Returns
    -------
    ConstructedModel
    """
    theory = storage.load_theory(theory_path)
    state, trace = henkin.run(theory, stages, bounds, config)
    if fkd_path is not None:
        storage.write_json(storage.fkd_to_dict(state.fkd), fkd_path, overwrite=overwrite)
    if trace_path is not None:
        storage.write_trace(trace, trace_path, overwrite=overwrite)
    return henkin.ConstructedModel(state)


def load_model(theory_path, trace_path, bounds=None, config=None):
    """Rebuild a constructed model from its stored trace.

    A missing or empty trace starts a fresh construction from the theory.
    """
    return _load_model(theory_path, trace_path, bounds, config, lock=True)


def _load_model(theory_path, trace_path, bounds, config, lock):
    theory = storage.load_theory(theory_path)
    records = storage.read_trace(trace_path, lock=lock) if os.path.exists(trace_path) else []
    if not records:
        return henkin.ConstructedModel(henkin.init(theory, bounds, config))
    return henkin.ConstructedModel(henkin.replay(theory, records, bounds, config))


def query(theory_path, trace_path, world, formula, bounds=None, config=None):
    """Answer a truth query against a stored construction.

    Demand stages run by the query are appended to the trace, so later
    queries replay them instead of recomputing them. The trace lock is held
    from reading the trace until the new stages are appended, so concurrent
    queries on one trace run one after the other.

    Returns
    -------
    bool
    """
    with storage.trace_lock(trace_path):
        model = _load_model(theory_path, trace_path, bounds, config, lock=False)
        done = len(model.state.trace)
        f = parse(formula, model.state.signature)
        try:
            return henkin.query_truth(model, world, f)
        finally:
            storage.append_trace(model.state.trace[done:], trace_path, lock=False)
