"""Attack-defense analysis with partially observable stochastic games."""

from ._core import (
    AttackGraph,
    AttackModel,
    Mdp,
    PoGame,
    PosecgameError,
    Scheduler,
    Smdp,
    StochasticGame,
    Strategy,
    agp,
    apply_strategy,
    attack_graph_from_json,
    attacker_smdp,
    build_po_game,
    compose,
    defender_smdp,
    do_prerequisites,
    expand,
    export_prism_model,
    ground,
    import_mulval,
    monte_carlo,
    odt_check,
    parse_attack_model,
    run_pipeline,
    scheduler,
    synthesize,
    transform,
    validate_graph,
    verify_soundness,
)

from ._core import __version__

__all__ = [name for name in dir() if not name.startswith("_")]
