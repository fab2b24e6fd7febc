"""SEGAR: a factored 2D sandbox whose tasks are samples from priors.

States are entities over typed factors; dynamics are declarative rules
resolved through a conflict lattice; tasks come from templates that put a
prior on every factor.  Metrics (Wasserstein-2, KS, entropy) measure how
far apart two task distributions sit.
"""

from .factors import (
    Arena,
    Entity,
    EntityError,
    EntityType,
    EntityTypeRegistry,
    FactorKind,
    FactorRegistry,
    FactorType,
    LayoutError,
    RegistrationError,
    SegarError,
    SimState,
    StateLayout,
    builtin_entity_types,
    builtin_factors,
    flatten_state,
    make_entity,
    register_factor_type,
    unflatten_state,
)
from .rules import (
    OutputKind,
    Rule,
    RuleConflictError,
    RuleOutput,
    RuleSignature,
    apply_transition,
    evaluate_rule,
    match_entities,
    resolve_conflicts,
)
from .physics import (
    MASS_FLOOR,
    VELOCITY_EPSILON,
    coulomb_acceleration,
    friction_deceleration,
    heat_mass_rate,
    kinetic_energy,
    lorentz_acceleration,
    make_world,
    resolve_collisions,
    standard_rules,
    total_momentum,
)
from .tasks import (
    ConstantPrior,
    DiscretePrior,
    GaussianPrior,
    PlacementError,
    Prior,
    PriorError,
    SlotSpec,
    TaskInstance,
    TaskSet,
    TaskTemplate,
    TemplateError,
    UniformPrior,
    build_task_set,
    load_template,
    prior_from_json,
    sample_task,
    save_template,
    template_entropy,
)
from .env import (
    Episode,
    EpisodeError,
    Simulator,
    compute_reward,
    make_episode,
)
from .metrics import (
    TransportPlan,
    assignment_solve,
    ks_statistic,
    ks_two_sample,
    task_set_report,
    transport_plan,
    wasserstein2,
)
from .rendering import factor_hue, render
from .presets import BUILTIN_TASKS, DIFFICULTIES, builtin_template

__version__ = "0.1.0"

__all__ = [
    "Arena", "Entity", "EntityError", "EntityType", "EntityTypeRegistry",
    "FactorKind", "FactorRegistry", "FactorType", "LayoutError",
    "RegistrationError", "SegarError", "SimState", "StateLayout",
    "builtin_entity_types", "builtin_factors", "flatten_state",
    "make_entity", "register_factor_type", "unflatten_state",
    "OutputKind", "Rule", "RuleConflictError", "RuleOutput", "RuleSignature",
    "apply_transition", "evaluate_rule", "match_entities", "resolve_conflicts",
    "MASS_FLOOR", "VELOCITY_EPSILON", "coulomb_acceleration",
    "friction_deceleration", "heat_mass_rate", "kinetic_energy",
    "lorentz_acceleration", "make_world", "resolve_collisions",
    "standard_rules", "total_momentum",
    "ConstantPrior", "DiscretePrior", "GaussianPrior", "PlacementError",
    "Prior", "PriorError", "SlotSpec", "TaskInstance", "TaskSet",
    "TaskTemplate", "TemplateError", "UniformPrior", "build_task_set",
    "load_template", "prior_from_json", "sample_task", "save_template",
    "template_entropy",
    "Episode", "EpisodeError", "Simulator", "compute_reward", "make_episode",
    "TransportPlan", "assignment_solve", "ks_statistic", "ks_two_sample",
    "task_set_report", "transport_plan", "wasserstein2",
    "factor_hue", "render",
    "BUILTIN_TASKS", "DIFFICULTIES", "builtin_template",
    "__version__",
]
