"""Differentially private synthetic data via marginal models.

Select-measure-generate with three selection strategies (privbayes, mst,
aim), zCDP accounting, arithmetic-exact noise sampling, utility metrics, and
a built-in DP auditing harness.
"""

from .audit import (
    AuditOutcome,
    audit_pipeline,
    craft_worst_case,
    eps_emp_from_decisions,
    run_distinguishing_game,
    support_collision_audit,
)
from .budget import (
    FreeLedger,
    PrivacyBudget,
    PrivacyLedger,
    eps_of_rho,
    rho_of_eps,
    zcdp_of_gaussian,
)
from .container import load, save
from .dataset import (
    Clique,
    DiscreteDataset,
    Marginal,
    Measurement,
    clique_cells,
    marginal_counts,
)
from .domain import ColumnSpec, Domain, load_domain
from .errors import (
    BudgetExhausted,
    BudgetRequired,
    DpSynthError,
    InfeasibleCondition,
    InvalidArgument,
    InvalidConfiguration,
    LoadError,
    ParseError,
    UnsupportedQuery,
    ValidationError,
)
from .junction_tree import JunctionTree, build_junction_tree, estimate_model_size
from .mechanisms import (
    NoiseScale,
    exponential_mechanism,
    gaussian_mechanism,
    laplace_mechanism,
    sample_discrete_gaussian,
)
from .metrics import (
    distinguishability,
    similarity_1way,
    similarity_2way,
    utility_report,
)
from .pgm import PGModel, apply_structural_zeros, fit_potentials, model_marginal, sample
from .preprocess import (
    Preprocessor,
    PrivTreeParams,
    dp_bounds,
    fit_preprocessor,
    privtree_edges,
    uniform_edges,
)
from .selectors import (
    SelectionPlan,
    Workload,
    aim_run,
    default_workload,
    mst_select,
    mutual_information,
    privbayes_select,
)
from .synthesizer import (
    FittedSynthesizer,
    PretrainedState,
    SynthesizerConfig,
    fit,
    fit_private,
    generate,
    pretrain_public,
)

__version__ = "0.1.0"
