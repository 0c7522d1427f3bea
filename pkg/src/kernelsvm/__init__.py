"""Kernel SVM training: SMO dual baseline, sparse primal Newton solver and a
benchmark harness."""
from .dataset import (
    BinaryView,
    Dataset,
    Sample,
    Scaling,
    apply_scale,
    binary_view,
    dump_libsvm,
    fit_scale,
    load_libsvm,
    parse_libsvm,
    subsample,
)
from .exceptions import ConvergenceWarning, ParseError, SolverError
from .kernel import KernelBlock, KernelSpec, kernel_block, kernel_row, rbf, rbf_block, track_kernel
from .metrics import EvalReport, OvoModel, error_rate, one_minus_auc, ovo_predict, ovo_train
from .smo import DualModel, SmoConfig, dual_objective, dual_predict, kkt_violation, smo_train
from .spsvm import (
    SolverTrace,
    SparsePrimalModel,
    SpSvmConfig,
    newton_reoptimize,
    primal_newton_train,
    sp_predict,
    sparse_objective,
    spsvm_train,
)
from .estimators import PrimalNewtonSVC, SMOClassifier, SparsePrimalSVC, UnitScaler

__version__ = "0.1.0"
