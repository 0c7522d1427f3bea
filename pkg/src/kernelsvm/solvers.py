"""Registry of binary solvers by id.

Every entry trains on a :class:`~kernelsvm.dataset.BinaryView` and returns a
model with ``decision_function(X, threads)``. Tests may swap entries in
``SOLVERS`` to inject instrumented solvers.
"""
from __future__ import annotations

from dataclasses import fields

from .kernel import KernelSpec
from .smo import DualModel, SmoConfig, smo_train
from .spsvm import SparsePrimalModel, SpSvmConfig, primal_newton_train, spsvm_train

__all__ = ["SOLVERS", "CONFIGS", "make_config", "train_binary", "model_size"]


def _smo(view, spec: KernelSpec, cfg: SmoConfig):
    return smo_train(view, spec, cfg)


def _spsvm(view, spec: KernelSpec, cfg: SpSvmConfig):
    return spsvm_train(view, spec, cfg)[0]


def _newton(view, spec: KernelSpec, cfg: SpSvmConfig):
    return primal_newton_train(view, spec, cfg.C, cfg)


SOLVERS = {"smo": _smo, "spsvm": _spsvm, "newton": _newton}
CONFIGS = {"smo": SmoConfig, "spsvm": SpSvmConfig, "newton": SpSvmConfig}


def make_config(solver: str, **options):
    """Build the config for ``solver``; options it does not know are ignored.

    Options set to ``None`` keep the config default.
    """
    if solver not in CONFIGS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {sorted(CONFIGS)}")
    cls = CONFIGS[solver]
    known = {f.name for f in fields(cls)}
    return cls(**{k: v for k, v in options.items() if k in known and v is not None})


def train_binary(solver: str, view, spec: KernelSpec, cfg):
    try:
        fn = SOLVERS[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}") from None
    return fn(view, spec, cfg)


def model_size(model) -> int:
    """Support vector count for dual models, basis size for primal ones."""
    if isinstance(model, DualModel):
        return model.n_support
    if isinstance(model, SparsePrimalModel):
        return model.n_basis
    return int(getattr(model, "size", 0))
