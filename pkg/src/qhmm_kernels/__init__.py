"""Quantum hidden Markov models, generative quantum kernels and classifiers."""

__version__ = "0.1.0"

from .hmm import ClassicalHmm, builtin_model, market_model
from .kernels import GramMatrix, KernelSpec, SequenceKernel, gram
from .learn import (
    KernelKnnClassifier,
    KernelSvmClassifier,
    Protocol,
    evaluate,
)
from .qhmm import Qhmm, UnitaryQhmm, embed_hmm, kraus_from_unitary, random_qhmm

__all__ = [
    "ClassicalHmm",
    "GramMatrix",
    "KernelKnnClassifier",
    "KernelSpec",
    "KernelSvmClassifier",
    "Protocol",
    "Qhmm",
    "SequenceKernel",
    "UnitaryQhmm",
    "builtin_model",
    "embed_hmm",
    "evaluate",
    "gram",
    "kraus_from_unitary",
    "market_model",
    "random_qhmm",
    "__version__",
]
