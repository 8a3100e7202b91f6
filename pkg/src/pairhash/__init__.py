"""Supervised discrete hashing with pairwise label supervision."""

from .codes import CodeMatrix, hamming, hamming_matrix, pack, sgn, unpack
from .data import (load_codes, load_features, load_labels, load_model, save_codes,
                   save_features, save_labels, save_model, synth_clusters)
from .encode import HashModel, encode_linear, fit_ls_encoder
from .gsdh import LossKind
from .linalg import set_threads
from .metrics import RetrievalMetrics, evaluate
from .pairwise import LabelData, PairwiseBlock
from .pipeline import ALGOS, lsh_codes, train_model
from .sdh import Diagnostics, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "ALGOS", "CodeMatrix", "Diagnostics", "HashModel", "LabelData", "LossKind",
    "PairwiseBlock", "RetrievalMetrics", "TrainConfig", "encode_linear", "evaluate",
    "fit_ls_encoder", "hamming", "hamming_matrix", "load_codes", "load_features",
    "load_labels", "load_model", "lsh_codes", "pack", "save_codes", "save_features",
    "save_labels", "save_model", "set_threads", "sgn", "synth_clusters", "train_model",
    "unpack",
]
