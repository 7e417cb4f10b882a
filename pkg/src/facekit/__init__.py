"""Two-dimensional PCA/LDA face recognition with random-subspace ensembles."""
from .classify import KnnConfig, knn_predict, majority_vote, weighted_vote
from .dataset import LabeledDataset, load_pgm, read_manifest, save_pgm, stratified_split, synth_dataset
from .ensemble import EnsembleConfig, adjusted_rand_index, entropy_measure, fit_predict
from .linalg import cosine_distance, frobenius_distance, sym_eigen, whitened_gen_eigen
from .subspace import MethodSpec, fit_basis, project, reconstruct

__version__ = "0.1.0"
