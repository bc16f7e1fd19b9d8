"""Ternary (1.58-bit) EVP quantisation of embedding vectors and bitwise scalar-product search."""
__version__ = "0.1.0"

from .bitcode import (
    PackedBinary,
    PackedTernary,
    b2sp,
    bsp,
    hamming,
    masked_add_sp,
    pack,
    read_codes,
    ternary_dot_reference,
    unpack,
    write_codes,
)
from .metrics import correlate, dot, euclidean, isotonic_fit, sample_pairs, spearman_rho
from .quantize import (
    B158Config,
    EvpConfig,
    QuantizerConfig,
    b158_quantize,
    evp_quantize,
    log10_vertex_count,
    one_bit_quantize,
    select_x,
)
from .search import exact_knn, proxy_knn, recall_k_at_n, rerank, run_recall_experiment
from .vecstore import Dataset, generate_uniform_sphere, l2_normalize, load_dataset, random_rotation, write_dataset
