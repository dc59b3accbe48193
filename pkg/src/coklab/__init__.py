"""Cokernels and coranks of products of random matrices: limit laws,
exact group and Hall-Littlewood combinatorics, and a simulation harness."""

__version__ = "0.1.0"

from .partitions import Partition, conjugate, interlaces, partitions_bounded  # noqa: E402
from .groups import GroupType, aut_count, hom_count, sur_count, subgroup_type_count, chain_count_nk, joint_chain_count_mk  # noqa: E402
from .matrices import MatrixModPrimePower, snf_type, cok_chain, rank_fp  # noqa: E402
from .limits import rank_step, corank_joint_limit, cok_prod_limit, cok_joint_limit, theory_table  # noqa: E402

__all__ = [
    "__version__",
    "Partition", "conjugate", "interlaces", "partitions_bounded",
    "GroupType", "aut_count", "hom_count", "sur_count", "subgroup_type_count", "chain_count_nk", "joint_chain_count_mk",
    "MatrixModPrimePower", "snf_type", "cok_chain", "rank_fp",
    "rank_step", "corank_joint_limit", "cok_prod_limit", "cok_joint_limit", "theory_table",
]
