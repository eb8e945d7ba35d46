from .index import EmbeddingIndex, IndexError_, QueryResult, build_index
from .quality import accuracy_at_k, case_embed, case_retrieval_eval, phenotype_rmse

__all__ = [
    "EmbeddingIndex", "IndexError_", "QueryResult", "accuracy_at_k",
    "build_index", "case_embed", "case_retrieval_eval", "phenotype_rmse",
]
