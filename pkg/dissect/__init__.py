# Query analysis: similarity matrices, position regression, gate profile
from dissect.export import export_gate_profile, export_heatmap, read_heatmap
from dissect.queries import QueryBank, collect_queries, gate_profile, step1_invariance
from dissect.regression import RegressionReport, RegressionResult, position_regression
from dissect.similarity import SimilarityMatrix, band_trend, similarity_matrix

__all__ = [
    "export_gate_profile", "export_heatmap", "read_heatmap",
    "QueryBank", "collect_queries", "gate_profile", "step1_invariance",
    "RegressionReport", "RegressionResult", "position_regression",
    "SimilarityMatrix", "band_trend", "similarity_matrix",
]
