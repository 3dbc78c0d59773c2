"""Volumetric Bouligand-Minkowski texture descriptors with a functional-coefficient transform."""

from .imageio import GrayImage, DatasetManifest, load_image, load_manifest, write_manifest
from .surface_edt import (SurfaceVolume, DistanceField, RadiusSet, VolumeCurve,
                          embed_surface, exact_edt, radius_set, dilation_volumes)
from .descriptors import (DescriptorCurve, FractalDimensionEstimate,
                          vbfd_descriptors, estimate_fd, smoothed_derivative,
                          fourier_derivative)
from .fda import (BasisSpec, FunctionalCoefficients, GramFactor,
                  make_basis, make_basis_for_samples, evaluate_basis, basis_matrix,
                  fit_alpha, gram_factor, cholesky_lower, transform_beta)
from .classify import (FeatureTable, ClassifierConfig, EvaluationReport,
                       knn_classify, bayes_classify, bayes_log_posterior,
                       lda_classify, lda_scores, stratified_folds, cross_validate)

__version__ = "0.1.0"

__all__ = [
    "GrayImage", "DatasetManifest", "load_image", "load_manifest", "write_manifest",
    "SurfaceVolume", "DistanceField", "RadiusSet", "VolumeCurve",
    "embed_surface", "exact_edt", "radius_set", "dilation_volumes",
    "DescriptorCurve", "FractalDimensionEstimate",
    "vbfd_descriptors", "estimate_fd", "smoothed_derivative", "fourier_derivative",
    "BasisSpec", "FunctionalCoefficients", "GramFactor",
    "make_basis", "make_basis_for_samples", "evaluate_basis", "basis_matrix",
    "fit_alpha", "gram_factor", "cholesky_lower", "transform_beta",
    "FeatureTable", "ClassifierConfig", "EvaluationReport",
    "knn_classify", "bayes_classify", "bayes_log_posterior",
    "lda_classify", "lda_scores", "stratified_folds", "cross_validate",
    "__version__",
]
