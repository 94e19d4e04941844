"""Phase, variance and model-fitting estimators."""
