"""formmine: mine form-field annotations from PDFs, build detection
datasets, evaluate detectors, and prepare flat PDFs into fillable forms."""

__version__ = "0.1.0"
