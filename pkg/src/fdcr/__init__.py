"""Full-duplex cognitive radio: predictor-driven TR/TS mode selection, closed-form analysis and simulation."""
__version__ = "0.1.0"
