"""Multimodal perceived-stress classification from EEG, GSR and PPG."""
__version__ = "0.1.0"
