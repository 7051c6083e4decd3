"""Consistent vector HD-map benchmark tools: tracking, C-mAP, strided memory and map merging."""

__version__ = "0.1.0"
