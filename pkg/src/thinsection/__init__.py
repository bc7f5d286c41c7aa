"""Quartz / accessory mineral detection on thin-section images and QAPF
rock classification from the resulting cell tallies."""

__version__ = "0.1.0"
