"""Controlled Loewner-Kufarev coefficient flows and their Grunsky/Grassmannian data."""

__version__ = "0.1.0"
