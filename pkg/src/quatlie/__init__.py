"""quatlie: numerical workbench for quasi-Lie bracket rigidification on H^m."""

__version__ = "0.1.0"
