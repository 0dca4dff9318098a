"""Sokoban Planning Lab - DRC inference, a synthetic planner, and the tools used to study them."""

__version__ = "0.1.0"
