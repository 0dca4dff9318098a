"""
Test suite for Sokoban Planning Lab.
"""
