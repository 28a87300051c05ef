"""
Tests for the smallcell simulator.
"""
