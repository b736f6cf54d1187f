"""
Tests for py-adc-dgd
"""
