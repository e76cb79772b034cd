"""
Testing module
"""
