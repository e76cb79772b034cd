"""
Transformer module
"""
