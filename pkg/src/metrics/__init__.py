"""
Evaluation metrics module
"""
