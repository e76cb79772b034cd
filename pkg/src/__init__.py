"""
Root module
"""
