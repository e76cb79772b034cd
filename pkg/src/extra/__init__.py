"""
Extra module
"""
