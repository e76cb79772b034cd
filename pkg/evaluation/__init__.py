"""Experiment scripts, run with python -m evaluation <kind>"""
