"""Reverse mode automatic differentiation module"""
