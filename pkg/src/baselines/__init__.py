"""Baseline estimators module"""
