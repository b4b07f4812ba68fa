"""Temporal fusion over frames"""
