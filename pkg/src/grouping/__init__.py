"""Spatial grouping of faces"""
