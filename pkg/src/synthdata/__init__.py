"""Synthetic scenes, labels and dataset files"""
