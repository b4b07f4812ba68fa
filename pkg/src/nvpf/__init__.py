"""Non-volume preserving fusion"""
