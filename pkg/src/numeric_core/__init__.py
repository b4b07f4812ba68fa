"""Dense tensors with reverse-mode differentiation"""
