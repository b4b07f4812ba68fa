"""EmoNet individual feature extractor"""
