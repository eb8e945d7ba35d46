"""Marker-agnostic transformer embeddings for multiplexed spatial proteomics."""

__version__ = "0.1.0"
