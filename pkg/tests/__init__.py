"""Test suite for the Micro-Net engine."""
