"""Quantum-eraser key distribution simulator."""
