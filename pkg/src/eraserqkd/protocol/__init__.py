"""Party behavior, sessions and the BB84 baseline."""
