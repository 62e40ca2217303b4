"""Sign-coded exposure high-speed imaging: simulation and reconstruction."""
