"""Phase estimation with qubit probes under unital phase-covariant noise."""
