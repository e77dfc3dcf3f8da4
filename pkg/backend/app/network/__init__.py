"""Network layer: deployment, energy, routing graphs, delay and baselines."""
