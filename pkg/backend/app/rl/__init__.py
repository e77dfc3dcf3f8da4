"""Tabular Q-learning agents: state observation, action selection, rewards."""
