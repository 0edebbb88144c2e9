"""Core persistence abstractions: policies, persistent execution and the k-persistent MDP."""
