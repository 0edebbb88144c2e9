"""Environment simulators, the environment factory and dataset collection."""
