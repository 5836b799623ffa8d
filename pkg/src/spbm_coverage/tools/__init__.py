"""Monte Carlo drivers, oracles and verification suites."""
