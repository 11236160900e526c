"""One-way secret key agreement with active-adversary robustness."""
