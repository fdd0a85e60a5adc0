# Shared helpers for the qops tests
