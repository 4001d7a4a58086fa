"""Design densities and cross-regular stratifications."""
