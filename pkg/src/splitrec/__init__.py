"""Random split trees: generation, records and cuttings, and the weakly 1-stable limit."""
