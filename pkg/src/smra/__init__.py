"""Sequential massive random access codec toolkit."""
