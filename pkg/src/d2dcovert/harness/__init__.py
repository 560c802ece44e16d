"""Configuration, experiment drivers, result files and the command line."""
