"""CLI commands for the refinement workbench."""
