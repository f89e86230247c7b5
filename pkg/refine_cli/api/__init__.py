"""Run configuration, report models and the Workbench facade."""
