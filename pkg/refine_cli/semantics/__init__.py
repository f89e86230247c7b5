"""Values, permission heaps, assertion evaluation, abstract models and the step relation."""
