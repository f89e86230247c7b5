"""Concrete syntax: ASTs, assertions, parser, pretty printer, derivation files."""
