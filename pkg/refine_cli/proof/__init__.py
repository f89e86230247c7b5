"""Proof rules, the derivation checker and outline elaboration."""
