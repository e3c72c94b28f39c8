"""Suarez-Schopf delayed oscillator toolkit."""
