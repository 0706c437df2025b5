"""Noisy linear echo-state networks and their random-matrix performance predictions."""
