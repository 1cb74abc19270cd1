"""Reduction of total-cost and average-cost MDPs to discounted MDPs."""
