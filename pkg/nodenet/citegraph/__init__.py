"""Citation dataset loading, splits and edge partitioning."""
