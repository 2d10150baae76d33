"""Online resource allocation with test-period samples."""
