"""Pipeline package containing orchestration logic."""

