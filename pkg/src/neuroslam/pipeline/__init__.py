"""Dataset ingestion, stage wiring, evaluation and synthetic worlds."""
