"""Network front ends for the planner: a TCP NDJSON server and a FastAPI app."""
