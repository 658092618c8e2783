"""
Test package for benchgen.

LLM-backed tests run against replay transcripts written into ``tmp_path``
(see ``conftest.py``); nothing here touches the network.

To run tests:
    pytest tests/

Or run specific test files:
    pytest tests/test_spatial_solver.py
    pytest tests/test_sensitivity.py
"""
