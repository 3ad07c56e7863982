"""
Integration tests for SteadyRNN.

Integration tests:
- Train real models on the default synthetic benchmark
- Take minutes of CPU time
- Run only on main branch or explicit trigger
- Use markers: @pytest.mark.integration and @pytest.mark.slow

To run integration tests:
    STEADYRNN_INTEGRATION_TESTS=1 pytest tests/integration/ -v
"""
