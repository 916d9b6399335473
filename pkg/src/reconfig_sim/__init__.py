"""QoS-driven dynamic reconfiguration simulator for component-based multimedia applications."""
