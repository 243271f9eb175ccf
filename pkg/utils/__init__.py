# Logging, exceptions and parallel helpers
