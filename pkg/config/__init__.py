# Configuration loading and validation
