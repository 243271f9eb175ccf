# Data models and built-in system catalogue
