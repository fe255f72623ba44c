"""
Common utilities, shared enums, errors and settings
"""
