"""
Error messages and error codes for consistent error handling.
"""

# Error codes
ERROR_UNKNOWN = "UNKNOWN"
ERROR_CONFIG = "CONFIG_ERROR"
ERROR_VALIDATION_GENERAL = "VALIDATION_ERROR"
ERROR_UNSUPPORTED = "UNSUPPORTED_ERROR"
ERROR_INFEASIBLE = "INFEASIBLE_ERROR"
ERROR_SIZE = "SIZE_ERROR"
ERROR_TASK_GRAPH = "TASK_GRAPH_ERROR"
ERROR_REPORT_IO = "REPORT_IO_ERROR"
ERROR_SCHEMA_VERSION = "SCHEMA_VERSION_ERROR"

# Configuration messages
ERROR_CONFIG_UNKNOWN_KEY = "Unknown configuration key: %s"
ERROR_CONFIG_UNREADABLE = "Configuration file could not be read: %s"
ERROR_CONFIG_PENALTY_TOO_SMALL = (
    "disconnect_penalty %s does not dominate the plan cost; raise it above any feasible plan"
)

# Domain messages
ERROR_NOT_POWER_OF_TWO = "%s requires a power-of-two rank count, got %s"
ERROR_DISCONNECTED_REQUEST = "No path between %s and %s"
ERROR_CYCLIC_GRAPH = "Task graph contains a dependency cycle"
ERROR_UNTAGGED_COMM = "Communication node %s is not tagged; run tag_comm_nodes first"

# Exit codes
EXIT_SUCCESS = 0
EXIT_RUNTIME_ERROR = 1
EXIT_USAGE_ERROR = 2

# Generic messages
USER_MESSAGE_UNEXPECTED = "An unexpected error occurred while running the simulation."
