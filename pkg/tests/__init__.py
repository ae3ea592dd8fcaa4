# Tests package for the UAV planner
