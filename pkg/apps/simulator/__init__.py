# Simulator CLI application
