# Operator construction tests
