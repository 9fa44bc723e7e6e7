# Scenario runners
