# Config-driven experiment runner
