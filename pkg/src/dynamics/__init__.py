# Master equation integration and the ball of accessible states
