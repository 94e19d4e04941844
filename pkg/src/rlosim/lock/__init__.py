"""Phase-lock receiver: down-mixer, fixed-point phase extraction, PI paths and actuators."""
